#pragma once

// Umbrella header.

#include "sandman/engine.hpp"
#include "sandman/experiment.hpp"
#include "sandman/llm_gateway.hpp"
#include "sandman/persona.hpp"
#include "sandman/psychometrics.hpp"
#include "sandman/report.hpp"
#include "sandman/rng.hpp"
#include "sandman/scheduler.hpp"
#include "sandman/stats.hpp"
#include "sandman/toml.hpp"
#include "sandman/util.hpp"
