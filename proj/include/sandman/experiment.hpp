#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandman/llm_gateway.hpp"
#include "sandman/persona.hpp"
#include "sandman/scheduler.hpp"
#include "sandman/stats.hpp"
#include "sandman/toml.hpp"
#include "sandman/util.hpp"

// Multi-condition experiment orchestration: a resumable on-disk store of run
// records plus the analysis that turns stored samples into report tables.
//
// Store layout under the output directory:
//   manifest.json                     run identity; guards resume mismatches
//   <label>/records.jsonl             one record per (condition, index)
//   <label>/schedules/NNNNN.jsonl     canonical accepted schedules
//   analysis.json                     serialized ReportTables (analyze step)
//   report.md / report.csv            rendered tables (report step)

namespace sandman::experiment {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error("config: " + what) {}
};
struct ControlMissing : std::runtime_error {
    explicit ControlMissing(const std::string& what) : std::runtime_error("control missing: " + what) {}
};
struct VersionError : std::runtime_error {
    explicit VersionError(const std::string& what) : std::runtime_error("store mismatch: " + what) {}
};

constexpr int kStoreSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Plan
// ---------------------------------------------------------------------------

struct ExperimentPlan {
    std::vector<scheduler::GenerationCondition> conditions;
    std::size_t samples_per_condition = 500;
    std::uint64_t master_seed = 0;
    std::string provider = "mock";  // mock | real | scripted
    std::string scripted_path;
    std::filesystem::path output_dir = "out";
    std::string control_label = "Neutral";
    std::string profile_text;
    std::string catalog_path;  // empty: built-in default catalog
    scheduler::BootstrapPromptConfig prompt;
    int parallelism = 1;

    void validate() const {
        if (conditions.empty()) throw ConfigError("plan has no conditions");
        if (samples_per_condition < 1) throw ConfigError("samples_per_condition must be >= 1");
        std::set<std::string> labels;
        for (const auto& c : conditions) {
            if (c.label.empty()) throw ConfigError("condition with empty label");
            if (!labels.insert(c.label).second) throw ConfigError("duplicate condition label " + c.label);
        }
        if (provider != "mock" && provider != "real" && provider != "scripted")
            throw ConfigError("provider must be mock, real or scripted");
        if (provider == "scripted" && scripted_path.empty())
            throw ConfigError("scripted provider needs scripted_path");
    }

    scheduler::TaskCatalog catalog() const {
        return catalog_path.empty() ? scheduler::default_catalog()
                                    : scheduler::TaskCatalog::load(catalog_path);
    }

    // Plan file keys: samples_per_condition, master_seed, provider,
    // output_dir, control, profile, system_message, catalog, parallelism and
    // repeated [[condition]] records {label, persona, system_message,
    // randomise_order}.
    static ExperimentPlan load(const std::filesystem::path& path, const persona::TraitLexicon& lexicon) {
        toml::Table root;
        try {
            root = toml::parse_file(path);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        ExperimentPlan plan;
        plan.samples_per_condition =
            static_cast<std::size_t>(root.get_integer("samples_per_condition", 500));
        plan.master_seed = static_cast<std::uint64_t>(root.get_integer("master_seed", 0));
        plan.provider = root.get_string("provider", "mock");
        plan.scripted_path = root.get_string("scripted_path");
        plan.output_dir = root.get_string("output_dir", "out");
        plan.control_label = root.get_string("control", "Neutral");
        plan.profile_text = root.get_string("profile");
        plan.catalog_path = root.get_string("catalog");
        plan.parallelism = static_cast<int>(root.get_integer("parallelism", 1));
        if (root.has("system_message")) plan.prompt.system_message = root.get_string("system_message");
        if (root.has("temperature")) plan.prompt.temperature = root.get_float("temperature");
        if (root.has("model")) plan.prompt.model_id = root.get_string("model");

        auto it = root.table_arrays.find("condition");
        if (it == root.table_arrays.end()) throw ConfigError("plan has no [[condition]] records");
        for (const toml::Table& t : it->second) {
            scheduler::GenerationCondition cond;
            cond.label = t.get_string("label");
            const std::string persona_token = t.get_string("persona", "neutral");
            auto prompt = lexicon.prompt_for_label(persona_token);
            if (!prompt) throw ConfigError("condition " + cond.label + ": bad persona '" + persona_token + "'");
            cond.persona = *prompt;
            if (cond.label.empty()) cond.label = cond.persona.label();
            cond.use_system_message = t.get_bool("system_message", false);
            cond.randomise_order = t.get_bool("randomise_order", false);
            plan.conditions.push_back(std::move(cond));
        }
        plan.validate();
        return plan;
    }
};

// ---------------------------------------------------------------------------
// Run records and the store
// ---------------------------------------------------------------------------

struct RunRecord {
    std::string condition;
    std::size_t index = 0;
    std::uint64_t sub_seed = 0;
    std::vector<std::string> task_order;
    std::optional<std::string> system_message;
    double temperature = 0.7;
    std::string model_id;
    std::string raw_text;
    std::optional<std::string> schedule_file;               // set iff accepted
    std::optional<scheduler::RejectReason> reject_reason;   // set iff rejected
    std::string reject_detail;
    std::int64_t latency_ms = 0;  // provider-reported latency

    bool accepted() const { return schedule_file.has_value(); }

    nlohmann::json to_json() const {
        nlohmann::json j{
            {"condition", condition},
            {"index", index},
            {"sub_seed", sub_seed},
            {"task_order", task_order},
            {"system_message", system_message ? nlohmann::json(*system_message) : nlohmann::json()},
            {"temperature", temperature},
            {"model", model_id},
            {"raw_text", raw_text},
            {"latency_ms", latency_ms},
        };
        if (schedule_file) {
            j["schedule_file"] = *schedule_file;
        } else {
            j["reject"] = {{"reason", scheduler::reject_reason_name(*reject_reason)},
                           {"detail", reject_detail}};
        }
        return j;
    }

    static RunRecord from_json(const nlohmann::json& j) {
        RunRecord r;
        r.condition = j.at("condition").get<std::string>();
        r.index = j.at("index").get<std::size_t>();
        r.sub_seed = j.at("sub_seed").get<std::uint64_t>();
        r.task_order = j.at("task_order").get<std::vector<std::string>>();
        if (j.contains("system_message") && !j["system_message"].is_null())
            r.system_message = j["system_message"].get<std::string>();
        r.temperature = j.at("temperature").get<double>();
        r.model_id = j.value("model", "");
        r.raw_text = j.at("raw_text").get<std::string>();
        r.latency_ms = j.value("latency_ms", std::int64_t{0});
        if (j.contains("schedule_file")) {
            r.schedule_file = j["schedule_file"].get<std::string>();
        } else if (j.contains("reject")) {
            auto reason = scheduler::reject_reason_from_name(j["reject"].at("reason").get<std::string>());
            if (!reason) throw VersionError("unknown reject reason in record");
            r.reject_reason = reason;
            r.reject_detail = j["reject"].value("detail", "");
        } else {
            throw VersionError("record has neither schedule_file nor reject");
        }
        return r;
    }
};

class RunStore {
public:
    // Opens or initialises a store for the plan. An existing manifest must
    // agree with the plan on identity fields, otherwise resuming would mix
    // incompatible corpora.
    static RunStore open(const ExperimentPlan& plan) {
        RunStore store;
        store.root_ = plan.output_dir;
        std::filesystem::create_directories(store.root_);
        const auto manifest_path = store.root_ / "manifest.json";
        nlohmann::json manifest;
        if (std::filesystem::exists(manifest_path)) {
            manifest = nlohmann::json::parse(util::read_file(manifest_path));
            if (manifest.value("schema_version", -1) != kStoreSchemaVersion)
                throw VersionError("unsupported store schema version");
            if (manifest.value("master_seed", std::uint64_t{0}) != plan.master_seed)
                throw VersionError("master seed differs from existing store");
            if (manifest.value("samples_per_condition", std::size_t{0}) != plan.samples_per_condition)
                throw VersionError("samples_per_condition differs from existing store");
            std::vector<std::string> labels;
            for (const auto& c : manifest.at("conditions")) labels.push_back(c.at("label").get<std::string>());
            std::vector<std::string> plan_labels;
            for (const auto& c : plan.conditions) plan_labels.push_back(c.label);
            if (labels != plan_labels) throw VersionError("condition list differs from existing store");
        } else {
            manifest = {{"schema_version", kStoreSchemaVersion},
                        {"master_seed", plan.master_seed},
                        {"samples_per_condition", plan.samples_per_condition},
                        {"control", plan.control_label},
                        {"provider", plan.provider},
                        {"catalog", plan.catalog_path},
                        {"conditions", nlohmann::json::array()}};
            for (const auto& c : plan.conditions) {
                manifest["conditions"].push_back({{"label", c.label},
                                                  {"dir", util::sanitize_label(c.label)},
                                                  {"persona", c.persona.label()},
                                                  {"system_message", c.use_system_message},
                                                  {"randomise_order", c.randomise_order}});
            }
            util::write_file(manifest_path, manifest.dump(2) + "\n");
        }
        store.manifest_ = manifest;
        return store;
    }

    static RunStore open_existing(const std::filesystem::path& root) {
        RunStore store;
        store.root_ = root;
        const auto manifest_path = root / "manifest.json";
        if (!std::filesystem::exists(manifest_path))
            throw ConfigError("no manifest.json under " + root.string());
        store.manifest_ = nlohmann::json::parse(util::read_file(manifest_path));
        if (store.manifest_.value("schema_version", -1) != kStoreSchemaVersion)
            throw VersionError("unsupported store schema version");
        return store;
    }

    const std::filesystem::path& root() const { return root_; }

    std::vector<std::string> condition_labels() const {
        std::vector<std::string> out;
        for (const auto& c : manifest_.at("conditions")) out.push_back(c.at("label").get<std::string>());
        return out;
    }

    std::string control_label() const { return manifest_.value("control", "Neutral"); }
    std::string catalog_path() const { return manifest_.value("catalog", ""); }
    std::size_t samples_per_condition() const { return manifest_.value("samples_per_condition", std::size_t{0}); }
    std::uint64_t master_seed() const { return manifest_.value("master_seed", std::uint64_t{0}); }

    bool condition_randomised(const std::string& label) const {
        for (const auto& c : manifest_.at("conditions")) {
            if (c.at("label").get<std::string>() == label) return c.value("randomise_order", false);
        }
        return false;
    }

    std::filesystem::path condition_dir(const std::string& label) const {
        for (const auto& c : manifest_.at("conditions")) {
            if (c.at("label").get<std::string>() == label)
                return root_ / c.at("dir").get<std::string>();
        }
        return root_ / util::sanitize_label(label);
    }

    std::set<std::size_t> existing_indices(const std::string& label) const {
        std::set<std::size_t> out;
        for (const auto& r : records(label)) out.insert(r.index);
        return out;
    }

    std::vector<RunRecord> records(const std::string& label) const {
        std::vector<RunRecord> out;
        const auto path = condition_dir(label) / "records.jsonl";
        if (!std::filesystem::exists(path)) return out;
        std::istringstream in(util::read_file(path));
        std::string line;
        while (std::getline(in, line)) {
            if (util::trim(line).empty()) continue;
            out.push_back(RunRecord::from_json(nlohmann::json::parse(line)));
        }
        std::sort(out.begin(), out.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.index < b.index; });
        return out;
    }

    scheduler::Schedule schedule(const std::string& label, const RunRecord& record) const {
        if (!record.schedule_file) throw std::logic_error("record has no schedule file");
        return scheduler::schedule_from_jsonl(util::read_file(condition_dir(label) / *record.schedule_file));
    }

    // Appends a record (and its canonical schedule, when accepted). Writer is
    // exclusive; records are immutable once written.
    void append(const std::string& label, RunRecord record, const std::optional<scheduler::Schedule>& schedule) {
        const auto dir = condition_dir(label);
        std::filesystem::create_directories(dir);
        if (schedule) {
            char name[32];
            std::snprintf(name, sizeof(name), "schedules/%05zu.jsonl", record.index);
            record.schedule_file = name;
            util::write_file(dir / *record.schedule_file, scheduler::to_jsonl(*schedule));
        }
        std::ofstream out(dir / "records.jsonl", std::ios::app);
        if (!out) throw std::runtime_error("cannot append to records.jsonl under " + dir.string());
        out << record.to_json().dump() << '\n';
    }

    std::size_t total_records() const {
        std::size_t n = 0;
        for (const auto& label : condition_labels()) n += records(label).size();
        return n;
    }

private:
    std::filesystem::path root_;
    nlohmann::json manifest_;
};

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

inline std::shared_ptr<llm::ChatProvider> make_plan_provider(const ExperimentPlan& plan) {
    if (plan.provider == "mock") {
        return std::make_shared<llm::MockProvider>(llm::MockBehaviour::SchedulePlanner, plan.master_seed);
    }
    if (plan.provider == "scripted") {
        return std::make_shared<llm::ScriptedProvider>(llm::load_capture_transcript(plan.scripted_path));
    }
    llm::ProviderConfig config;
    config.model = plan.prompt.model_id;
    auto http = std::make_shared<llm::HttpProvider>(config);
    llm::RetryPolicy policy;
    policy.budget = config.retry_budget;
    policy.base_backoff = config.backoff_base;
    auto retrying = std::make_shared<llm::RetryingProvider>(http, policy);
    return std::make_shared<llm::BoundedProvider>(retrying,
                                                  std::make_shared<llm::Semaphore>(config.max_in_flight));
}

// Produces exactly one record per (condition, index); existing records are
// skipped so an interrupted run resumes without duplicates. Per-condition
// sub-seeds derive deterministically from the master seed.
inline RunStore run_experiment(const ExperimentPlan& plan, llm::ChatProvider* provider_override = nullptr) {
    plan.validate();
    RunStore store = RunStore::open(plan);
    const scheduler::TaskCatalog catalog = plan.catalog();

    std::shared_ptr<llm::ChatProvider> owned;
    llm::ChatProvider* provider = provider_override;
    if (!provider) {
        owned = make_plan_provider(plan);
        provider = owned.get();
    }

    scheduler::GenerateOptions options;
    options.profile_text = plan.profile_text;
    options.prompt = plan.prompt;
    options.parallelism = plan.parallelism;

    for (const auto& condition : plan.conditions) {
        const std::set<std::size_t> existing = store.existing_indices(condition.label);
        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < plan.samples_per_condition; ++i) {
            if (!existing.count(i)) missing.push_back(i);
        }

        // Samples persist chunk by chunk in index order, so an interrupted
        // run loses at most one in-flight chunk and resumes cleanly.
        const std::size_t chunk =
            options.parallelism > 1 ? static_cast<std::size_t>(options.parallelism) * 4 : 1;
        for (std::size_t from = 0; from < missing.size(); from += chunk) {
            const std::size_t count = std::min(chunk, missing.size() - from);
            std::vector<scheduler::GeneratedSample> samples(count);
            llm::parallel_for(count, options.parallelism, [&](std::size_t k) {
                const std::size_t index = missing[from + k];
                scheduler::GeneratedSample& s = samples[k];
                s.index = index;
                s.sub_seed = rng::derive_seed(plan.master_seed, condition.label, index);
                s.task_order = condition.randomise_order
                                   ? scheduler::randomise_task_order(catalog, s.sub_seed)
                                   : catalog.names();
                s.request = scheduler::build_bootstrap_prompt(condition, s.task_order, options.profile_text,
                                                              options.prompt);
                try {
                    llm::ChatResponse response = provider->complete(s.request);
                    s.raw_text = response.text;
                    s.latency = response.latency;
                    s.result = scheduler::parse_schedule(s.raw_text, catalog);
                } catch (const llm::GatewayError& e) {
                    scheduler::RejectRecord r;
                    r.reason = scheduler::RejectReason::Transport;
                    r.detail = e.what();
                    s.result.reject = std::move(r);
                }
            });

            for (const auto& s : samples) {
                RunRecord record;
                record.condition = condition.label;
                record.index = s.index;
                record.sub_seed = s.sub_seed;
                record.task_order = s.task_order;
                record.system_message = s.request.system_message;
                record.temperature = s.request.temperature;
                record.model_id = s.request.model_id;
                record.raw_text = s.raw_text;
                record.latency_ms = s.latency.count();
                if (s.result.ok()) {
                    store.append(condition.label, std::move(record), s.result.schedule);
                } else {
                    record.reject_reason = s.result.reject->reason;
                    record.reject_detail = s.result.reject->detail;
                    store.append(condition.label, std::move(record), std::nullopt);
                }
            }
        }
    }
    return store;
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

struct DurationCell {
    stats::SampleStats stats;                 // per-occurrence durations, pooled
    std::optional<stats::StatResult> test;    // Welch vs control; absent for control/n<2
};

struct FrequencyCell {
    stats::SampleStats stats;                 // occurrences per accepted schedule
    std::optional<stats::StatResult> test;    // chi-square vs control
};

struct PositionCell {
    stats::SampleStats stats;                         // first-occurrence slot, 1-based
    std::optional<stats::CorrelationResult> corr;     // presented index vs slot
};

struct ConditionTables {
    std::string label;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    bool randomised = false;
    std::vector<DurationCell> duration;    // aligned with task_names
    std::vector<FrequencyCell> frequency;  // aligned with task_names
    std::vector<PositionCell> position;    // aligned with task_names; meaningful when randomised
    std::vector<stats::ExpectedSlot> expected;
};

struct ReportTables {
    std::vector<std::string> task_names;  // catalog order
    std::map<std::string, std::string> abbreviations;
    std::string control_label;
    std::vector<ConditionTables> conditions;  // control first, then store order

    nlohmann::json to_json() const;
    static ReportTables from_json(const nlohmann::json& j);
};

enum class FrequencyDenominator { Accepted, Total };

struct AnalyzeOptions {
    stats::VarianceModel variance_model = stats::VarianceModel::Unequal;
    FrequencyDenominator frequency_denominator = FrequencyDenominator::Accepted;
};

namespace detail {

struct ConditionSamples {
    std::vector<scheduler::Schedule> schedules;
    std::vector<std::vector<std::string>> task_orders;  // aligned with schedules
    std::size_t rejected = 0;
};

inline ConditionSamples load_condition(const RunStore& store, const std::string& label) {
    ConditionSamples out;
    for (const auto& record : store.records(label)) {
        if (record.accepted()) {
            out.schedules.push_back(store.schedule(label, record));
            out.task_orders.push_back(record.task_order);
        } else {
            ++out.rejected;
        }
    }
    return out;
}

inline std::vector<double> durations_of(const ConditionSamples& samples, const std::string& task) {
    std::vector<double> out;
    for (const auto& s : samples.schedules) {
        for (const auto& e : s.entries) {
            if (e.task == task) out.push_back(static_cast<double>(e.duration_min));
        }
    }
    return out;
}

inline std::vector<double> occurrence_counts(const ConditionSamples& samples, const std::string& task,
                                             FrequencyDenominator denom) {
    std::vector<double> out;
    for (const auto& s : samples.schedules) {
        double count = 0;
        for (const auto& e : s.entries) {
            if (e.task == task) ++count;
        }
        out.push_back(count);
    }
    if (denom == FrequencyDenominator::Total) out.insert(out.end(), samples.rejected, 0.0);
    return out;
}

// rows {condition, control} x columns {0, 1, >=2 occurrences}; all-zero
// category columns are dropped before testing.
inline std::optional<stats::StatResult> frequency_test(const std::vector<double>& cond_counts,
                                                       const std::vector<double>& control_counts) {
    auto bucket = [](const std::vector<double>& counts) {
        std::array<double, 3> b{0.0, 0.0, 0.0};
        for (double c : counts) b[c <= 0.0 ? 0 : (c == 1.0 ? 1 : 2)] += 1.0;
        return b;
    };
    const auto a = bucket(cond_counts);
    const auto b = bucket(control_counts);
    stats::ContingencyTable table;
    table.row_labels = {"condition", "control"};
    table.col_labels = {"0", "1", ">=2"};
    table.counts = {{a[0], a[1], a[2]}, {b[0], b[1], b[2]}};
    const stats::ContingencyTable pruned = table.without_zero_columns();
    if (pruned.cols() < 2) return std::nullopt;  // identical category structure, nothing to test
    try {
        return stats::chi_square_independence(pruned);
    } catch (const stats::DegenerateTable&) {
        return std::nullopt;
    }
}

inline std::optional<std::size_t> first_slot_of(const scheduler::Schedule& schedule, const std::string& task) {
    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        if (schedule.entries[i].task == task) return i + 1;
    }
    return std::nullopt;
}

}  // namespace detail

// Per task: duration populations tested against control (Welch by default),
// occurrence-count populations via chi-square; per condition: the expected
// schedule; positional statistics for randomised conditions.
inline ReportTables analyze(const RunStore& store, std::string_view control_label,
                            const scheduler::TaskCatalog& catalog, const AnalyzeOptions& options = {}) {
    const std::vector<std::string> labels = store.condition_labels();
    const std::string control(control_label);
    if (std::find(labels.begin(), labels.end(), control) == labels.end())
        throw ControlMissing("condition '" + control + "' not in store");

    const detail::ConditionSamples control_samples = detail::load_condition(store, control);
    if (control_samples.schedules.size() < 2)
        throw ControlMissing("control condition has fewer than 2 accepted samples");

    ReportTables tables;
    tables.task_names = catalog.names();
    for (const auto& name : tables.task_names) tables.abbreviations[name] = catalog.abbreviation_of(name);
    tables.abbreviations[std::string(scheduler::kEndMarkerName)] = std::string(scheduler::kEndMarkerAbbrev);
    tables.control_label = control;

    std::vector<std::string> ordered{control};
    for (const auto& label : labels) {
        if (label != control) ordered.push_back(label);
    }

    for (const auto& label : ordered) {
        const bool is_control = label == control;
        const detail::ConditionSamples samples =
            is_control ? control_samples : detail::load_condition(store, label);

        ConditionTables ct;
        ct.label = label;
        ct.accepted = samples.schedules.size();
        ct.rejected = samples.rejected;
        ct.randomised = store.condition_randomised(label);

        for (const auto& task : tables.task_names) {
            DurationCell dur;
            const std::vector<double> durations = detail::durations_of(samples, task);
            if (!durations.empty()) dur.stats = stats::describe(durations);
            if (!is_control && durations.size() >= 2) {
                const std::vector<double> control_durations = detail::durations_of(control_samples, task);
                if (control_durations.size() >= 2) {
                    dur.test = stats::two_sample_t_test(durations, control_durations, options.variance_model);
                }
            }
            ct.duration.push_back(std::move(dur));

            FrequencyCell freq;
            const std::vector<double> counts =
                detail::occurrence_counts(samples, task, options.frequency_denominator);
            if (!counts.empty()) freq.stats = stats::describe(counts);
            if (!is_control && !counts.empty()) {
                const std::vector<double> control_counts =
                    detail::occurrence_counts(control_samples, task, options.frequency_denominator);
                if (!control_counts.empty()) freq.test = detail::frequency_test(counts, control_counts);
            }
            ct.frequency.push_back(std::move(freq));

            PositionCell pos;
            std::vector<double> slots;
            std::vector<double> presented;
            for (std::size_t i = 0; i < samples.schedules.size(); ++i) {
                auto slot = detail::first_slot_of(samples.schedules[i], task);
                if (!slot) continue;  // absent samples dropped from this task's pairs
                slots.push_back(static_cast<double>(*slot));
                const auto& order = samples.task_orders[i];
                auto it = std::find(order.begin(), order.end(), task);
                presented.push_back(
                    it == order.end() ? 0.0 : static_cast<double>(std::distance(order.begin(), it)) + 1.0);
            }
            if (!slots.empty()) pos.stats = stats::describe(slots);
            if (slots.size() >= 3) {
                try {
                    pos.corr = stats::pearson_correlation(presented, slots);
                } catch (const stats::UndefinedCorrelation&) {
                } catch (const stats::InsufficientData&) {
                }
            }
            ct.position.push_back(std::move(pos));
        }

        if (!samples.schedules.empty()) {
            std::vector<std::vector<std::string>> sequences;
            sequences.reserve(samples.schedules.size());
            for (const auto& s : samples.schedules) sequences.push_back(s.task_names());
            ct.expected = stats::expected_schedule(sequences, tables.task_names,
                                                   scheduler::kEndMarkerName)
                              .slots;
        }
        tables.conditions.push_back(std::move(ct));
    }
    return tables;
}

// ---------------------------------------------------------------------------
// ReportTables serialization (full precision; rounding happens at render)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json stats_json(const stats::SampleStats& s) {
    return {{"mean", s.mean}, {"std_dev", s.std_dev}, {"n", s.n}};
}
inline stats::SampleStats stats_from(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std_dev").get<double>(), j.at("n").get<std::size_t>()};
}
inline nlohmann::json test_json(const std::optional<stats::StatResult>& t) {
    if (!t) return nullptr;
    return {{"statistic", t->statistic}, {"dof", t->dof}, {"p", t->p_value}, {"significant", t->significant}};
}
inline std::optional<stats::StatResult> test_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return stats::StatResult{j.at("statistic").get<double>(), j.at("dof").get<double>(),
                             j.at("p").get<double>(), j.at("significant").get<bool>()};
}

}  // namespace detail

inline nlohmann::json ReportTables::to_json() const {
    nlohmann::json j{{"task_names", task_names},
                     {"abbreviations", abbreviations},
                     {"control", control_label},
                     {"conditions", nlohmann::json::array()}};
    for (const auto& c : conditions) {
        nlohmann::json jc{{"label", c.label},
                          {"accepted", c.accepted},
                          {"rejected", c.rejected},
                          {"randomised", c.randomised},
                          {"duration", nlohmann::json::array()},
                          {"frequency", nlohmann::json::array()},
                          {"position", nlohmann::json::array()},
                          {"expected", nlohmann::json::array()}};
        for (const auto& cell : c.duration) {
            jc["duration"].push_back({{"stats", detail::stats_json(cell.stats)},
                                      {"test", detail::test_json(cell.test)}});
        }
        for (const auto& cell : c.frequency) {
            jc["frequency"].push_back({{"stats", detail::stats_json(cell.stats)},
                                       {"test", detail::test_json(cell.test)}});
        }
        for (const auto& cell : c.position) {
            nlohmann::json corr = nullptr;
            if (cell.corr)
                corr = {{"rho", cell.corr->rho}, {"n", cell.corr->n}, {"p", cell.corr->p_value}};
            jc["position"].push_back({{"stats", detail::stats_json(cell.stats)}, {"corr", corr}});
        }
        for (const auto& slot : c.expected) {
            jc["expected"].push_back(
                {{"slot", slot.slot}, {"task", slot.task}, {"frequency", slot.frequency}, {"tie", slot.tie}});
        }
        j["conditions"].push_back(std::move(jc));
    }
    return j;
}

inline ReportTables ReportTables::from_json(const nlohmann::json& j) {
    ReportTables t;
    t.task_names = j.at("task_names").get<std::vector<std::string>>();
    t.abbreviations = j.at("abbreviations").get<std::map<std::string, std::string>>();
    t.control_label = j.at("control").get<std::string>();
    for (const auto& jc : j.at("conditions")) {
        ConditionTables c;
        c.label = jc.at("label").get<std::string>();
        c.accepted = jc.at("accepted").get<std::size_t>();
        c.rejected = jc.at("rejected").get<std::size_t>();
        c.randomised = jc.value("randomised", false);
        for (const auto& cell : jc.at("duration")) {
            c.duration.push_back({detail::stats_from(cell.at("stats")), detail::test_from(cell.at("test"))});
        }
        for (const auto& cell : jc.at("frequency")) {
            c.frequency.push_back({detail::stats_from(cell.at("stats")), detail::test_from(cell.at("test"))});
        }
        for (const auto& cell : jc.at("position")) {
            PositionCell p;
            p.stats = detail::stats_from(cell.at("stats"));
            if (!cell.at("corr").is_null()) {
                p.corr = stats::CorrelationResult{cell["corr"].at("rho").get<double>(),
                                                  cell["corr"].at("n").get<std::size_t>(),
                                                  cell["corr"].at("p").get<double>()};
            }
            c.position.push_back(std::move(p));
        }
        for (const auto& slot : jc.at("expected")) {
            c.expected.push_back({slot.at("slot").get<std::size_t>(), slot.at("task").get<std::string>(),
                                  slot.at("frequency").get<std::size_t>(), slot.at("tie").get<bool>()});
        }
        t.conditions.push_back(std::move(c));
    }
    return t;
}

}  // namespace sandman::experiment
