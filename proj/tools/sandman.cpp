// sandman: persona-driven schedule experiments and agent simulation.
//
// Commands:
//   sandman mpi --trait E --direction pos --mock --seed 1 --out out/mpi
//   sandman experiment run --plan data/plans/smoke_mock.toml
//   sandman experiment analyze --store out/smoke --control Neutral
//   sandman experiment report --store out/smoke --format both
//   sandman agent run --profile data/agent_profile.toml --mock --seed 9
//   sandman agent replay --log out/agent/action_log.jsonl
//
// Exit codes: 0 ok, 2 configuration error, 3 provider error, 4 analysis
// precondition missing, 5 agent bootstrap failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sandman/sandman.hpp"

namespace fs = std::filesystem;
using namespace sandman;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitAnalysis = 4;
constexpr int kExitAgent = 5;

struct GlobalOptions {
    std::string config_path;
    std::string provider = "mock";
    bool mock = false;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string capture_path;
    std::string scripted_path;
    bool verbose = false;

    // from --config
    llm::ProviderConfig provider_config;
    double temperature = 0.7;
    std::string lexicon_path = "data/trait_lexicon.toml";
    std::string items_path = "data/mpi_items.jsonl";
    std::string catalog_path = "data/task_catalog.toml";

    void load_config_file() {
        if (config_path.empty()) return;
        const toml::Table root = toml::parse_file(config_path);
        temperature = root.get_float("temperature", temperature);
        if (auto it = root.tables.find("provider"); it != root.tables.end()) {
            const toml::Table& p = it->second;
            provider_config.endpoint = p.get_string("endpoint", provider_config.endpoint);
            provider_config.model = p.get_string("model", provider_config.model);
            provider_config.api_key_env = p.get_string("api_key_env", provider_config.api_key_env);
            provider_config.timeout =
                std::chrono::milliseconds(p.get_integer("timeout_ms", provider_config.timeout.count()));
            provider_config.retry_budget =
                static_cast<int>(p.get_integer("retries", provider_config.retry_budget));
            provider_config.backoff_base =
                std::chrono::milliseconds(p.get_integer("backoff_ms", provider_config.backoff_base.count()));
            provider_config.max_in_flight =
                static_cast<int>(p.get_integer("max_in_flight", provider_config.max_in_flight));
        }
        if (auto it = root.tables.find("paths"); it != root.tables.end()) {
            const toml::Table& p = it->second;
            lexicon_path = p.get_string("lexicon", lexicon_path);
            items_path = p.get_string("items", items_path);
            catalog_path = p.get_string("catalog", catalog_path);
        }
    }

    std::string effective_provider() const { return mock ? "mock" : provider; }

    void log(const std::string& line) const {
        if (verbose) std::cerr << "sandman: " << line << "\n";
    }
};

persona::TraitLexicon load_lexicon_or_default(const GlobalOptions& g) {
    if (fs::exists(g.lexicon_path)) {
        g.log("lexicon: " + g.lexicon_path);
        return persona::load_lexicon(g.lexicon_path);
    }
    g.log("lexicon: built-in default");
    return persona::default_lexicon();
}

scheduler::TaskCatalog load_catalog_or_default(const GlobalOptions& g) {
    if (fs::exists(g.catalog_path)) {
        g.log("catalog: " + g.catalog_path);
        return scheduler::TaskCatalog::load(g.catalog_path);
    }
    g.log("catalog: built-in default");
    return scheduler::default_catalog();
}

std::shared_ptr<llm::ChatProvider> make_provider(const GlobalOptions& g, llm::MockBehaviour mock_behaviour) {
    std::shared_ptr<llm::ChatProvider> provider;
    const std::string kind = g.effective_provider();
    if (kind == "mock") {
        provider = std::make_shared<llm::MockProvider>(mock_behaviour, g.seed);
    } else if (kind == "scripted") {
        if (g.scripted_path.empty())
            throw experiment::ConfigError("scripted provider needs --scripted <capture.jsonl>");
        provider = std::make_shared<llm::ScriptedProvider>(llm::load_capture_transcript(g.scripted_path));
    } else if (kind == "real") {
        auto http = std::make_shared<llm::HttpProvider>(g.provider_config);
        if (!http->has_credential())
            throw llm::AuthError("no API credential: set the " + http->credential_env() +
                                 " environment variable");
        llm::RetryPolicy policy;
        policy.budget = g.provider_config.retry_budget;
        policy.base_backoff = g.provider_config.backoff_base;
        auto retrying = std::make_shared<llm::RetryingProvider>(http, policy);
        provider = std::make_shared<llm::BoundedProvider>(
            retrying, std::make_shared<llm::Semaphore>(g.provider_config.max_in_flight));
    } else {
        throw experiment::ConfigError("unknown provider '" + kind + "'");
    }
    if (!g.capture_path.empty()) {
        provider = std::make_shared<llm::CapturingProvider>(
            provider, std::make_shared<llm::CaptureLog>(g.capture_path));
    }
    return provider;
}

// ---------------------------------------------------------------------------
// mpi
// ---------------------------------------------------------------------------

struct MpiArgs {
    std::string trait;
    std::string direction = "pos";
    int runs = 5;
    int parallel = 1;
    bool shuffle = false;
};

int cmd_mpi(const GlobalOptions& g, const MpiArgs& args) {
    const auto lexicon = load_lexicon_or_default(g);
    if (!fs::exists(g.items_path))
        throw experiment::ConfigError("item bank not found: " + g.items_path);
    const auto bank = psychometrics::MpiItemBank::from_jsonl(g.items_path);

    std::optional<persona::PersonaPrompt> induced;
    if (!args.trait.empty()) {
        const auto factor = persona::factor_from_token(args.trait);
        const auto direction = persona::direction_from_token(args.direction);
        if (!factor || !direction)
            throw experiment::ConfigError("bad --trait/--direction: " + args.trait + "/" + args.direction);
        if (*direction != persona::TraitDirection::Neutral) induced = lexicon.prompt(*factor, *direction);
    }

    auto provider = make_provider(g, llm::MockBehaviour::MpiAnswerer);
    psychometrics::AdministerOptions options;
    options.runs = args.runs;
    options.temperature = g.temperature;
    options.parallelism = args.parallel;
    options.shuffle_items = args.shuffle;
    options.shuffle_seed = g.seed;

    g.log("administering control condition (" + std::to_string(bank.size()) + " items x " +
          std::to_string(args.runs) + " runs)");
    const auto control_report =
        psychometrics::administer_mpi(*provider, persona::PersonaPrompt::neutral(), bank, options);

    experiment::MpiTable table;
    table.control = experiment::make_mpi_row("Neutral", persona::PersonaPrompt::neutral(), control_report,
                                             nullptr);
    std::size_t invalid = control_report.invalid_items;

    nlohmann::json scores = nlohmann::json::array();
    auto score_row = [](const std::string& label, const psychometrics::TraitScoreReport& report) {
        nlohmann::json j{{"condition", label}, {"runs", report.runs}, {"invalid_items", report.invalid_items}};
        for (auto f : persona::kOceanOrder) {
            j["samples"][std::string(1, persona::factor_letter(f))] = report.samples(f);
        }
        return j;
    };
    scores.push_back(score_row("Neutral", control_report));

    if (induced) {
        g.log("administering induced condition " + induced->label());
        const auto induced_report = psychometrics::administer_mpi(*provider, *induced, bank, options);
        const auto comparison = psychometrics::compare_traits(induced_report, control_report);
        table.rows.push_back(
            experiment::make_mpi_row(induced->label(), *induced, induced_report, &comparison));
        invalid += induced_report.invalid_items;
        scores.push_back(score_row(induced->label(), induced_report));
    }

    const fs::path out = g.out_dir.empty() ? fs::path("out/mpi") : fs::path(g.out_dir);
    util::write_file(out / "mpi_report.md", experiment::render_mpi_markdown(table));
    util::write_file(out / "mpi_report.csv", experiment::render_mpi_csv(table));
    std::string scores_jsonl;
    for (const auto& row : scores) scores_jsonl += row.dump() + "\n";
    util::write_file(out / "mpi_scores.jsonl", scores_jsonl);

    std::cout << experiment::render_mpi_markdown(table);
    std::cout << "\nreport: " << (out / "mpi_report.md").string() << "\n";
    if (invalid > 0) {
        std::cout << "warning: " << invalid << " unparseable item responses excluded\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

experiment::ExperimentPlan load_plan(const GlobalOptions& g, const std::string& plan_path) {
    if (plan_path.empty()) throw experiment::ConfigError("--plan is required");
    const auto lexicon = load_lexicon_or_default(g);
    auto plan = experiment::ExperimentPlan::load(plan_path, lexicon);
    if (!g.out_dir.empty()) plan.output_dir = g.out_dir;
    if (g.mock) plan.provider = "mock";
    if (g.seed != 0) plan.master_seed = g.seed;
    if (!g.scripted_path.empty()) {
        plan.provider = "scripted";
        plan.scripted_path = g.scripted_path;
    }
    plan.validate();
    return plan;
}

int cmd_experiment_run(const GlobalOptions& g, const std::string& plan_path, bool resume) {
    auto plan = load_plan(g, plan_path);
    if (!resume && fs::exists(plan.output_dir / "manifest.json")) {
        g.log("existing store found; continuing (runs are resumable by design)");
    }
    std::shared_ptr<llm::ChatProvider> provider;
    if (plan.provider == "real") {
        // credential check, retry, in-flight bound and --capture all apply
        GlobalOptions real = g;
        real.provider = "real";
        real.mock = false;
        provider = make_provider(real, llm::MockBehaviour::SchedulePlanner);
    } else if (!g.capture_path.empty()) {
        provider = std::make_shared<llm::CapturingProvider>(
            experiment::make_plan_provider(plan), std::make_shared<llm::CaptureLog>(g.capture_path));
    }
    g.log("running " + std::to_string(plan.conditions.size()) + " conditions x " +
          std::to_string(plan.samples_per_condition) + " samples");
    const auto store = experiment::run_experiment(plan, provider.get());
    std::cout << "store: " << store.root().string() << " (" << store.total_records() << " records)\n";
    for (const auto& label : store.condition_labels()) {
        std::size_t rejects = 0;
        for (const auto& r : store.records(label)) {
            if (!r.accepted()) ++rejects;
        }
        std::cout << "  " << label << ": " << store.records(label).size() << " records, " << rejects
                  << " rejects\n";
    }
    return kExitOk;
}

int cmd_experiment_analyze(const GlobalOptions& g, const std::string& store_path,
                           const std::string& control, bool pooled, const std::string& freq_denominator) {
    const auto store = experiment::RunStore::open_existing(store_path.empty() ? g.out_dir : store_path);
    const std::string control_label = control.empty() ? store.control_label() : control;
    const std::string catalog_path = store.catalog_path();
    const auto catalog = catalog_path.empty() ? load_catalog_or_default(g)
                                              : scheduler::TaskCatalog::load(catalog_path);
    experiment::AnalyzeOptions options;
    options.variance_model = pooled ? stats::VarianceModel::Pooled : stats::VarianceModel::Unequal;
    options.frequency_denominator = freq_denominator == "total"
                                        ? experiment::FrequencyDenominator::Total
                                        : experiment::FrequencyDenominator::Accepted;
    g.log("analyzing against control '" + control_label + "'");
    const auto tables = experiment::analyze(store, control_label, catalog, options);
    const auto path = store.root() / "analysis.json";
    util::write_file(path, tables.to_json().dump(2) + "\n");
    std::cout << "analysis: " << path.string() << "\n";
    return kExitOk;
}

int cmd_experiment_report(const GlobalOptions& g, const std::string& store_path,
                          const std::string& format) {
    const auto store = experiment::RunStore::open_existing(store_path.empty() ? g.out_dir : store_path);
    const auto analysis_path = store.root() / "analysis.json";
    experiment::ReportTables tables;
    if (fs::exists(analysis_path)) {
        tables = experiment::ReportTables::from_json(nlohmann::json::parse(util::read_file(analysis_path)));
    } else {
        g.log("no analysis.json; analyzing first");
        const std::string catalog_path = store.catalog_path();
        const auto catalog = catalog_path.empty() ? load_catalog_or_default(g)
                                                  : scheduler::TaskCatalog::load(catalog_path);
        tables = experiment::analyze(store, store.control_label(), catalog);
    }
    const auto files = experiment::render_report(tables, store.root(), format);
    if (!files.markdown.empty()) std::cout << "report: " << files.markdown.string() << "\n";
    if (!files.csv.empty()) std::cout << "report: " << files.csv.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// agent
// ---------------------------------------------------------------------------

struct AgentArgs {
    std::string profile_path = "data/agent_profile.toml";
    std::string condition;
    double speed = 0.0;
};

int cmd_agent_run(const GlobalOptions& g, const AgentArgs& args) {
    const auto lexicon = load_lexicon_or_default(g);
    const auto catalog = load_catalog_or_default(g);
    if (!fs::exists(args.profile_path))
        throw experiment::ConfigError("profile not found: " + args.profile_path);
    auto profile = engine::AgentProfile::load(args.profile_path, lexicon);

    scheduler::GenerationCondition condition;
    condition.use_system_message = true;
    condition.randomise_order = true;
    if (!args.condition.empty()) {
        const auto prompt = lexicon.prompt_for_label(args.condition);
        if (!prompt) throw experiment::ConfigError("bad --condition label: " + args.condition);
        condition.persona = *prompt;
        profile.persona = *prompt;
    } else {
        condition.persona = profile.persona;
    }
    condition.label = condition.persona.label();

    auto provider = make_provider(g, llm::MockBehaviour::SchedulePlanner);
    engine::AgentConfig config;
    config.seed = g.seed;
    config.procedural.bootstrap_prompt.temperature = g.temperature;

    engine::Agent agent(profile, catalog, *provider, condition, config);
    g.log("bootstrapping agent under condition " + condition.label);
    agent.bootstrap();
    const auto& log = agent.run_day();

    const fs::path out = g.out_dir.empty() ? fs::path("out/agent") : fs::path(g.out_dir);
    util::write_file(out / "action_log.jsonl", engine::action_log_to_jsonl(log));
    util::write_file(out / "episodic.jsonl", agent.memory().episodic.to_jsonl());
    const auto replay = engine::replay_action_log(log);
    for (const auto& [doc, text] : replay.documents) {
        util::write_file(out / "documents" / doc, text);
    }

    if (args.speed > 0.0) {
        // real-time pacing: replay the virtual gaps against the wall clock
        double prev = log.empty() ? 0.0 : log.front().t;
        for (const auto& e : log) {
            const double gap = (e.t - prev) * args.speed;
            if (gap > 0) std::this_thread::sleep_for(std::chrono::duration<double>(gap));
            prev = e.t;
        }
    }

    std::cout << "tasks: " << agent.task_list().size() << ", events: " << log.size()
              << ", documents: " << replay.documents.size() << "\n";
    std::cout << "action log: " << (out / "action_log.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_agent_replay(const GlobalOptions& g, const std::string& log_path) {
    if (!fs::exists(log_path)) throw experiment::ConfigError("action log not found: " + log_path);
    const auto events = engine::action_log_from_jsonl(util::read_file(log_path));
    const auto state = engine::replay_action_log(events);
    std::cout << "events: " << state.event_count << "\n";
    for (const auto& [channel, count] : state.events_per_channel) {
        std::cout << "  " << channel << ": " << count << "\n";
    }
    std::cout << "documents reconstructed: " << state.documents.size() << "\n";
    std::cout << "final virtual time: " << util::format_hhmm(static_cast<int>(state.final_t / 60.0)) << "\n";
    if (!g.out_dir.empty()) {
        for (const auto& [doc, text] : state.documents) {
            util::write_file(fs::path(g.out_dir) / "documents" / doc, text);
        }
        std::cout << "documents written under " << g.out_dir << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persona-driven schedule experiments and deceptive-agent simulation"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "TOML config file (provider endpoint, data paths)");
    app.add_option("--provider", g.provider, "provider: mock | real | scripted")
        ->check(CLI::IsMember({"mock", "real", "scripted"}));
    app.add_flag("--mock", g.mock, "shorthand for --provider mock");
    app.add_option("--seed", g.seed, "master seed for deterministic mock runs");
    app.add_option("--out", g.out_dir, "output directory override");
    app.add_option("--capture", g.capture_path, "append request/response pairs to this JSONL file");
    app.add_option("--scripted", g.scripted_path, "capture JSONL to replay with --provider scripted");
    app.add_flag("--verbose", g.verbose, "progress logging to stderr");

    // mpi
    MpiArgs mpi_args;
    CLI::App* mpi = app.add_subcommand("mpi", "administer the Big-Five inventory under a persona");
    mpi->add_option("--trait", mpi_args.trait, "induced factor: O, C, E, A or N (omit for control only)");
    mpi->add_option("--direction", mpi_args.direction, "pos or neg")->capture_default_str();
    mpi->add_option("--runs", mpi_args.runs, "passes through the inventory")->capture_default_str();
    mpi->add_option("--parallel", mpi_args.parallel, "concurrent item requests")->capture_default_str();
    mpi->add_flag("--shuffle", mpi_args.shuffle, "shuffle item order per run");

    // experiment
    CLI::App* exp = app.add_subcommand("experiment", "schedule-generation experiments");
    exp->require_subcommand(1);
    std::string plan_path, store_path, control_label, report_format = "both";
    std::string freq_denominator = "accepted";
    bool resume = false, pooled = false;
    CLI::App* run = exp->add_subcommand("run", "generate samples for every condition (resumable)");
    run->add_option("--plan", plan_path, "experiment plan TOML")->required();
    run->add_flag("--resume", resume, "continue an interrupted run (runs always skip existing records)");
    CLI::App* analyze = exp->add_subcommand("analyze", "statistics against the control condition");
    analyze->add_option("--store", store_path, "store directory (from run)");
    analyze->add_option("--control", control_label, "control condition label");
    analyze->add_flag("--pooled", pooled, "pooled-variance t-test instead of unequal-variance");
    analyze->add_option("--freq-denominator", freq_denominator,
                        "frequency mean denominator: accepted | total")
        ->check(CLI::IsMember({"accepted", "total"}))
        ->capture_default_str();
    CLI::App* report = exp->add_subcommand("report", "render analysis tables");
    report->add_option("--store", store_path, "store directory (from run)");
    report->add_option("--format", report_format, "md | csv | both")
        ->check(CLI::IsMember({"md", "csv", "both"}))
        ->capture_default_str();

    // agent
    CLI::App* agent = app.add_subcommand("agent", "full-day agent simulation");
    agent->require_subcommand(1);
    AgentArgs agent_args;
    std::string replay_log;
    CLI::App* agent_run = agent->add_subcommand("run", "bootstrap and simulate one day");
    agent_run->add_option("--profile", agent_args.profile_path, "agent profile TOML")->capture_default_str();
    agent_run->add_option("--condition", agent_args.condition, "persona label override, e.g. C+ or Neutral");
    agent_run->add_option("--speed", agent_args.speed,
                          "wall-clock pacing: 0 = as fast as possible, 1 = real time")
        ->capture_default_str();
    CLI::App* agent_replay = agent->add_subcommand("replay", "reconstruct state from an action log");
    agent_replay->add_option("--log", replay_log, "action_log.jsonl path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        g.load_config_file();

        if (mpi->parsed()) return cmd_mpi(g, mpi_args);
        if (exp->parsed()) {
            if (run->parsed()) return cmd_experiment_run(g, plan_path, resume);
            if (analyze->parsed())
                return cmd_experiment_analyze(g, store_path, control_label, pooled, freq_denominator);
            if (report->parsed()) return cmd_experiment_report(g, store_path, report_format);
        }
        if (agent->parsed()) {
            if (agent_run->parsed()) return cmd_agent_run(g, agent_args);
            if (agent_replay->parsed()) return cmd_agent_replay(g, replay_log);
        }
        std::cerr << "sandman: no command\n";
        return kExitConfig;
    } catch (const llm::AuthError& e) {
        std::cerr << "sandman: provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const llm::GatewayError& e) {
        std::cerr << "sandman: provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const experiment::ControlMissing& e) {
        std::cerr << "sandman: " << e.what() << "\n";
        return kExitAnalysis;
    } catch (const engine::BootstrapFailed& e) {
        std::cerr << "sandman: " << e.what() << "\n";
        return kExitAgent;
    } catch (const experiment::VersionError& e) {
        std::cerr << "sandman: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "sandman: " << e.what() << "\n";
        return kExitConfig;
    }
}
