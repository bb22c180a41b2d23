#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sandman/util.hpp"

// Drives the installed binary through a shell; every assertion here is about
// the CLI contract (flags, exit codes, artifacts), not library internals.

namespace fs = std::filesystem;

namespace {

const std::string kCli = SANDMAN_CLI_PATH;
const fs::path kRepo = SANDMAN_SOURCE_DIR;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path out_file = fs::temp_directory_path() / ("sandman_cli_out_" + std::to_string(counter++));
    const std::string cmd = "cd " + kRepo.string() + " && " + env_prefix + kCli + " " + args + " > " +
                            out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = sandman::util::read_file(out_file);
    fs::remove(out_file);
    return result;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("--help documents every global flag and subcommand") {
    const auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* token : {"--config", "--provider", "--mock", "--seed", "--out", "--capture",
                              "--verbose", "mpi", "experiment", "agent"}) {
        INFO(token);
        CHECK(r.output.find(token) != std::string::npos);
    }
    const auto mpi_help = run_cli("mpi --help");
    for (const char* token : {"--trait", "--direction", "--runs", "--parallel", "--shuffle"}) {
        INFO(token);
        CHECK(mpi_help.output.find(token) != std::string::npos);
    }
    const auto run_help = run_cli("experiment run --help");
    CHECK(run_help.output.find("--plan") != std::string::npos);
    CHECK(run_help.output.find("--resume") != std::string::npos);
    const auto agent_help = run_cli("agent run --help");
    for (const char* token : {"--profile", "--condition", "--speed"}) {
        INFO(token);
        CHECK(agent_help.output.find(token) != std::string::npos);
    }
}

TEST_CASE("mpi with the mock provider is deterministic per seed") {
    TempDir a("sandman_cli_mpi_a"), b("sandman_cli_mpi_b");
    const auto ra =
        run_cli("--mock --seed 1 --out " + a.path.string() + " mpi --trait E --direction pos --runs 2");
    const auto rb =
        run_cli("--mock --seed 1 --out " + b.path.string() + " mpi --trait E --direction pos --runs 2");
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    CHECK(sandman::util::read_file(a.path / "mpi_report.md") ==
          sandman::util::read_file(b.path / "mpi_report.md"));
    CHECK(sandman::util::read_file(a.path / "mpi_scores.jsonl") ==
          sandman::util::read_file(b.path / "mpi_scores.jsonl"));
    CHECK(fs::exists(a.path / "mpi_report.csv"));
}

TEST_CASE("missing credential with the real provider exits 3 naming the env var") {
    const auto r = run_cli("--provider real mpi --trait E", "env -u SANDMAN_API_KEY ");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("SANDMAN_API_KEY") != std::string::npos);

    SECTION("also for a real-provider experiment plan") {
        TempDir dir("sandman_cli_real_plan");
        const auto rr = run_cli("--out " + (dir.path / "out").string() +
                                    " experiment run --plan data/plans/interventions.toml",
                                "env -u SANDMAN_API_KEY ");
        CHECK(rr.exit_code == 3);
        CHECK(rr.output.find("SANDMAN_API_KEY") != std::string::npos);
    }
}

TEST_CASE("config errors exit 2") {
    SECTION("bad plan path") {
        const auto r = run_cli("experiment run --plan /no/such/plan.toml");
        CHECK(r.exit_code == 2);
    }
    SECTION("bad condition label") {
        const auto r = run_cli("--mock agent run --condition Z?");
        CHECK(r.exit_code == 2);
    }
    SECTION("missing item bank") {
        TempDir cfg("sandman_cli_cfg");
        sandman::util::write_file(cfg.path / "cfg.toml", "[paths]\nitems = \"/no/such/items.jsonl\"\n");
        const auto r = run_cli("--config " + (cfg.path / "cfg.toml").string() + " --mock mpi --trait E");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("item bank") != std::string::npos);
    }
}

TEST_CASE("experiment pipeline: run, resume idempotency, analyze, report") {
    TempDir dir("sandman_cli_exp");
    const std::string plan = (kRepo / "data/plans/smoke_mock.toml").string();
    const std::string store = (dir.path / "store").string();

    const auto r1 = run_cli("--out " + store + " experiment run --plan " + plan);
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output.find("100 records") != std::string::npos);

    const auto records_before = sandman::util::read_file(fs::path(store) / "Neutral" / "records.jsonl");
    const auto r2 = run_cli("--out " + store + " experiment run --plan " + plan + " --resume");
    REQUIRE(r2.exit_code == 0);
    CHECK(sandman::util::read_file(fs::path(store) / "Neutral" / "records.jsonl") == records_before);

    const auto ra = run_cli("experiment analyze --store " + store);
    REQUIRE(ra.exit_code == 0);
    CHECK(fs::exists(fs::path(store) / "analysis.json"));

    const auto analysis_once = sandman::util::read_file(fs::path(store) / "analysis.json");
    run_cli("experiment analyze --store " + store);
    CHECK(sandman::util::read_file(fs::path(store) / "analysis.json") == analysis_once);

    const auto rr = run_cli("experiment report --store " + store + " --format both");
    REQUIRE(rr.exit_code == 0);
    CHECK(fs::exists(fs::path(store) / "report.md"));
    CHECK(fs::exists(fs::path(store) / "report.csv"));

    SECTION("missing control exits 4") {
        const auto r = run_cli("experiment analyze --store " + store + " --control NoSuch");
        CHECK(r.exit_code == 4);
    }
}

TEST_CASE("agent run honours --seed and replays") {
    TempDir a("sandman_cli_agent_a"), b("sandman_cli_agent_b");
    const auto ra = run_cli("--mock --seed 9 --out " + a.path.string() + " agent run");
    const auto rb = run_cli("--mock --seed 9 --out " + b.path.string() + " agent run");
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    CHECK(sandman::util::read_file(a.path / "action_log.jsonl") ==
          sandman::util::read_file(b.path / "action_log.jsonl"));
    CHECK(sandman::util::read_file(a.path / "episodic.jsonl") ==
          sandman::util::read_file(b.path / "episodic.jsonl"));

    SECTION("a different seed changes the day") {
        TempDir c("sandman_cli_agent_c");
        const auto rc = run_cli("--mock --seed 10 --out " + c.path.string() + " agent run");
        REQUIRE(rc.exit_code == 0);
        CHECK(sandman::util::read_file(a.path / "action_log.jsonl") !=
              sandman::util::read_file(c.path / "action_log.jsonl"));
    }
    SECTION("replay summarises the log") {
        const auto rr = run_cli("agent replay --log " + (a.path / "action_log.jsonl").string());
        CHECK(rr.exit_code == 0);
        CHECK(rr.output.find("events:") != std::string::npos);
        CHECK(rr.output.find("documents reconstructed:") != std::string::npos);
    }
    SECTION("pacing changes wall time but not the event sequence") {
        TempDir d("sandman_cli_agent_d");
        const auto rd =
            run_cli("--mock --seed 9 --out " + d.path.string() + " agent run --speed 0.000001");
        REQUIRE(rd.exit_code == 0);
        CHECK(sandman::util::read_file(a.path / "action_log.jsonl") ==
              sandman::util::read_file(d.path / "action_log.jsonl"));
    }
}

TEST_CASE("agent bootstrap failure exits 5") {
    TempDir dir("sandman_cli_boot");
    // a scripted transcript with nothing parseable as a schedule
    std::string capture;
    for (int i = 0; i < 8; ++i) {
        capture += R"({"request":{},"response":{"text":"I would rather not.","prompt_tokens":0,"completion_tokens":0}})";
        capture += "\n";
    }
    sandman::util::write_file(dir.path / "garbage.jsonl", capture);
    const auto r = run_cli("--provider scripted --scripted " + (dir.path / "garbage.jsonl").string() +
                           " --out " + (dir.path / "out").string() + " agent run");
    CHECK(r.exit_code == 5);
}

TEST_CASE("capture flag writes a replayable transcript") {
    TempDir dir("sandman_cli_capture");
    const std::string capture = (dir.path / "capture.jsonl").string();
    const auto r1 = run_cli("--mock --seed 3 --out " + (dir.path / "a").string() + " --capture " + capture +
                            " mpi --runs 1");
    REQUIRE(r1.exit_code == 0);
    REQUIRE(fs::exists(capture));
    // the default temperature is on the wire for every captured request
    {
        std::ifstream in(capture);
        std::string line;
        std::size_t lines = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ++lines;
            CHECK(line.find("\"temperature\":0.7") != std::string::npos);
        }
        CHECK(lines > 0);
    }

    // replaying the capture gives the identical report
    const auto r2 = run_cli("--provider scripted --scripted " + capture + " --out " +
                            (dir.path / "b").string() + " mpi --runs 1");
    REQUIRE(r2.exit_code == 0);
    CHECK(sandman::util::read_file(dir.path / "a" / "mpi_report.md") ==
          sandman::util::read_file(dir.path / "b" / "mpi_report.md"));
}
