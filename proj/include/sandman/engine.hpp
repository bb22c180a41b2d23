#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandman/llm_gateway.hpp"
#include "sandman/persona.hpp"
#include "sandman/rng.hpp"
#include "sandman/scheduler.hpp"
#include "sandman/toml.hpp"
#include "sandman/util.hpp"

// Agent runtime: a sequential decision loop over a bootstrapped task list,
// with CoALA-style memory stores, channels that turn content into timed
// action events, and a typing simulation with human-like speed and mistakes.
// Time is a virtual clock in seconds from midnight, so a full day runs in
// milliseconds; pacing against the wall clock is the caller's concern.

namespace sandman::engine {

struct BootstrapFailed : std::runtime_error {
    explicit BootstrapFailed(const std::string& what) : std::runtime_error("bootstrap failed: " + what) {}
};
struct ChannelUnbound : std::runtime_error {
    explicit ChannelUnbound(const std::string& what) : std::runtime_error("no channel bound: " + what) {}
};

// ---------------------------------------------------------------------------
// Agent profile
// ---------------------------------------------------------------------------

struct AgentProfile {
    std::string name;
    std::string role;
    persona::PersonaPrompt persona;  // possibly Neutral
    std::string biography;

    // Semantic self-description injected into generator prompts.
    std::string semantic_text() const {
        std::string out = name + " is " + role + ".";
        if (!biography.empty()) out += " " + biography;
        return out;
    }

    // Profile file: [agent] name/role/biography plus optional trait/direction.
    static AgentProfile load(const std::filesystem::path& path, const persona::TraitLexicon& lexicon) {
        const toml::Table root = toml::parse_file(path);
        auto it = root.tables.find("agent");
        if (it == root.tables.end()) throw std::invalid_argument("agent profile: missing [agent] table");
        const toml::Table& t = it->second;
        AgentProfile profile;
        profile.name = t.get_string("name", "Agent");
        profile.role = t.get_string("role", "an office worker");
        profile.biography = t.get_string("biography");
        const std::string trait = t.get_string("trait");
        const std::string direction = t.get_string("direction", "neutral");
        if (!trait.empty()) {
            auto f = persona::factor_from_token(trait);
            auto d = persona::direction_from_token(direction);
            if (!f || !d) throw std::invalid_argument("agent profile: bad trait/direction");
            profile.persona = lexicon.prompt(*f, *d);
        }
        return profile;
    }
};

// ---------------------------------------------------------------------------
// Memory stores
// ---------------------------------------------------------------------------

struct EpisodicEvent {
    double t = 0.0;  // virtual seconds from midnight
    std::string kind;
    nlohmann::json payload;
};

// Append-only event log; there is deliberately no mutating access.
class EpisodicLog {
public:
    void append(EpisodicEvent event) { events_.push_back(std::move(event)); }
    const std::vector<EpisodicEvent>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : events_) {
            nlohmann::json j{{"t", e.t}, {"kind", e.kind}, {"payload", e.payload}};
            out += j.dump() + "\n";
        }
        return out;
    }

private:
    std::vector<EpisodicEvent> events_;
};

class WorkingMemory {
public:
    void clear() { kv_.clear(); }
    void set(std::string key, std::string value) { kv_[std::move(key)] = std::move(value); }
    std::optional<std::string> get(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t size() const { return kv_.size(); }

private:
    std::map<std::string, std::string> kv_;
};

struct TypingProfile {
    double wpm_mean = 40.0;
    double wpm_std = 10.0;
    double mistake_prob = 0.02;  // per character, corrected with backspace

    void validate() const {
        if (!(wpm_mean > 0.0)) throw std::invalid_argument("typing profile: wpm must be positive");
        if (wpm_std < 0.0) throw std::invalid_argument("typing profile: negative wpm std");
        if (!(mistake_prob >= 0.0 && mistake_prob < 1.0))
            throw std::invalid_argument("typing profile: mistake probability outside [0,1)");
    }
};

// Prompt templates and behaviour parameters.
struct ProceduralMemory {
    scheduler::BootstrapPromptConfig bootstrap_prompt;
    TypingProfile typing;
    int bootstrap_retries = 3;
    std::size_t episodic_context_k = 5;           // recent events quoted to generators
    std::map<std::string, std::string> channel_of_task;  // overrides; default routing otherwise
};

struct SemanticMemory {
    AgentProfile profile;
    std::map<std::string, std::string> facts;
};

struct MemoryStores {
    SemanticMemory semantic;
    EpisodicLog episodic;
    ProceduralMemory procedural;
    WorkingMemory working;
};

// ---------------------------------------------------------------------------
// Task instances and action events
// ---------------------------------------------------------------------------

enum class TaskStatus { Pending, Active, Done };

struct TaskInstance {
    scheduler::TaskDef def;
    std::size_t slot = 0;  // 1-based schedule position
    int start_min = 0;
    int duration_min = 0;
    TaskStatus status = TaskStatus::Pending;
    std::string generated_content;
    bool failed = false;

    void transition(TaskStatus next) {
        const bool ok = (status == TaskStatus::Pending && next == TaskStatus::Active) ||
                        (status == TaskStatus::Active && next == TaskStatus::Done);
        if (!ok) throw std::logic_error("task status can only move Pending->Active->Done");
        status = next;
    }
};

struct ActionEvent {
    double t = 0.0;  // virtual seconds from midnight
    std::string channel;
    std::string kind;  // Open, Close, KeyPress, Backspace, Navigate, Note, Save
    nlohmann::json payload;
};

inline std::string action_log_to_jsonl(const std::vector<ActionEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        nlohmann::json j{{"t", e.t}, {"channel", e.channel}, {"kind", e.kind}, {"payload", e.payload}};
        out += j.dump() + "\n";
    }
    return out;
}

inline std::vector<ActionEvent> action_log_from_jsonl(std::string_view text) {
    std::vector<ActionEvent> events;
    for (std::string_view line : util::split_lines(text)) {
        if (util::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        events.push_back({j.at("t").get<double>(), j.at("channel").get<std::string>(),
                          j.at("kind").get<std::string>(), j.value("payload", nlohmann::json::object())});
    }
    return events;
}

// ---------------------------------------------------------------------------
// Typing simulation
// ---------------------------------------------------------------------------

// Keystroke stream for `content` starting at `start_t`. Inter-key intervals
// follow a per-key wpm draw (clamped to [mean/4, 4*mean], 5 chars per word);
// mistakes insert a wrong character, a backspace and the correction.
// Applying the stream always reconstructs `content` exactly.
inline std::vector<ActionEvent> simulate_typing(std::string_view content, const TypingProfile& profile,
                                                std::uint64_t seed, double start_t,
                                                std::string_view channel) {
    profile.validate();
    rng::Engine rng(seed);
    std::vector<ActionEvent> events;
    events.reserve(content.size() + 8);
    double t = start_t;

    auto interval = [&]() {
        double wpm = profile.wpm_std > 0.0 ? rng.normal(profile.wpm_mean, profile.wpm_std) : profile.wpm_mean;
        wpm = std::clamp(wpm, profile.wpm_mean / 4.0, profile.wpm_mean * 4.0);
        return 60.0 / (wpm * 5.0);
    };
    auto key = [&](std::string_view kind, nlohmann::json payload) {
        t += interval();
        events.push_back({t, std::string(channel), std::string(kind), std::move(payload)});
    };

    static constexpr std::string_view kNeighbours = "abcdefghijklmnopqrstuvwxyz";
    for (char c : content) {
        if (profile.mistake_prob > 0.0 && rng.chance(profile.mistake_prob)) {
            char wrong = kNeighbours[rng.below(kNeighbours.size())];
            if (wrong == c) wrong = wrong == 'z' ? 'a' : static_cast<char>(wrong + 1);
            key("KeyPress", {{"char", std::string(1, wrong)}});
            key("Backspace", nlohmann::json::object());
        }
        key("KeyPress", {{"char", std::string(1, c)}});
    }
    return events;
}

// Applies KeyPress/Backspace events in order; inverse of simulate_typing.
inline std::string reconstruct_typed_text(const std::vector<ActionEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        if (e.kind == "KeyPress") {
            out += e.payload.value("char", "");
        } else if (e.kind == "Backspace") {
            if (!out.empty()) out.pop_back();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

class Channel {
public:
    virtual ~Channel() = default;
    virtual std::string name() const = 0;
    virtual bool wants_content() const = 0;
    // Converts a task (and its generated content, possibly empty) into timed
    // events starting at start_t. Must keep timestamps non-decreasing.
    virtual std::vector<ActionEvent> perform(const TaskInstance& task, std::string_view content,
                                             double start_t, std::uint64_t seed) = 0;
};

// Universal fallback: opens, notes the activity, closes.
class LogChannel : public Channel {
public:
    std::string name() const override { return "log"; }
    bool wants_content() const override { return false; }

    std::vector<ActionEvent> perform(const TaskInstance& task, std::string_view, double start_t,
                                     std::uint64_t) override {
        const double end_t = start_t + task.duration_min * 60.0;
        return {
            {start_t, name(), "Open", {{"task", task.def.name}}},
            {start_t, name(), "Note", {{"task", task.def.name}, {"category",
                                        task.def.category == scheduler::TaskCategory::Work ? "work" : "nonwork"}}},
            {end_t, name(), "Close", {{"task", task.def.name}}},
        };
    }
};

// Simulated text editor: generated content is typed into a named document.
class DocumentChannel : public Channel {
public:
    explicit DocumentChannel(const TypingProfile& typing) : typing_(typing) {}

    std::string name() const override { return "document"; }
    bool wants_content() const override { return true; }

    std::vector<ActionEvent> perform(const TaskInstance& task, std::string_view content, double start_t,
                                     std::uint64_t seed) override {
        std::ostringstream doc;
        doc << std::setw(3) << std::setfill('0') << task.slot;
        const std::string doc_name = doc.str() + "_" + util::sanitize_label(task.def.name) + ".txt";
        std::vector<ActionEvent> events;
        events.push_back({start_t, name(), "Open", {{"doc", doc_name}, {"task", task.def.name}}});
        std::vector<ActionEvent> keys = simulate_typing(content, typing_, seed, start_t, name());
        for (auto& e : keys) {
            e.payload["doc"] = doc_name;
            events.push_back(std::move(e));
        }
        const double after_typing = events.back().t;
        events.push_back({after_typing, name(), "Save", {{"doc", doc_name}}});
        events.push_back({after_typing, name(), "Close", {{"doc", doc_name}}});
        return events;
    }

private:
    TypingProfile typing_;
};

// Simulated browser: navigation events only.
class WebChannelSim : public Channel {
public:
    std::string name() const override { return "web"; }
    bool wants_content() const override { return false; }

    std::vector<ActionEvent> perform(const TaskInstance& task, std::string_view, double start_t,
                                     std::uint64_t seed) override {
        rng::Engine rng(seed);
        static const std::vector<std::string> sites = {"news.example.com", "wiki.example.org",
                                                       "video.example.net", "mail.example.com"};
        std::vector<ActionEvent> events;
        events.push_back({start_t, name(), "Open", {{"task", task.def.name}}});
        const double end_t = start_t + task.duration_min * 60.0;
        const int pages = rng.uniform_int(2, 6);
        double t = start_t;
        for (int i = 0; i < pages; ++i) {
            t += (end_t - start_t) / (pages + 1);
            events.push_back({t, name(), "Navigate", {{"url", "https://" + rng.pick(sites) + "/"}}});
        }
        events.push_back({end_t, name(), "Close", {{"task", task.def.name}}});
        return events;
    }
};

// ---------------------------------------------------------------------------
// Content generator
// ---------------------------------------------------------------------------

// Obtains task content from the model, prompted with the persona, the
// semantic profile, recent episodic events, and the task metadata.
class Generator {
public:
    explicit Generator(llm::ChatProvider& provider, double temperature = 0.7)
        : provider_(&provider), temperature_(temperature) {}

    llm::ChatRequest compose(const MemoryStores& memory, const TaskInstance& task) const {
        std::string msg;
        const auto& persona_prompt = memory.semantic.profile.persona;
        if (!persona_prompt.text.empty()) msg += persona_prompt.text + "\n\n";
        msg += memory.semantic.profile.semantic_text() + "\n";
        const auto& events = memory.episodic.events();
        const std::size_t k = memory.procedural.episodic_context_k;
        if (!events.empty() && k > 0) {
            msg += "Recent activity:\n";
            const std::size_t from = events.size() > k ? events.size() - k : 0;
            for (std::size_t i = from; i < events.size(); ++i) {
                msg += "* " + events[i].kind + " " + events[i].payload.dump() + "\n";
            }
        }
        msg += "\nCurrent task: " + task.def.name + " (" +
               (task.def.category == scheduler::TaskCategory::Work ? "work" : "non-work") +
               "), scheduled for " + util::format_hhmm(task.start_min) + ", " +
               std::to_string(task.duration_min) +
               " minutes.\nWrite the text this person would produce while doing this task. Reply with "
               "the content only.";
        llm::ChatRequest request;
        request.user_message = std::move(msg);
        request.temperature = temperature_;
        return request;
    }

    std::string generate(const MemoryStores& memory, const TaskInstance& task) const {
        return provider_->complete(compose(memory, task)).text;
    }

private:
    llm::ChatProvider* provider_;
    double temperature_;
};

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

struct AgentConfig {
    ProceduralMemory procedural;
    std::uint64_t seed = 0;
};

class Agent {
public:
    Agent(AgentProfile profile, scheduler::TaskCatalog catalog, llm::ChatProvider& provider,
          scheduler::GenerationCondition condition, AgentConfig config = {})
        : catalog_(std::move(catalog)),
          provider_(&provider),
          condition_(std::move(condition)),
          seed_(config.seed),
          generator_(provider) {
        memory_.semantic.profile = std::move(profile);
        memory_.procedural = std::move(config.procedural);
        channels_["log"] = std::make_unique<LogChannel>();
        channels_["document"] = std::make_unique<DocumentChannel>(memory_.procedural.typing);
        channels_["web"] = std::make_unique<WebChannelSim>();
    }

    const MemoryStores& memory() const { return memory_; }
    const std::vector<TaskInstance>& task_list() const { return tasks_; }
    const std::vector<ActionEvent>& action_log() const { return action_log_; }

    // Plans the day: one schedule from the provider, converted to Pending
    // task instances in slot order. Rejected generations are retried up to
    // the budget.
    void bootstrap() {
        const int attempts = memory_.procedural.bootstrap_retries + 1;
        std::string last_error;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            const std::uint64_t sub_seed =
                rng::derive_seed(seed_, "bootstrap", static_cast<std::uint64_t>(attempt));
            const std::vector<std::string> order = condition_.randomise_order
                                                       ? scheduler::randomise_task_order(catalog_, sub_seed)
                                                       : catalog_.names();
            llm::ChatRequest request = scheduler::build_bootstrap_prompt(
                condition_, order, memory_.semantic.profile.semantic_text(),
                memory_.procedural.bootstrap_prompt);
            std::string raw;
            try {
                raw = provider_->complete(request).text;
            } catch (const llm::GatewayError& e) {
                last_error = e.what();
                continue;
            }
            scheduler::ScheduleParseResult parsed = scheduler::parse_schedule(raw, catalog_);
            if (!parsed.ok()) {
                last_error = parsed.reject->detail;
                continue;
            }

            tasks_.clear();
            std::size_t slot = 1;
            for (const auto& entry : parsed.schedule->entries) {
                TaskInstance task;
                task.def = *catalog_.find(entry.task);
                task.slot = slot++;
                task.start_min = entry.start_min;
                task.duration_min = entry.duration_min;
                tasks_.push_back(std::move(task));
            }
            clock_t_ = 0.0;
            append_episodic("PlanCreated", {{"tasks", parsed.schedule->task_names()},
                                            {"condition", condition_.label}});
            bootstrapped_ = true;
            return;
        }
        throw BootstrapFailed(last_error.empty() ? "no schedule produced" : last_error);
    }

    // Sequential policy: the next Pending task in slot order becomes Active
    // and its context is loaded into (freshly cleared) working memory.
    // Returns nullptr once every task is Done.
    TaskInstance* decision_step() {
        if (!bootstrapped_) throw std::logic_error("decision_step before bootstrap");
        memory_.working.clear();
        for (auto& task : tasks_) {
            if (task.status == TaskStatus::Pending) {
                task.transition(TaskStatus::Active);
                memory_.working.set("task", task.def.name);
                memory_.working.set("slot", std::to_string(task.slot));
                return &task;
            }
        }
        return nullptr;
    }

    // Runs one Active task through its channel; content-bearing channels get
    // generator output first. Generator failures mark the task Done with a
    // failure annotation and the day continues.
    std::vector<ActionEvent> execute_task(TaskInstance& task) {
        if (task.status != TaskStatus::Active) throw std::logic_error("execute_task needs an Active task");
        Channel& channel = channel_for(task);

        const double start_t = std::max(clock_t_, task.start_min * 60.0);
        append_episodic("TaskStarted", {{"task", task.def.name}, {"slot", task.slot}});

        std::string content;
        if (channel.wants_content()) {
            try {
                content = generator_.generate(memory_, task);
                task.generated_content = content;
            } catch (const llm::GatewayError& e) {
                task.failed = true;
                memory_.working.set("generator_error", e.what());
            }
        }

        std::vector<ActionEvent> events;
        if (!task.failed) {
            const std::uint64_t task_seed = rng::derive_seed(seed_, "task", task.slot);
            events = channel.perform(task, content, start_t, task_seed);
        }

        double end_t = start_t + task.duration_min * 60.0;
        if (!events.empty()) end_t = std::max(end_t, events.back().t);
        clock_t_ = end_t;

        task.transition(TaskStatus::Done);
        append_episodic("TaskFinished",
                        {{"task", task.def.name}, {"slot", task.slot}, {"failed", task.failed}});
        action_log_.insert(action_log_.end(), events.begin(), events.end());
        return events;
    }

    // Full day: bootstrap (if needed), then the decision loop to completion.
    const std::vector<ActionEvent>& run_day() {
        if (!bootstrapped_) bootstrap();
        while (TaskInstance* task = decision_step()) execute_task(*task);
        return action_log_;
    }

    double clock_seconds() const { return clock_t_; }

private:
    Channel& channel_for(const TaskInstance& task) {
        std::string channel_name;
        auto it = memory_.procedural.channel_of_task.find(task.def.name);
        if (it != memory_.procedural.channel_of_task.end()) {
            channel_name = it->second;
        } else {
            channel_name = default_channel(task.def);
        }
        auto ch = channels_.find(channel_name);
        if (ch == channels_.end())
            throw ChannelUnbound(channel_name + " (task " + task.def.name + ")");
        return *ch->second;
    }

    static std::string default_channel(const scheduler::TaskDef& def) {
        static const std::map<std::string, std::string> routing = {
            {"Creative", "document"}, {"Email", "document"}, {"Plan", "document"},
            {"Reflect", "document"},  {"Research", "document"}, {"Work", "document"},
            {"Media", "web"},         {"Reading", "web"},
        };
        auto it = routing.find(def.name);
        return it == routing.end() ? "log" : it->second;
    }

    void append_episodic(std::string kind, nlohmann::json payload) {
        memory_.episodic.append({clock_t_, std::move(kind), std::move(payload)});
    }

    scheduler::TaskCatalog catalog_;
    llm::ChatProvider* provider_;
    scheduler::GenerationCondition condition_;
    std::uint64_t seed_ = 0;
    Generator generator_;
    MemoryStores memory_;
    std::vector<TaskInstance> tasks_;
    std::vector<ActionEvent> action_log_;
    double clock_t_ = 0.0;
    bool bootstrapped_ = false;
    std::map<std::string, std::unique_ptr<Channel>> channels_;
};

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct ReplayState {
    std::map<std::string, std::string> documents;  // doc name -> reconstructed text
    std::size_t event_count = 0;
    double final_t = 0.0;
    std::map<std::string, std::size_t> events_per_channel;
};

// Rebuilds final state from a persisted action log (event-sourcing check).
inline ReplayState replay_action_log(const std::vector<ActionEvent>& events) {
    ReplayState state;
    for (const auto& e : events) {
        ++state.event_count;
        ++state.events_per_channel[e.channel];
        state.final_t = std::max(state.final_t, e.t);
        if (e.kind == "KeyPress" || e.kind == "Backspace") {
            const std::string doc = e.payload.value("doc", "");
            std::string& text = state.documents[doc];
            if (e.kind == "KeyPress") {
                text += e.payload.value("char", "");
            } else if (!text.empty()) {
                text.pop_back();
            }
        }
    }
    return state;
}

// Task-list snapshot reconstructed purely from the episodic log.
struct EpisodicReplay {
    std::vector<std::string> planned_tasks;
    std::map<std::size_t, std::string> status_by_slot;  // "Active"/"Done"
};

inline EpisodicReplay replay_episodic(const EpisodicLog& log) {
    EpisodicReplay out;
    for (const auto& e : log.events()) {
        if (e.kind == "PlanCreated") {
            out.planned_tasks = e.payload.at("tasks").get<std::vector<std::string>>();
        } else if (e.kind == "TaskStarted") {
            out.status_by_slot[e.payload.at("slot").get<std::size_t>()] = "Active";
        } else if (e.kind == "TaskFinished") {
            out.status_by_slot[e.payload.at("slot").get<std::size_t>()] = "Done";
        }
    }
    return out;
}

}  // namespace sandman::engine
