#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
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
#include "sandman/rng.hpp"
#include "sandman/toml.hpp"
#include "sandman/util.hpp"

// Task catalog, bootstrap prompt construction, schedule parsing with reject
// accounting, and seeded sample generation for the treatment conditions.

namespace sandman::scheduler {

enum class TaskCategory { Work, NonWork };

struct TaskDef {
    std::string name;          // canonical, as presented in prompts
    std::string abbreviation;  // short form used in compact tables
    TaskCategory category = TaskCategory::Work;
    std::vector<std::string> aliases;  // extra accepted spellings
};

// Marker slot terminating every schedule.
constexpr std::string_view kEndMarkerName = "EndOfDay";
constexpr std::string_view kEndMarkerAbbrev = "End.";

namespace detail {

// canonical lookup key: lowercase, trailing dots stripped, spaces collapsed
inline std::string lookup_key(std::string_view raw) {
    std::string s = util::to_lower(util::trim(raw));
    while (!s.empty() && s.back() == '.') s.pop_back();
    std::string out;
    bool last_space = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space && last_space) continue;
        out += space ? ' ' : c;
        last_space = space;
    }
    return out;
}

}  // namespace detail

class TaskCatalog {
public:
    TaskCatalog() = default;
    explicit TaskCatalog(std::vector<TaskDef> tasks) : tasks_(std::move(tasks)) {
        if (tasks_.empty()) throw std::invalid_argument("task catalog: empty");
        std::set<std::string> names, abbrevs;
        for (std::size_t i = 0; i < tasks_.size(); ++i) {
            const TaskDef& t = tasks_[i];
            if (!names.insert(detail::lookup_key(t.name)).second)
                throw std::invalid_argument("task catalog: duplicate name " + t.name);
            if (!abbrevs.insert(detail::lookup_key(t.abbreviation)).second)
                throw std::invalid_argument("task catalog: duplicate abbreviation " + t.abbreviation);
            add_key(t.name, i);
            add_key(t.abbreviation, i);
            for (const auto& a : t.aliases) add_key(a, i);
        }
    }

    const std::vector<TaskDef>& tasks() const { return tasks_; }
    std::size_t size() const { return tasks_.size(); }

    // Canonical presentation order (the Baseline condition's list order).
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(tasks_.size());
        for (const auto& t : tasks_) out.push_back(t.name);
        return out;
    }

    // Case-insensitive resolution over names, abbreviations and aliases.
    std::optional<std::string> resolve(std::string_view raw) const {
        auto it = index_.find(detail::lookup_key(raw));
        if (it == index_.end()) return std::nullopt;
        return tasks_[it->second].name;
    }

    const TaskDef* find(std::string_view canonical_name) const {
        auto it = index_.find(detail::lookup_key(canonical_name));
        return it == index_.end() ? nullptr : &tasks_[it->second];
    }

    // Position in canonical order; used as the tie-break rank.
    std::optional<std::size_t> position(std::string_view canonical_name) const {
        auto it = index_.find(detail::lookup_key(canonical_name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::string abbreviation_of(std::string_view name) const {
        if (name == kEndMarkerName || name == kEndMarkerAbbrev) return std::string(kEndMarkerAbbrev);
        const TaskDef* def = find(name);
        return def ? def->abbreviation : std::string(name);
    }

    // Catalog file: repeated [[task]] records with name/abbreviation/category
    // and an optional aliases array.
    static TaskCatalog load(const std::filesystem::path& path) {
        const toml::Table root = toml::parse_file(path);
        auto it = root.table_arrays.find("task");
        if (it == root.table_arrays.end())
            throw std::invalid_argument("task catalog: no [[task]] records in " + path.string());
        std::vector<TaskDef> tasks;
        for (const toml::Table& t : it->second) {
            TaskDef def;
            def.name = t.get_string("name");
            def.abbreviation = t.get_string("abbreviation");
            const std::string cat = util::to_lower(t.get_string("category", "work"));
            def.category = cat == "nonwork" || cat == "non-work" ? TaskCategory::NonWork : TaskCategory::Work;
            if (t.has("aliases")) def.aliases = t.at("aliases").as_string_array();
            if (def.name.empty() || def.abbreviation.empty())
                throw std::invalid_argument("task catalog: record missing name or abbreviation");
            tasks.push_back(std::move(def));
        }
        return TaskCatalog(std::move(tasks));
    }

private:
    void add_key(std::string_view key, std::size_t idx) {
        index_.emplace(detail::lookup_key(key), idx);
    }

    std::vector<TaskDef> tasks_;
    std::map<std::string, std::size_t> index_;
};

// The sixteen-task default inventory with compact-table abbreviations. Email
// and Collab. keep their alternate spellings as aliases.
inline TaskCatalog default_catalog() {
    using C = TaskCategory;
    return TaskCatalog({
        {"Call", "Cal.", C::Work, {}},
        {"Coffee", "Cof.", C::NonWork, {}},
        {"Creative", "Cre.", C::Work, {}},
        {"Email", "Ema.", C::Work, {"Emails"}},
        {"Exercise", "Exe.", C::NonWork, {}},
        {"Reading", "Rea.", C::NonWork, {"Read"}},
        {"Lunch", "Lun.", C::NonWork, {}},
        {"Meeting", "Mee.", C::Work, {"Meetings"}},
        {"Break", "Bre.", C::NonWork, {}},
        {"Personal", "PT", C::NonWork, {"Personal Time"}},
        {"Plan", "Pla.", C::Work, {"Planning"}},
        {"Reflect", "Ref.", C::Work, {"Reflection"}},
        {"Research", "Res.", C::Work, {}},
        {"Media", "Med.", C::NonWork, {"Social Media"}},
        {"Collab.", "Tea.", C::Work, {"Teamwork", "Collaboration", "Collab"}},
        {"Work", "Wrk.", C::Work, {}},
    });
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

struct ScheduleEntry {
    std::string task;      // canonical catalog name
    int start_min = 0;     // minutes from midnight, [0, 1440)
    int duration_min = 0;  // > 0, start + duration <= 1440

    bool operator==(const ScheduleEntry&) const = default;
};

struct Schedule {
    std::vector<ScheduleEntry> entries;  // sorted by start, non-overlapping

    bool operator==(const Schedule&) const = default;

    // slots including the terminal EndOfDay marker
    std::size_t slot_count() const { return entries.size() + 1; }

    std::vector<std::string> task_names() const {
        std::vector<std::string> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.task);
        return out;
    }

    void validate(const TaskCatalog& catalog) const {
        int prev_end = -1;
        for (const auto& e : entries) {
            if (e.duration_min <= 0) throw std::invalid_argument("schedule: non-positive duration");
            if (e.start_min < 0 || e.start_min >= 24 * 60)
                throw std::invalid_argument("schedule: start outside the day");
            if (e.start_min + e.duration_min > 24 * 60)
                throw std::invalid_argument("schedule: entry runs past midnight");
            if (e.start_min < prev_end) throw std::invalid_argument("schedule: overlapping entries");
            if (!catalog.resolve(e.task)) throw std::invalid_argument("schedule: unknown task " + e.task);
            prev_end = e.start_min + e.duration_min;
        }
    }
};

// Canonical line serialisation: "HH:MM - HH:MM | TaskName", one per entry.
inline std::string to_lines(const Schedule& schedule) {
    std::string out;
    for (const auto& e : schedule.entries) {
        out += util::format_hhmm(e.start_min) + " - " + util::format_hhmm(e.start_min + e.duration_min) +
               " | " + e.task + "\n";
    }
    return out;
}

// Canonical JSONL: one {task,start_min,duration_min} object per entry and a
// terminal {"end":true} marker line.
inline std::string to_jsonl(const Schedule& schedule) {
    std::string out;
    for (const auto& e : schedule.entries) {
        nlohmann::json j{{"task", e.task}, {"start_min", e.start_min}, {"duration_min", e.duration_min}};
        out += j.dump() + "\n";
    }
    out += nlohmann::json{{"end", true}}.dump() + "\n";
    return out;
}

inline Schedule schedule_from_jsonl(std::string_view text) {
    Schedule s;
    for (std::string_view line : util::split_lines(text)) {
        if (util::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("end", false)) break;
        s.entries.push_back({j.at("task").get<std::string>(), j.at("start_min").get<int>(),
                             j.at("duration_min").get<int>()});
    }
    return s;
}

// ---------------------------------------------------------------------------
// Conditions and rejects
// ---------------------------------------------------------------------------

struct GenerationCondition {
    persona::PersonaPrompt persona;  // Neutral for the control
    bool use_system_message = false;
    bool randomise_order = false;
    std::string label;
};

enum class RejectReason { UnknownTask, Overlap, Unparseable, EmptySchedule, Transport };

inline std::string_view reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::UnknownTask: return "UnknownTask";
        case RejectReason::Overlap: return "Overlap";
        case RejectReason::Unparseable: return "Unparseable";
        case RejectReason::EmptySchedule: return "EmptySchedule";
        case RejectReason::Transport: return "Transport";
    }
    return "?";
}

inline std::optional<RejectReason> reject_reason_from_name(std::string_view name) {
    if (name == "UnknownTask") return RejectReason::UnknownTask;
    if (name == "Overlap") return RejectReason::Overlap;
    if (name == "Unparseable") return RejectReason::Unparseable;
    if (name == "EmptySchedule") return RejectReason::EmptySchedule;
    if (name == "Transport") return RejectReason::Transport;
    return std::nullopt;
}

struct RejectRecord {
    std::string condition_label;
    std::size_t sample_index = 0;
    RejectReason reason = RejectReason::Unparseable;
    std::string detail;    // first failed rule, human readable
    std::string raw_text;  // retained verbatim
};

struct ScheduleParseResult {
    std::optional<Schedule> schedule;
    std::optional<RejectRecord> reject;

    bool ok() const { return schedule.has_value(); }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

// Parses "H:MM"/"HH:MM" starting at `pos`. Returns minutes and advances pos,
// or nullopt leaving pos untouched. "24:00" is allowed (end-of-day endpoint).
inline std::optional<int> take_hhmm(std::string_view s, std::size_t& pos) {
    std::size_t p = pos;
    int hours = 0, digits = 0;
    while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p])) && digits < 2) {
        hours = hours * 10 + (s[p] - '0');
        ++p;
        ++digits;
    }
    if (digits == 0 || p >= s.size() || s[p] != ':') return std::nullopt;
    ++p;
    int minutes = 0, mdigits = 0;
    while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p])) && mdigits < 2) {
        minutes = minutes * 10 + (s[p] - '0');
        ++p;
        ++mdigits;
    }
    if (mdigits != 2) return std::nullopt;
    if (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) return std::nullopt;
    if (hours > 24 || minutes > 59 || (hours == 24 && minutes != 0)) return std::nullopt;
    pos = p;
    return hours * 60 + minutes;
}

inline bool skip_range_separator(std::string_view s, std::size_t& pos) {
    std::size_t p = pos;
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
    if (p < s.size() && (s[p] == '-' || s[p] == '~')) {
        ++p;
        while (p < s.size() && s[p] == '-') ++p;  // "--"
    } else if (p + 2 < s.size() && static_cast<unsigned char>(s[p]) == 0xE2 &&
               static_cast<unsigned char>(s[p + 1]) == 0x80 &&
               (static_cast<unsigned char>(s[p + 2]) == 0x93 || static_cast<unsigned char>(s[p + 2]) == 0x94)) {
        p += 3;  // en/em dash
    } else if (p + 1 < s.size() && (s[p] == 't' || s[p] == 'T') && (s[p + 1] == 'o' || s[p + 1] == 'O')) {
        p += 2;
    } else {
        return false;
    }
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
    pos = p;
    return true;
}

struct LineEntry {
    int start = 0;
    int end = 0;
    std::string name;
};

enum class LineKind { Prose, Entry, Malformed, EndMarker };

struct LineScan {
    LineKind kind = LineKind::Prose;
    LineEntry entry;
    std::string error;
};

inline bool is_end_marker(std::string_view t) {
    const std::string k = lookup_key(t);
    return k == "end" || k == "end of day" || k == "endofday" || k == "end of schedule";
}

// A line is schedule-shaped iff it contains "time - time"; shaped lines with
// bad values are malformed, everything else is tolerated as prose.
inline LineScan scan_line(std::string_view line) {
    LineScan out;
    std::string_view t = util::trim(line);
    if (t.empty()) return out;
    if (is_end_marker(t)) {
        out.kind = LineKind::EndMarker;
        return out;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) continue;
        if (i > 0 && std::isdigit(static_cast<unsigned char>(t[i - 1]))) continue;
        std::size_t pos = i;
        auto start = take_hhmm(t, pos);
        if (!start) continue;
        if (!skip_range_separator(t, pos)) continue;
        auto end = take_hhmm(t, pos);
        if (!end) continue;

        // shaped line; the rest is the task name after optional separators
        while (pos < t.size() && (t[pos] == ' ' || t[pos] == '\t' || t[pos] == '|' || t[pos] == '-' ||
                                  t[pos] == ':' || t[pos] == '.' || t[pos] == ')')) {
            // keep a dot that belongs to the name ("Collab.") -- only strip
            // separators directly after the time range
            if (t[pos] == '.' && pos + 1 < t.size() && std::isalpha(static_cast<unsigned char>(t[pos + 1])))
                break;
            ++pos;
        }
        std::string name(util::trim(t.substr(pos)));
        out.kind = LineKind::Entry;
        if (*start >= 24 * 60) {
            out.kind = LineKind::Malformed;
            out.error = "start time out of range";
            return out;
        }
        if (name.empty()) {
            out.kind = LineKind::Malformed;
            out.error = "missing task name";
            return out;
        }
        if (*end <= *start) {
            out.kind = LineKind::Malformed;
            out.error = "end time not after start time";
            return out;
        }
        out.entry = {*start, *end, std::move(name)};
        return out;
    }
    return out;
}

inline std::optional<std::vector<LineEntry>> entries_from_json(const nlohmann::json& arr, std::string& error) {
    std::vector<LineEntry> out;
    for (const auto& item : arr) {
        if (!item.is_object()) {
            error = "array element is not an object";
            return std::nullopt;
        }
        // terminal {"end": true} marker; distinct from an entry's "end" time
        if (item.contains("end") && item["end"].is_boolean()) {
            if (item["end"].get<bool>()) continue;
            error = "bad end marker";
            return std::nullopt;
        }
        if (!item.contains("task") || !item["task"].is_string()) {
            error = "entry missing task";
            return std::nullopt;
        }
        LineEntry e;
        e.name = item["task"].get<std::string>();
        if (item.contains("start_min") && item.contains("duration_min") &&
            item["start_min"].is_number_integer() && item["duration_min"].is_number_integer()) {
            e.start = item["start_min"].get<int>();
            e.end = e.start + item["duration_min"].get<int>();
        } else if (item.contains("start") && item.contains("end") && item["start"].is_string() &&
                   item["end"].is_string()) {
            const std::string ss = item["start"].get<std::string>();
            const std::string es = item["end"].get<std::string>();
            std::size_t sp = 0, ep = 0;
            auto smin = take_hhmm(ss, sp);
            auto emin = take_hhmm(es, ep);
            if (!smin || sp != ss.size() || !emin || ep != es.size()) {
                error = "bad start/end time in entry";
                return std::nullopt;
            }
            e.start = *smin;
            e.end = *emin;
        } else {
            error = "entry missing start/end times";
            return std::nullopt;
        }
        if (e.start < 0 || e.start >= 24 * 60 || e.end <= e.start || e.end > 24 * 60) {
            error = "entry times out of range";
            return std::nullopt;
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace detail

namespace detail {
ScheduleParseResult parse_schedule_impl(std::string_view raw, const TaskCatalog& catalog);
}

// Accepts the line format ("HH:MM - HH:MM | TaskName") or a JSON array of
// entry objects. Returns a reject record with the first failed rule instead
// of throwing; arbitrary bytes never crash it.
inline ScheduleParseResult parse_schedule(std::string_view raw, const TaskCatalog& catalog) {
    try {
        return detail::parse_schedule_impl(raw, catalog);
    } catch (const std::exception& e) {
        ScheduleParseResult result;
        RejectRecord r;
        r.reason = RejectReason::Unparseable;
        r.detail = std::string("internal parse error: ") + e.what();
        r.raw_text = std::string(raw);
        result.reject = std::move(r);
        return result;
    }
}

namespace detail {

inline ScheduleParseResult parse_schedule_impl(std::string_view raw, const TaskCatalog& catalog) {
    ScheduleParseResult result;
    auto reject = [&](RejectReason reason, std::string detail) {
        RejectRecord r;
        r.reason = reason;
        r.detail = std::move(detail);
        r.raw_text = std::string(raw);
        result.reject = std::move(r);
        return result;
    };

    const std::string_view trimmed = util::trim(raw);
    if (trimmed.empty()) return reject(RejectReason::EmptySchedule, "no content");

    std::vector<detail::LineEntry> entries;
    if (trimmed.front() == '[') {
        nlohmann::json arr = nlohmann::json::parse(trimmed, nullptr, false);
        if (arr.is_discarded() || !arr.is_array())
            return reject(RejectReason::Unparseable, "invalid JSON schedule");
        std::string error;
        auto parsed = detail::entries_from_json(arr, error);
        if (!parsed) return reject(RejectReason::Unparseable, error);
        entries = std::move(*parsed);
        if (entries.empty()) return reject(RejectReason::EmptySchedule, "JSON schedule has no entries");
    } else {
        bool any_shaped = false;
        for (std::string_view line : util::split_lines(raw)) {
            detail::LineScan scan = detail::scan_line(line);
            switch (scan.kind) {
                case detail::LineKind::Prose: break;
                case detail::LineKind::EndMarker: any_shaped = true; break;
                case detail::LineKind::Malformed:
                    return reject(RejectReason::Unparseable, scan.error + ": " + std::string(util::trim(line)));
                case detail::LineKind::Entry:
                    any_shaped = true;
                    entries.push_back(std::move(scan.entry));
                    break;
            }
        }
        if (!any_shaped) return reject(RejectReason::Unparseable, "no schedule lines found");
        if (entries.empty()) return reject(RejectReason::EmptySchedule, "schedule has no task entries");
    }

    Schedule schedule;
    for (const auto& e : entries) {
        auto canonical = catalog.resolve(e.name);
        if (!canonical) return reject(RejectReason::UnknownTask, "unknown task: " + e.name);
        schedule.entries.push_back({*canonical, e.start, e.end - e.start});
    }
    std::stable_sort(schedule.entries.begin(), schedule.entries.end(),
                     [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.start_min < b.start_min; });
    for (std::size_t i = 1; i < schedule.entries.size(); ++i) {
        const auto& prev = schedule.entries[i - 1];
        const auto& cur = schedule.entries[i];
        if (cur.start_min < prev.start_min + prev.duration_min) {
            return reject(RejectReason::Overlap, prev.task + " overlaps " + cur.task + " at " +
                                                     util::format_hhmm(cur.start_min));
        }
    }

    schedule.validate(catalog);  // invariant re-check; throws only on internal bugs
    result.schedule = std::move(schedule);
    return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultSystemMessage =
    "You are a scheduling assistant. Produce a realistic full-day schedule for the described person "
    "using only the provided tasks, in the specified format.";

struct BootstrapPromptConfig {
    std::string system_message = std::string(kDefaultSystemMessage);
    double temperature = 0.7;
    std::string model_id = "gpt-3.5-turbo";
    std::optional<int> max_tokens;
};

// A uniform random permutation of the catalog names; deterministic per seed.
inline std::vector<std::string> randomise_task_order(const TaskCatalog& catalog, std::uint64_t seed) {
    std::vector<std::string> names = catalog.names();
    rng::Engine engine(seed);
    engine.shuffle(names);
    return names;
}

// User message carries the persona sentence (unless Neutral), the agent
// profile, the task list in the given order and the output-format contract.
// Tasks are the only "- " bullet lines in the prompt; the mock planner relies
// on that.
inline llm::ChatRequest build_bootstrap_prompt(const GenerationCondition& condition,
                                               const std::vector<std::string>& task_order,
                                               std::string_view profile_text,
                                               const BootstrapPromptConfig& config = {}) {
    if (task_order.empty()) throw std::invalid_argument("bootstrap prompt: empty task order");
    std::string msg;
    if (!condition.persona.text.empty()) msg += condition.persona.text + "\n\n";
    if (!profile_text.empty()) {
        msg += std::string(profile_text) + "\n\n";
    }
    msg += "Plan a realistic full-day schedule for this person using only the tasks below.\n\n"
           "Available tasks:\n";
    for (const auto& name : task_order) msg += "- " + name + "\n";
    msg += "\nWrite one line per scheduled task, in time order, formatted exactly as:\n"
           "HH:MM - HH:MM | TaskName\n"
           "Use 24-hour zero-padded times. Tasks may repeat or be omitted. Finish the day by 24:00.";

    llm::ChatRequest request;
    if (condition.use_system_message) request.system_message = config.system_message;
    request.user_message = std::move(msg);
    request.temperature = config.temperature;
    request.model_id = config.model_id;
    request.max_tokens = config.max_tokens;
    return request;
}

// ---------------------------------------------------------------------------
// Sample generation
// ---------------------------------------------------------------------------

struct GeneratedSample {
    std::size_t index = 0;
    std::uint64_t sub_seed = 0;
    std::vector<std::string> task_order;
    llm::ChatRequest request;
    std::string raw_text;
    ScheduleParseResult result;
    std::chrono::milliseconds latency{0};
};

struct SampleSet {
    std::vector<Schedule> schedules;
    std::vector<RejectRecord> rejects;

    std::size_t total() const { return schedules.size() + rejects.size(); }
};

struct GenerateOptions {
    std::string profile_text;
    BootstrapPromptConfig prompt;
    int parallelism = 1;
};

using SampleSink = std::function<void(const GeneratedSample&)>;

// Issues n bootstrap prompts (re-randomising the order per sample when the
// condition asks for it), parses every response, and partitions the outcomes.
// Provider errors surviving the gateway's retry policy become Transport
// rejects, so |schedules| + |rejects| == n always holds.
inline SampleSet generate_samples(llm::ChatProvider& provider, const GenerationCondition& condition,
                                  std::size_t n, std::uint64_t seed, const TaskCatalog& catalog,
                                  const GenerateOptions& options = {}, const SampleSink& sink = {}) {
    if (n == 0) throw std::invalid_argument("generate_samples: n must be >= 1");

    std::vector<GeneratedSample> samples(n);
    llm::parallel_for(n, options.parallelism, [&](std::size_t i) {
        GeneratedSample& s = samples[i];
        s.index = i;
        s.sub_seed = rng::derive_seed(seed, condition.label, i);
        s.task_order = condition.randomise_order ? randomise_task_order(catalog, s.sub_seed)
                                                 : catalog.names();
        s.request = build_bootstrap_prompt(condition, s.task_order, options.profile_text, options.prompt);
        try {
            llm::ChatResponse response = provider.complete(s.request);
            s.raw_text = response.text;
            s.latency = response.latency;
            s.result = parse_schedule(s.raw_text, catalog);
        } catch (const llm::GatewayError& e) {
            RejectRecord r;
            r.reason = RejectReason::Transport;
            r.detail = e.what();
            s.result.reject = std::move(r);
        }
        if (s.result.reject) {
            s.result.reject->condition_label = condition.label;
            s.result.reject->sample_index = i;
        }
    });

    SampleSet out;
    for (const GeneratedSample& s : samples) {
        if (sink) sink(s);
        if (s.result.ok()) {
            out.schedules.push_back(*s.result.schedule);
        } else {
            out.rejects.push_back(*s.result.reject);
        }
    }
    return out;
}

}  // namespace sandman::scheduler
