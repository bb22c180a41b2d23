#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sandman/experiment.hpp"
#include "sandman/persona.hpp"
#include "sandman/psychometrics.hpp"
#include "sandman/stats.hpp"
#include "sandman/util.hpp"

// Table renderers. Markdown mirrors the compact report layouts (means with
// the std dev parenthesised, significant cells bold-marked); CSV carries full
// precision plus p-values. All rounding happens here, never upstream.

namespace sandman::experiment {

namespace render_detail {

// per-table display precision
constexpr int kDurationDecimals = 1;
constexpr int kFrequencyDecimals = 2;
constexpr int kPositionDecimals = 2;
constexpr int kMpiDecimals = 2;

inline std::string mu_sigma(const stats::SampleStats& s, int decimals) {
    if (s.n == 0) return "n=0";
    return util::format_fixed(s.mean, decimals) + " (" + util::format_fixed(s.std_dev, decimals) + ")";
}

inline std::string mark(std::string cell, bool significant) {
    return significant ? "**" + cell + "**" : cell;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string full(double v) { return util::format_fixed(v, 12); }

}  // namespace render_detail

// ---------------------------------------------------------------------------
// Markdown
// ---------------------------------------------------------------------------

inline std::string render_duration_markdown(const ReportTables& t) {
    using namespace render_detail;
    std::string out = "## Task durations (minutes)\n\n| Task |";
    for (const auto& c : t.conditions) out += " " + c.label + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < t.conditions.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t task = 0; task < t.task_names.size(); ++task) {
        out += "| " + t.task_names[task] + " |";
        for (const auto& c : t.conditions) {
            const DurationCell& cell = c.duration[task];
            const bool sig = cell.test && cell.test->significant;
            out += " " + mark(mu_sigma(cell.stats, kDurationDecimals), sig) + " |";
        }
        out += "\n";
    }
    out += "| Reject |";
    for (const auto& c : t.conditions) out += " " + std::to_string(c.rejected) + " |";
    out += "\n";
    return out;
}

inline std::string render_frequency_markdown(const ReportTables& t) {
    using namespace render_detail;
    std::string out = "## Task frequency per schedule\n\n| Task |";
    for (const auto& c : t.conditions) out += " " + c.label + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < t.conditions.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t task = 0; task < t.task_names.size(); ++task) {
        out += "| " + t.task_names[task] + " |";
        for (const auto& c : t.conditions) {
            const FrequencyCell& cell = c.frequency[task];
            const bool sig = cell.test && cell.test->significant;
            out += " " + mark(mu_sigma(cell.stats, kFrequencyDecimals), sig) + " |";
        }
        out += "\n";
    }
    return out;
}

inline std::string render_position_markdown(const ReportTables& t) {
    using namespace render_detail;
    std::vector<const ConditionTables*> randomised;
    for (const auto& c : t.conditions) {
        if (c.randomised) randomised.push_back(&c);
    }
    if (randomised.empty()) return "";
    std::string out = "## Schedule positions\n\n| Task |";
    for (const auto* c : randomised) out += " " + c->label + " μ (σ) | " + c->label + " ρ |";
    out += "\n|---|";
    for (std::size_t i = 0; i < randomised.size(); ++i) out += "---|---|";
    out += "\n";
    for (std::size_t task = 0; task < t.task_names.size(); ++task) {
        out += "| " + t.task_names[task] + " |";
        for (const auto* c : randomised) {
            const PositionCell& cell = c->position[task];
            out += " " + mu_sigma(cell.stats, kPositionDecimals) + " | ";
            out += cell.corr ? util::format_fixed(cell.corr->rho, kPositionDecimals) : std::string("-");
            out += " |";
        }
        out += "\n";
    }
    return out;
}

inline std::string render_expected_markdown(const ReportTables& t) {
    std::size_t max_slots = 0;
    for (const auto& c : t.conditions) max_slots = std::max(max_slots, c.expected.size());
    if (max_slots == 0) return "";
    auto abbrev = [&](const std::string& name) {
        auto it = t.abbreviations.find(name);
        return it == t.abbreviations.end() ? name : it->second;
    };
    std::string out = "## Expected schedules (per-slot modal task)\n\n| n |";
    for (const auto& c : t.conditions) out += " " + c.label + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < t.conditions.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t slot = 0; slot < max_slots; ++slot) {
        out += "| " + std::to_string(slot + 1) + " |";
        for (const auto& c : t.conditions) {
            if (slot < c.expected.size()) {
                out += " " + abbrev(c.expected[slot].task) + (c.expected[slot].tie ? "†" : "") + " |";
            } else {
                out += "  |";
            }
        }
        out += "\n";
    }
    out += "\n† tie, broken by catalog order.\n";
    return out;
}

inline std::string render_report_markdown(const ReportTables& t) {
    std::string out = "# Schedule experiment report\n\nControl condition: " + t.control_label +
                      ". Significant deviations from control (p ≤ 0.05) are shown in bold.\n\n";
    out += render_duration_markdown(t) + "\n";
    out += render_frequency_markdown(t) + "\n";
    const std::string pos = render_position_markdown(t);
    if (!pos.empty()) out += pos + "\n";
    out += render_expected_markdown(t);
    return out;
}

// ---------------------------------------------------------------------------
// CSV (full precision, one table column marks the section)
// ---------------------------------------------------------------------------

inline std::string render_report_csv(const ReportTables& t) {
    using namespace render_detail;
    std::string out =
        "table,condition,task,slot,mean,std_dev,n,statistic,dof,p,significant,rho,rho_p,tie\n";
    auto stats_cols = [&](const stats::SampleStats& s) {
        return full(s.mean) + "," + full(s.std_dev) + "," + std::to_string(s.n);
    };
    auto test_cols = [&](const std::optional<stats::StatResult>& test) {
        if (!test) return std::string(",,,");
        return full(test->statistic) + "," + full(test->dof) + "," + full(test->p_value) + "," +
               (test->significant ? "true" : "false");
    };
    for (const auto& c : t.conditions) {
        for (std::size_t task = 0; task < t.task_names.size(); ++task) {
            out += "duration," + csv_escape(c.label) + "," + csv_escape(t.task_names[task]) + ",," +
                   stats_cols(c.duration[task].stats) + "," + test_cols(c.duration[task].test) + ",,,\n";
        }
        for (std::size_t task = 0; task < t.task_names.size(); ++task) {
            out += "frequency," + csv_escape(c.label) + "," + csv_escape(t.task_names[task]) + ",," +
                   stats_cols(c.frequency[task].stats) + "," + test_cols(c.frequency[task].test) + ",,,\n";
        }
        if (c.randomised) {
            for (std::size_t task = 0; task < t.task_names.size(); ++task) {
                const PositionCell& cell = c.position[task];
                out += "position," + csv_escape(c.label) + "," + csv_escape(t.task_names[task]) + ",," +
                       stats_cols(cell.stats) + ",,,,,";
                out += cell.corr ? full(cell.corr->rho) + "," + full(cell.corr->p_value) : std::string(",");
                out += ",\n";
            }
        }
        for (const auto& slot : c.expected) {
            out += "expected," + csv_escape(c.label) + "," + csv_escape(slot.task) + "," +
                   std::to_string(slot.slot) + ",,," + std::to_string(slot.frequency) + ",,,,,,," +
                   (slot.tie ? "true" : "false") + "\n";
        }
        out += "rejects," + csv_escape(c.label) + ",,," + std::to_string(c.accepted) + ",," +
               std::to_string(c.rejected) + ",,,,,,,\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// MPI (Big-Five inventory) table
// ---------------------------------------------------------------------------

struct MpiRow {
    std::string label;      // condition label, e.g. "E+" or "Neutral"
    std::string direction;  // "Pos", "Neg" or "N/A"
    std::optional<persona::OceanFactor> target;
    std::array<double, 5> means{};     // OCEAN order
    std::array<double, 5> std_devs{};
    std::array<std::size_t, 5> counts{};
    std::array<bool, 5> significant{};  // vs control
    std::array<double, 5> p_values{1.0, 1.0, 1.0, 1.0, 1.0};
};

struct MpiTable {
    std::vector<MpiRow> rows;  // induced conditions; control appended last at render
    MpiRow control;
};

inline MpiRow make_mpi_row(const std::string& label, const persona::PersonaPrompt& persona_prompt,
                           const psychometrics::TraitScoreReport& report,
                           const std::map<persona::OceanFactor, stats::StatResult>* comparison) {
    MpiRow row;
    row.label = label;
    row.direction = persona_prompt.is_neutral() ? "N/A" : std::string(direction_name(persona_prompt.direction));
    if (!persona_prompt.is_neutral()) row.target = persona_prompt.factor;
    for (persona::OceanFactor f : persona::kOceanOrder) {
        const std::size_t i = persona::factor_index(f);
        const auto& s = report.factor_summary(f);
        row.means[i] = s.mean;
        row.std_devs[i] = s.std_dev;
        row.counts[i] = s.n;
        if (comparison) {
            const auto it = comparison->find(f);
            if (it != comparison->end()) {
                row.significant[i] = it->second.significant;
                row.p_values[i] = it->second.p_value;
            }
        }
    }
    return row;
}

// Rows = induced factor x direction, columns = OCEAN, control row last.
// Significant cells are bold-marked; the induced trait's own cell carries a
// trailing asterisk when it deviates from control.
inline std::string render_mpi_markdown(const MpiTable& table) {
    using namespace render_detail;
    std::string out = "## Single-factor personality analysis\n\n| Condition | Dir | O | C | E | A | N |\n"
                      "|---|---|---|---|---|---|---|\n";
    auto row_line = [&](const MpiRow& row) {
        std::string line = "| " + row.label + " | " + row.direction + " |";
        for (persona::OceanFactor f : persona::kOceanOrder) {
            const std::size_t i = persona::factor_index(f);
            std::string cell = util::format_fixed(row.means[i], kMpiDecimals);
            const bool is_target = row.target && *row.target == f;
            if (is_target && row.significant[i]) cell += "*";
            line += " " + mark(cell, row.significant[i]) + " |";
        }
        return line + "\n";
    };
    for (const auto& row : table.rows) out += row_line(row);
    out += row_line(table.control);
    return out;
}

inline std::string render_mpi_csv(const MpiTable& table) {
    using namespace render_detail;
    std::string out = "condition,direction,factor,mean,std_dev,n,p,significant,target\n";
    auto emit = [&](const MpiRow& row) {
        for (persona::OceanFactor f : persona::kOceanOrder) {
            const std::size_t i = persona::factor_index(f);
            out += csv_escape(row.label) + "," + row.direction + "," +
                   std::string(1, persona::factor_letter(f)) + "," + full(row.means[i]) + "," +
                   full(row.std_devs[i]) + "," + std::to_string(row.counts[i]) + "," +
                   full(row.p_values[i]) + "," + (row.significant[i] ? "true" : "false") + "," +
                   (row.target && *row.target == f ? "true" : "false") + "\n";
        }
    };
    for (const auto& row : table.rows) emit(row);
    emit(table.control);
    return out;
}

// Writes report.md / report.csv next to the analysis.
struct RenderedReport {
    std::filesystem::path markdown;
    std::filesystem::path csv;
};

inline RenderedReport render_report(const ReportTables& tables, const std::filesystem::path& out_dir,
                                    std::string_view format = "both") {
    RenderedReport files;
    std::filesystem::create_directories(out_dir);
    if (format == "md" || format == "both") {
        files.markdown = out_dir / "report.md";
        util::write_file(files.markdown, render_report_markdown(tables));
    }
    if (format == "csv" || format == "both") {
        files.csv = out_dir / "report.csv";
        util::write_file(files.csv, render_report_csv(tables));
    }
    return files;
}

}  // namespace sandman::experiment
