#pragma once

#include <array>
#include <filesystem>
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
#include "sandman/stats.hpp"
#include "sandman/util.hpp"

// Administers a Big-Five inventory to a chat provider under a persona
// condition and scores the answers on a five-point Likert key.

namespace sandman::psychometrics {

using persona::OceanFactor;
using persona::PersonaPrompt;

enum class Keying { Positive, Negative };

struct MpiItem {
    std::string id;
    std::string statement;
    OceanFactor factor = OceanFactor::Openness;
    Keying keying = Keying::Positive;
};

class MpiItemBank {
public:
    MpiItemBank() = default;
    explicit MpiItemBank(std::vector<MpiItem> items) : items_(std::move(items)) { validate(); }

    const std::vector<MpiItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    void validate() const {
        if (items_.empty()) throw std::invalid_argument("item bank: empty");
        std::set<std::string> ids;
        std::array<std::size_t, 5> per_factor{};
        for (const auto& item : items_) {
            if (util::trim(item.statement).empty())
                throw std::invalid_argument("item bank: blank statement (id " + item.id + ")");
            if (!ids.insert(item.id).second)
                throw std::invalid_argument("item bank: duplicate id " + item.id);
            ++per_factor[persona::factor_index(item.factor)];
        }
        for (OceanFactor f : persona::kOceanOrder) {
            const std::size_t n = per_factor[persona::factor_index(f)];
            if (n == 0)
                throw std::invalid_argument(std::string("item bank: no items for ") +
                                            std::string(persona::factor_name(f)));
            if (n != per_factor[0])
                throw std::invalid_argument("item bank: per-factor item counts differ");
        }
    }

    // One JSON object per line: {"id","statement","factor","keying"}.
    static MpiItemBank from_jsonl(const std::filesystem::path& path) {
        std::vector<MpiItem> items;
        std::istringstream in(util::read_file(path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (util::trim(line).empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw std::invalid_argument("item bank: bad JSON at " + path.string() + ":" +
                                            std::to_string(line_no));
            MpiItem item;
            item.id = j.at("id").get<std::string>();
            item.statement = j.at("statement").get<std::string>();
            auto factor = persona::factor_from_token(j.at("factor").get<std::string>());
            if (!factor)
                throw std::invalid_argument("item bank: unknown factor at line " + std::to_string(line_no));
            item.factor = *factor;
            const std::string keying = util::to_lower(j.at("keying").get<std::string>());
            if (keying == "positive" || keying == "+") {
                item.keying = Keying::Positive;
            } else if (keying == "negative" || keying == "-") {
                item.keying = Keying::Negative;
            } else {
                throw std::invalid_argument("item bank: unknown keying at line " + std::to_string(line_no));
            }
            items.push_back(std::move(item));
        }
        return MpiItemBank(std::move(items));
    }

private:
    std::vector<MpiItem> items_;
};

enum class MpiChoice { A, B, C, D, E };

constexpr std::array<MpiChoice, 5> kAllChoices = {MpiChoice::A, MpiChoice::B, MpiChoice::C, MpiChoice::D,
                                                  MpiChoice::E};

constexpr char choice_letter(MpiChoice c) { return static_cast<char>('A' + static_cast<int>(c)); }

// Likert key: positively keyed A=5 .. E=1, reverse-scored for negative keying.
constexpr int score_choice(Keying keying, MpiChoice choice) {
    const int base = 5 - static_cast<int>(choice);
    return keying == Keying::Positive ? base : 6 - base;
}

constexpr int score_choice(const MpiItem& item, MpiChoice choice) {
    return score_choice(item.keying, choice);
}

// Extracts the first standalone option letter A-E, case-insensitively.
// Letters embedded in words ("cannot") do not count.
inline std::optional<MpiChoice> parse_choice(std::string_view raw) {
    auto is_word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[i])));
        if (c < 'A' || c > 'E') continue;
        const bool left_ok = i == 0 || !is_word_char(raw[i - 1]);
        const bool right_ok = i + 1 >= raw.size() || !is_word_char(raw[i + 1]);
        if (left_ok && right_ok) return static_cast<MpiChoice>(c - 'A');
    }
    return std::nullopt;
}

// One inventory pass: the answers a single run collected, keyed by item id.
// Items whose answers stayed unparseable past the retry budget are absent.
struct MpiAnswerSheet {
    int run_index = 0;
    std::map<std::string, MpiChoice> answers;

    bool complete(const MpiItemBank& bank) const {
        for (const auto& item : bank.items()) {
            if (!answers.count(item.id)) return false;
        }
        return true;
    }

    std::size_t missing(const MpiItemBank& bank) const {
        std::size_t n = 0;
        for (const auto& item : bank.items()) {
            if (!answers.count(item.id)) ++n;
        }
        return n;
    }
};

// Five-option response scale; the endpoints are fixed, the midpoints follow
// the usual accuracy wording.
constexpr std::array<std::string_view, 5> kChoiceLabels = {
    "Very Accurate", "Moderately Accurate", "Neither Accurate Nor Inaccurate", "Moderately Inaccurate",
    "Very Inaccurate"};

// Single-item prompt. The persona sentence, when present, is prepended
// verbatim; a Neutral persona contributes no bytes at all.
inline llm::ChatRequest mpi_item_prompt(const PersonaPrompt& persona, const MpiItem& item,
                                        double temperature = 0.7) {
    std::string msg;
    if (!persona.text.empty()) msg += persona.text + "\n\n";
    msg += "Given the following statement of you, please choose the option that most accurately "
           "describes how well it reflects your own self-perception.\n\nStatement: \"" +
           item.statement + ".\"\n\nOptions:\n";
    for (std::size_t i = 0; i < kChoiceLabels.size(); ++i) {
        msg += "(";
        msg += static_cast<char>('A' + i);
        msg += "). ";
        msg += kChoiceLabels[i];
        msg += "\n";
    }
    msg += "\nAnswer with a single option letter.";
    llm::ChatRequest request;
    request.user_message = std::move(msg);
    request.temperature = temperature;
    return request;
}

// Per-factor score samples plus summaries. Raw samples are retained so the
// report can feed straight into a two-sample test.
struct TraitScoreReport {
    std::array<std::vector<double>, 5> raw;  // indexed by factor_index
    std::array<stats::SampleStats, 5> summary{};
    std::size_t runs = 0;
    std::size_t invalid_items = 0;  // excluded after the retry budget

    const std::vector<double>& samples(OceanFactor f) const { return raw[persona::factor_index(f)]; }
    const stats::SampleStats& factor_summary(OceanFactor f) const {
        return summary[persona::factor_index(f)];
    }

    void finalize() {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!raw[i].empty()) summary[i] = stats::describe(raw[i]);
        }
    }
};

struct AdministerOptions {
    int runs = 5;
    double temperature = 0.7;
    int retry_budget = 2;   // extra attempts per unparseable answer
    int parallelism = 1;    // concurrent item requests within a run
    bool shuffle_items = false;
    std::uint64_t shuffle_seed = 0;
};

// Presents every bank item `runs` times and aggregates scored answers per
// factor. Unparseable answers are retried up to the budget, then excluded and
// counted. Provider transport errors abort the whole administration.
inline TraitScoreReport administer_mpi(llm::ChatProvider& provider, const PersonaPrompt& persona,
                                       const MpiItemBank& bank, const AdministerOptions& options = {}) {
    if (options.runs < 1) throw std::invalid_argument("administer_mpi: runs must be >= 1");
    bank.validate();

    TraitScoreReport report;
    report.runs = static_cast<std::size_t>(options.runs);

    for (int run = 0; run < options.runs; ++run) {
        std::vector<std::size_t> order(bank.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (options.shuffle_items) {
            rng::Engine shuffle_rng(rng::derive_seed(options.shuffle_seed, "mpi-shuffle",
                                                     static_cast<std::uint64_t>(run)));
            shuffle_rng.shuffle(order);
        }

        std::vector<std::optional<MpiChoice>> choices(order.size());
        llm::parallel_for(order.size(), options.parallelism, [&](std::size_t pos) {
            const MpiItem& item = bank.items()[order[pos]];
            const llm::ChatRequest request = mpi_item_prompt(persona, item, options.temperature);
            for (int attempt = 0; attempt <= options.retry_budget; ++attempt) {
                const llm::ChatResponse response = provider.complete(request);
                if (auto choice = parse_choice(response.text)) {
                    choices[pos] = choice;
                    return;
                }
            }
        });

        MpiAnswerSheet sheet;
        sheet.run_index = run;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            if (choices[pos]) sheet.answers.emplace(bank.items()[order[pos]].id, *choices[pos]);
        }
        report.invalid_items += sheet.missing(bank);
        for (const auto& item : bank.items()) {
            auto it = sheet.answers.find(item.id);
            if (it == sheet.answers.end()) continue;  // excluded from aggregation
            report.raw[persona::factor_index(item.factor)].push_back(
                static_cast<double>(score_choice(item, it->second)));
        }
    }

    report.finalize();
    return report;
}

// Welch two-sample t-test per factor, experimental vs control raw scores.
inline std::map<OceanFactor, stats::StatResult> compare_traits(const TraitScoreReport& experimental,
                                                               const TraitScoreReport& control) {
    std::map<OceanFactor, stats::StatResult> out;
    for (OceanFactor f : persona::kOceanOrder) {
        const auto& a = experimental.samples(f);
        const auto& b = control.samples(f);
        if (a.size() < 2 || b.size() < 2)
            throw stats::InsufficientData(std::string("compare_traits: factor ") +
                                          std::string(persona::factor_name(f)) + " has fewer than 2 samples");
        out[f] = stats::welch_t_test(a, b);
    }
    return out;
}

}  // namespace sandman::psychometrics
