#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sandman/toml.hpp"
#include "sandman/util.hpp"

// Big-Five trait definitions and the persona induction prompt. A persona is a
// single sentence built from a trait title and its descriptor words; the
// Neutral direction renders no text at all and is the control condition.

namespace sandman::persona {

enum class OceanFactor { Openness, Conscientiousness, Extraversion, Agreeableness, Neuroticism };

// Canonical reporting order.
constexpr std::array<OceanFactor, 5> kOceanOrder = {
    OceanFactor::Openness, OceanFactor::Conscientiousness, OceanFactor::Extraversion,
    OceanFactor::Agreeableness, OceanFactor::Neuroticism};

constexpr std::size_t factor_index(OceanFactor f) { return static_cast<std::size_t>(f); }

constexpr char factor_letter(OceanFactor f) {
    switch (f) {
        case OceanFactor::Openness: return 'O';
        case OceanFactor::Conscientiousness: return 'C';
        case OceanFactor::Extraversion: return 'E';
        case OceanFactor::Agreeableness: return 'A';
        case OceanFactor::Neuroticism: return 'N';
    }
    return '?';
}

constexpr std::string_view factor_name(OceanFactor f) {
    switch (f) {
        case OceanFactor::Openness: return "Openness";
        case OceanFactor::Conscientiousness: return "Conscientiousness";
        case OceanFactor::Extraversion: return "Extraversion";
        case OceanFactor::Agreeableness: return "Agreeableness";
        case OceanFactor::Neuroticism: return "Neuroticism";
    }
    return "?";
}

inline std::optional<OceanFactor> factor_from_token(std::string_view token) {
    const std::string t = util::to_lower(util::trim(token));
    for (OceanFactor f : kOceanOrder) {
        if (t == util::to_lower(factor_name(f))) return f;
        if (t.size() == 1 && std::toupper(static_cast<unsigned char>(t[0])) == factor_letter(f)) return f;
    }
    return std::nullopt;
}

enum class TraitDirection { Positive, Negative, Neutral };

inline std::string_view direction_name(TraitDirection d) {
    switch (d) {
        case TraitDirection::Positive: return "Pos";
        case TraitDirection::Negative: return "Neg";
        case TraitDirection::Neutral: return "Neutral";
    }
    return "?";
}

inline std::optional<TraitDirection> direction_from_token(std::string_view token) {
    const std::string t = util::to_lower(util::trim(token));
    if (t == "pos" || t == "positive" || t == "+") return TraitDirection::Positive;
    if (t == "neg" || t == "negative" || t == "-") return TraitDirection::Negative;
    if (t == "neutral" || t == "none" || t == "control") return TraitDirection::Neutral;
    return std::nullopt;
}

// One trait record: the naive title used as the X term and the descriptor
// words used as the Y term, for both poles.
struct TraitSpec {
    OceanFactor factor = OceanFactor::Openness;
    std::string title_pos;
    std::string title_neg;
    std::vector<std::string> words_pos;
    std::vector<std::string> words_neg;
    // a/an override per pole; empty means use the vowel-letter heuristic
    std::string article_pos;
    std::string article_neg;

    void validate() const {
        auto check_words = [](const std::vector<std::string>& ws, const char* which) {
            if (ws.empty()) throw std::invalid_argument(std::string("trait spec: empty word list (") + which + ")");
            std::set<std::string> seen;
            for (const auto& w : ws) {
                if (util::trim(w).empty()) throw std::invalid_argument("trait spec: blank descriptor word");
                if (!seen.insert(util::to_lower(w)).second)
                    throw std::invalid_argument("trait spec: duplicate descriptor word '" + w + "'");
            }
        };
        if (util::trim(title_pos).empty() || util::trim(title_neg).empty())
            throw std::invalid_argument("trait spec: empty title");
        check_words(words_pos, "pos");
        check_words(words_neg, "neg");
    }
};

struct PersonaPrompt {
    std::string text;  // empty for Neutral
    OceanFactor factor = OceanFactor::Openness;
    TraitDirection direction = TraitDirection::Neutral;

    bool is_neutral() const { return direction == TraitDirection::Neutral; }

    static PersonaPrompt neutral() { return {}; }

    // Condition label like "E+", "C-", or "Neutral".
    std::string label() const {
        if (is_neutral()) return "Neutral";
        return std::string(1, factor_letter(factor)) + (direction == TraitDirection::Positive ? "+" : "-");
    }
};

inline bool starts_with_vowel_letter(std::string_view word) {
    if (word.empty()) return false;
    switch (std::tolower(static_cast<unsigned char>(word.front()))) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u': return true;
        default: return false;
    }
}

inline std::string_view article_for(std::string_view title) {
    return starts_with_vowel_letter(title) ? "an" : "a";
}

// "Imagine you are a/an {title} person characterised by being {w1, w2, ...}".
// Neutral yields empty text so the control condition contributes no tokens.
inline PersonaPrompt build_persona_prompt(const TraitSpec& spec, TraitDirection direction) {
    spec.validate();
    PersonaPrompt out;
    out.factor = spec.factor;
    out.direction = direction;
    if (direction == TraitDirection::Neutral) return out;

    const bool pos = direction == TraitDirection::Positive;
    const std::string& title = pos ? spec.title_pos : spec.title_neg;
    const std::string& article_override = pos ? spec.article_pos : spec.article_neg;
    const std::vector<std::string>& words = pos ? spec.words_pos : spec.words_neg;

    std::string article = article_override.empty() ? std::string(article_for(title)) : article_override;
    out.text = "Imagine you are " + article + " " + title + " person characterised by being " +
               util::join(words, ", ");
    return out;
}

// ---------------------------------------------------------------------------
// Trait lexicon
// ---------------------------------------------------------------------------

class TraitLexicon {
public:
    TraitLexicon() = default;
    explicit TraitLexicon(std::array<TraitSpec, 5> specs) : specs_(std::move(specs)) {
        for (const auto& s : specs_) s.validate();
    }

    const TraitSpec& spec(OceanFactor f) const { return specs_[factor_index(f)]; }

    PersonaPrompt prompt(OceanFactor f, TraitDirection d) const {
        return build_persona_prompt(spec(f), d);
    }

    // Parses condition labels like "E+", "c-", "Neutral".
    std::optional<PersonaPrompt> prompt_for_label(std::string_view label) const {
        const std::string t = std::string(util::trim(label));
        if (util::iequals(t, "neutral") || util::iequals(t, "control")) return PersonaPrompt::neutral();
        if (t.size() < 2) return std::nullopt;
        auto factor = factor_from_token(t.substr(0, t.size() - 1));
        auto dir = direction_from_token(t.substr(t.size() - 1));
        if (!factor || !dir || *dir == TraitDirection::Neutral) return std::nullopt;
        return prompt(*factor, *dir);
    }

private:
    std::array<TraitSpec, 5> specs_{};
};

// Built-in lexicon. The Extraversion record carries the canonical exemplar
// wording; the rest are editable via the data file.
inline TraitLexicon default_lexicon() {
    std::array<TraitSpec, 5> specs;
    specs[factor_index(OceanFactor::Openness)] = {
        OceanFactor::Openness,
        "open-minded",
        "closed-minded",
        {"curious", "imaginative", "creative"},
        {"incurious", "unimaginative", "conventional"},
        "", ""};
    specs[factor_index(OceanFactor::Conscientiousness)] = {
        OceanFactor::Conscientiousness,
        "conscientious",
        "careless",
        {"organised", "diligent", "disciplined"},
        {"disorganised", "negligent", "impulsive"},
        "", ""};
    specs[factor_index(OceanFactor::Extraversion)] = {
        OceanFactor::Extraversion,
        "extraverted",
        "introverted",
        {"outgoing", "energetic", "public"},
        {"reserved", "quiet", "solitary"},
        "", ""};
    specs[factor_index(OceanFactor::Agreeableness)] = {
        OceanFactor::Agreeableness,
        "agreeable",
        "disagreeable",
        {"compassionate", "cooperative", "trusting"},
        {"critical", "uncooperative", "suspicious"},
        "", ""};
    specs[factor_index(OceanFactor::Neuroticism)] = {
        OceanFactor::Neuroticism,
        "neurotic",
        "emotionally stable",
        {"anxious", "sensitive", "moody"},
        {"calm", "secure", "confident"},
        "", ""};
    return TraitLexicon(specs);
}

// Lexicon file: one [table] per factor keyed by the factor name (lowercase),
// with title_pos/title_neg strings and words_pos/words_neg arrays; optional
// article_pos/article_neg overrides.
inline TraitLexicon load_lexicon(const std::filesystem::path& path) {
    const toml::Table root = toml::parse_file(path);
    std::array<TraitSpec, 5> specs;
    for (OceanFactor f : kOceanOrder) {
        const std::string key = util::to_lower(factor_name(f));
        auto it = root.tables.find(key);
        if (it == root.tables.end())
            throw std::invalid_argument("lexicon: missing [" + key + "] record in " + path.string());
        const toml::Table& t = it->second;
        TraitSpec spec;
        spec.factor = f;
        spec.title_pos = t.get_string("title_pos");
        spec.title_neg = t.get_string("title_neg");
        spec.words_pos = t.at("words_pos").as_string_array();
        spec.words_neg = t.at("words_neg").as_string_array();
        spec.article_pos = t.get_string("article_pos");
        spec.article_neg = t.get_string("article_neg");
        spec.validate();
        specs[factor_index(f)] = std::move(spec);
    }
    return TraitLexicon(specs);
}

}  // namespace sandman::persona
