#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sandman/util.hpp"

// Minimal TOML reader covering what the project's config files use:
// comments, bare keys, basic "strings", integers, floats, booleans,
// single- or multi-line arrays of scalars, [tables] and [[arrays of tables]]
// (one level deep). Anything fancier is rejected with a line number.

namespace sandman::toml {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t line)
        : std::runtime_error("toml: " + msg + " (line " + std::to_string(line) + ")"), line_no(line) {}
    std::size_t line_no;
};

class Value;
using Array = std::vector<Value>;

class Value {
public:
    Value() : v_(std::int64_t{0}) {}
    explicit Value(std::string s) : v_(std::move(s)) {}
    explicit Value(std::int64_t i) : v_(i) {}
    explicit Value(double d) : v_(d) {}
    explicit Value(bool b) : v_(b) {}
    explicit Value(Array a) : v_(std::move(a)) {}

    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_array() const { return std::holds_alternative<Array>(v_); }

    const std::string& as_string() const { return get<std::string>("string"); }
    std::int64_t as_integer() const { return get<std::int64_t>("integer"); }
    double as_float() const {
        if (is_integer()) return static_cast<double>(as_integer());
        return get<double>("float");
    }
    bool as_bool() const { return get<bool>("boolean"); }
    const Array& as_array() const { return get<Array>("array"); }

    std::vector<std::string> as_string_array() const {
        std::vector<std::string> out;
        for (const auto& e : as_array()) out.push_back(e.as_string());
        return out;
    }

private:
    template <typename T>
    const T& get(const char* what) const {
        if (!std::holds_alternative<T>(v_)) throw std::runtime_error(std::string("toml: value is not a ") + what);
        return std::get<T>(v_);
    }

    std::variant<std::string, std::int64_t, double, bool, Array> v_;
};

struct Table {
    std::map<std::string, Value> values;
    std::map<std::string, Table> tables;
    std::map<std::string, std::vector<Table>> table_arrays;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    const Value& at(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw std::runtime_error("toml: missing key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, std::string fallback = "") const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.as_string();
    }
    std::int64_t get_integer(const std::string& key, std::int64_t fallback = 0) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.as_integer();
    }
    double get_float(const std::string& key, double fallback = 0.0) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.as_float();
    }
    bool get_bool(const std::string& key, bool fallback = false) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.as_bool();
    }
};

namespace detail {

inline std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline int bracket_depth_delta(std::string_view s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (in_string) continue;
        if (c == '[') ++depth;
        if (c == ']') --depth;
    }
    return depth;
}

class Cursor {
public:
    Cursor(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
    }
    bool eof() {
        skip_ws();
        return pos_ >= s_.size();
    }
    char peek() { return s_[pos_]; }
    char take() { return s_[pos_++]; }
    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string parse_basic_string() {
        if (!accept('"')) throw ParseError("expected string", line_);
        std::string out;
        while (pos_ < s_.size()) {
            char c = take();
            if (c == '"') return out;
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                char e = take();
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: throw ParseError(std::string("unsupported escape \\") + e, line_);
                }
            } else {
                out += c;
            }
        }
        throw ParseError("unterminated string", line_);
    }

    Value parse_scalar() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("expected value", line_);
        char c = peek();
        if (c == '"') return Value(parse_basic_string());
        if (c == '[') return parse_array();
        // bare token: bool or number
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t' &&
               s_[pos_] != '\n' && s_[pos_] != '\r') {
            ++pos_;
        }
        std::string_view tok = util::trim(s_.substr(start, pos_ - start));
        if (tok == "true") return Value(true);
        if (tok == "false") return Value(false);
        std::string t(tok);
        try {
            if (t.find_first_of(".eE") == std::string::npos) {
                std::size_t used = 0;
                std::int64_t i = std::stoll(t, &used);
                if (used == t.size()) return Value(i);
            }
            std::size_t used = 0;
            double d = std::stod(t, &used);
            if (used == t.size()) return Value(d);
        } catch (const std::exception&) {
        }
        throw ParseError("cannot parse value '" + t + "'", line_);
    }

    Value parse_array() {
        if (!accept('[')) throw ParseError("expected array", line_);
        Array arr;
        if (accept(']')) return Value(std::move(arr));
        while (true) {
            arr.push_back(parse_scalar());
            if (accept(']')) break;
            if (!accept(',')) throw ParseError("expected ',' or ']' in array", line_);
            if (accept(']')) break;  // trailing comma
        }
        return Value(std::move(arr));
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

}  // namespace detail

inline Table parse(std::string_view text) {
    Table root;
    Table* current = &root;

    auto lines = util::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size()) {
        std::size_t line_no = i + 1;
        std::string_view line = util::trim(detail::strip_comment(lines[i]));
        ++i;
        if (line.empty()) continue;

        if (line.front() == '[') {
            bool is_array = line.size() > 1 && line[1] == '[';
            std::string_view inner = line;
            inner.remove_prefix(is_array ? 2 : 1);
            std::size_t close = inner.find(']');
            if (close == std::string_view::npos) throw ParseError("unterminated table header", line_no);
            std::string name(util::trim(inner.substr(0, close)));
            if (name.empty()) throw ParseError("empty table name", line_no);
            if (is_array) {
                root.table_arrays[name].emplace_back();
                current = &root.table_arrays[name].back();
            } else {
                current = &root.tables[name];
            }
            continue;
        }

        std::size_t eq = std::string_view::npos;
        {
            bool in_string = false;
            for (std::size_t k = 0; k < line.size(); ++k) {
                if (line[k] == '"') in_string = !in_string;
                if (line[k] == '=' && !in_string) {
                    eq = k;
                    break;
                }
            }
        }
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
        std::string key(util::trim(line.substr(0, eq)));
        if (key.empty()) throw ParseError("empty key", line_no);

        std::string value_text(util::trim(line.substr(eq + 1)));
        // multi-line array: keep consuming until brackets balance
        int depth = detail::bracket_depth_delta(value_text);
        while (depth > 0 && i < lines.size()) {
            std::string_view next = detail::strip_comment(lines[i]);
            ++i;
            value_text += ' ';
            value_text += std::string(next);
            depth += detail::bracket_depth_delta(next);
        }
        if (depth > 0) throw ParseError("unterminated array", line_no);

        detail::Cursor cur(value_text, line_no);
        Value v = cur.parse_scalar();
        if (!cur.eof()) throw ParseError("trailing characters after value", line_no);
        current->values[key] = std::move(v);
    }
    return root;
}

inline Table parse_file(const std::filesystem::path& path) {
    return parse(util::read_file(path));
}

}  // namespace sandman::toml
