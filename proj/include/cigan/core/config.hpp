#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cigan/core/errors.hpp"

namespace cigan {

// Minimal TOML-style experiment config: [section] headers, key = value pairs,
// '#' comments. Values: integers, floats, booleans, quoted strings, and flat
// arrays of numbers or strings. Schema errors always name the full field path
// (section.key).

class ConfigValue {
public:
    using Storage = std::variant<std::int64_t, double, bool, std::string,
                                 std::vector<double>, std::vector<std::string>>;

    ConfigValue() = default;
    explicit ConfigValue(Storage v, bool numeric_array_is_integral = false)
        : v_(std::move(v)), int_array_(numeric_array_is_integral) {}

    bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_number_array() const { return std::holds_alternative<std::vector<double>>(v_); }
    bool is_int_array() const { return is_number_array() && int_array_; }
    bool is_string_array() const { return std::holds_alternative<std::vector<std::string>>(v_); }

    const Storage& storage() const { return v_; }

private:
    Storage v_;
    bool int_array_ = false;
};

class ConfigFile {
public:
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>") {
        ConfigFile cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(line_no) +
                                      ": malformed section header");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
            const std::string key = trim(s.substr(0, eq));
            const std::string val = trim(s.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            const std::string path = section.empty() ? key : section + "." + key;
            if (cfg.values_.count(path))
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key " + path);
            cfg.values_.emplace(path, parse_value(val, path, origin, line_no));
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    bool has(const std::string& path) const { return values_.count(path) != 0; }

    std::int64_t get_int(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_int()) throw ConfigError(field(path) + ": expected integer");
        return std::get<std::int64_t>(v.storage());
    }
    std::int64_t get_int_or(const std::string& path, std::int64_t def) const {
        return has(path) ? get_int(path) : def;
    }

    double get_double(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (v.is_int()) return static_cast<double>(std::get<std::int64_t>(v.storage()));
        if (!v.is_float()) throw ConfigError(field(path) + ": expected number");
        return std::get<double>(v.storage());
    }
    double get_double_or(const std::string& path, double def) const {
        return has(path) ? get_double(path) : def;
    }

    bool get_bool(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_bool()) throw ConfigError(field(path) + ": expected true or false");
        return std::get<bool>(v.storage());
    }
    bool get_bool_or(const std::string& path, bool def) const {
        return has(path) ? get_bool(path) : def;
    }

    std::string get_string(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_string()) throw ConfigError(field(path) + ": expected string");
        return std::get<std::string>(v.storage());
    }
    std::string get_string_or(const std::string& path, const std::string& def) const {
        return has(path) ? get_string(path) : def;
    }

    std::vector<std::int64_t> get_int_array(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_int_array()) throw ConfigError(field(path) + ": expected array of integers");
        std::vector<std::int64_t> out;
        for (double d : std::get<std::vector<double>>(v.storage()))
            out.push_back(static_cast<std::int64_t>(d));
        return out;
    }

    std::vector<double> get_double_array(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_number_array()) throw ConfigError(field(path) + ": expected array of numbers");
        return std::get<std::vector<double>>(v.storage());
    }

    std::vector<std::string> get_string_array(const std::string& path) const {
        const ConfigValue& v = require(path);
        if (!v.is_string_array()) throw ConfigError(field(path) + ": expected array of strings");
        return std::get<std::vector<std::string>>(v.storage());
    }

    // Keys present under `section` that are not in `known`; used by stage
    // readers to flag typos without claiming other stages' sections.
    std::vector<std::string> unknown_keys(const std::string& section,
                                          const std::vector<std::string>& known) const {
        std::vector<std::string> out;
        const std::string prefix = section + ".";
        for (const auto& [path, value] : values_) {
            (void)value;
            if (path.rfind(prefix, 0) != 0) continue;
            const std::string key = path.substr(prefix.size());
            bool found = false;
            for (const auto& k : known)
                if (k == key) { found = true; break; }
            if (!found) out.push_back(path);
        }
        return out;
    }

    void reject_unknown_keys(const std::string& section,
                             const std::vector<std::string>& known) const {
        const auto unknown = unknown_keys(section, known);
        if (!unknown.empty())
            throw ConfigError(field(unknown.front()) + ": unknown key");
    }

    const std::string& origin() const { return origin_; }

private:
    std::string field(const std::string& path) const { return origin_ + ": " + path; }

    const ConfigValue& require(const std::string& path) const {
        const auto it = values_.find(path);
        if (it == values_.end()) throw ConfigError(field(path) + ": missing required key");
        return it->second;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::string strip_comment(const std::string& line) {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_string = !in_string;
            if (line[i] == '#' && !in_string) return line.substr(0, i);
        }
        return line;
    }

    static ConfigValue parse_scalar(const std::string& s, const std::string& path,
                                    const std::string& origin, int line_no, bool* is_int) {
        if (is_int) *is_int = false;
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
            return ConfigValue(ConfigValue::Storage(s.substr(1, s.size() - 2)));
        if (s == "true") return ConfigValue(ConfigValue::Storage(true));
        if (s == "false") return ConfigValue(ConfigValue::Storage(false));
        try {
            std::size_t pos = 0;
            if (s.find_first_of(".eE") == std::string::npos ||
                (s.size() > 2 && s.rfind("0x", 0) == 0)) {
                const std::int64_t i = std::stoll(s, &pos, 0);
                if (pos == s.size()) {
                    if (is_int) *is_int = true;
                    return ConfigValue(ConfigValue::Storage(i));
                }
            }
            pos = 0;
            const double d = std::stod(s, &pos);
            if (pos == s.size()) return ConfigValue(ConfigValue::Storage(d));
        } catch (const std::exception&) {
        }
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + path +
                          ": cannot parse value '" + s + "'");
    }

    static ConfigValue parse_value(const std::string& s, const std::string& path,
                                   const std::string& origin, int line_no) {
        if (!s.empty() && s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + path +
                                  ": unterminated array");
            const std::string inner = trim(s.substr(1, s.size() - 2));
            std::vector<std::string> items;
            std::string cur;
            bool in_string = false;
            for (char c : inner) {
                if (c == '"') in_string = !in_string;
                if (c == ',' && !in_string) {
                    items.push_back(trim(cur));
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            if (!trim(cur).empty()) items.push_back(trim(cur));
            if (items.empty())
                return ConfigValue(ConfigValue::Storage(std::vector<double>{}), true);
            if (items.front().front() == '"') {
                std::vector<std::string> out;
                for (const auto& item : items) {
                    ConfigValue v = parse_scalar(item, path, origin, line_no, nullptr);
                    if (!v.is_string())
                        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + path +
                                          ": mixed array element types");
                    out.push_back(std::get<std::string>(v.storage()));
                }
                return ConfigValue(ConfigValue::Storage(std::move(out)));
            }
            std::vector<double> out;
            bool all_int = true;
            for (const auto& item : items) {
                bool is_int = false;
                ConfigValue v = parse_scalar(item, path, origin, line_no, &is_int);
                if (v.is_int()) {
                    out.push_back(static_cast<double>(std::get<std::int64_t>(v.storage())));
                } else if (v.is_float()) {
                    out.push_back(std::get<double>(v.storage()));
                } else {
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + path +
                                      ": mixed array element types");
                }
                all_int = all_int && is_int;
            }
            return ConfigValue(ConfigValue::Storage(std::move(out)), all_int);
        }
        bool is_int = false;
        return parse_scalar(s, path, origin, line_no, &is_int);
    }

    std::map<std::string, ConfigValue> values_;
    std::string origin_;
};

} // namespace cigan
