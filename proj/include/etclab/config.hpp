#pragma once

// Experiment configuration file: a sectioned key = value document.
//
//   [plant]
//   type = lure
//   h_star = 0.3
//
// Keys are tracked as they are consumed; anything left over at the end is an
// error, so a typo like "rho_1" instead of "rho1" cannot silently fall back
// to a default.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "etclab/numeric.hpp"

namespace etclab {

class ConfigFile {
  public:
    ConfigFile() = default;

    static ConfigFile parse(const std::string& text) {
        ConfigFile cf;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                ": empty section name");
                cf.entries_[section];  // create even if empty
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
            auto& sec = cf.entries_[section];
            if (sec.count(key))
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": duplicate key '" + key + "'");
            sec[key] = value;
        }
        return cf;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = entries_.find(section);
        return s != entries_.end() && s->second.count(key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        if (!has(section, key)) return fallback;
        consumed_.insert_or_assign(section + "." + key, true);
        return entries_.at(section).at(key);
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) return fallback;
        consumed_.insert_or_assign(section + "." + key, true);
        const std::string& v = entries_.at(section).at(key);
        std::size_t pos = 0;
        double out;
        try {
            out = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("config [" + section + "] " + key + ": not a number: " + v);
        }
        if (pos != v.size())
            throw std::invalid_argument("config [" + section + "] " + key + ": not a number: " + v);
        return out;
    }

    long get_int(const std::string& section, const std::string& key, long fallback) const {
        const double v = get_double(section, key, static_cast<double>(fallback));
        const long l = static_cast<long>(v);
        if (static_cast<double>(l) != v)
            throw std::invalid_argument("config [" + section + "] " + key + ": not an integer");
        return l;
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        consumed_.insert_or_assign(section + "." + key, true);
        const std::string v = entries_.at(section).at(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw std::invalid_argument("config [" + section + "] " + key + ": not a boolean: " + v);
    }

    /// Keys that were present but never consumed by the schema.
    std::vector<std::string> unknown_keys() const {
        std::vector<std::string> out;
        for (const auto& [section, kv] : entries_)
            for (const auto& [key, value] : kv)
                if (!consumed_.count(section + "." + key)) out.push_back(section + "." + key);
        return out;
    }

    void reject_unknown_keys() const {
        const auto unknown = unknown_keys();
        if (unknown.empty()) return;
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw std::invalid_argument(msg);
    }

    /// Canonical serialization (sections and keys sorted) used for hashing.
    std::string canonical() const {
        std::string out;
        for (const auto& [section, kv] : entries_) {
            out += "[" + section + "]\n";
            for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
        }
        return out;
    }

    std::uint64_t hash() const { return fnv1a64(canonical()); }

    /// Applies a command-line override of the form section.key=value.
    void override_value(const std::string& section, const std::string& key,
                        const std::string& value) {
        entries_[section][key] = value;
    }

  private:
    static std::string trim(std::string s) {
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
        s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
        return s;
    }

    std::map<std::string, std::map<std::string, std::string>> entries_;
    mutable std::map<std::string, bool> consumed_;
};

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace etclab
