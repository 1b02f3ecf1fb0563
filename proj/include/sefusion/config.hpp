#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "sefusion/errors.hpp"

namespace sefusion {

/// Line-oriented `key = value` configuration with dotted keys
/// (e.g. `train.batch_size = 16`). `#` starts a comment.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file " + path);
        KvConfig cfg;
        std::string line;
        int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            const size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
            cfg.kv_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    int64_t get_int(const std::string& key, int64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            size_t used = 0;
            const int64_t v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
        }
    }

    double get_real(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not a number: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config key '" + key + "' is not a boolean: " + it->second);
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    static std::string trim(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace sefusion
