#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace adret::config {

/// Flat key-value configuration ("key = value" lines, '#' comments).
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    static Config parse(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback = {}) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace adret::config
