#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace netside {

// Minimal INI-style config: "[section name]" headers, "key = value" lines,
// '#' comments. Sections keep file order; duplicate keys keep the last value.
struct ConfigSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;                 // SchemaError if absent
    std::string get_or(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double def) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int_or(const std::string& key, int64_t def) const;
    std::vector<double> get_doubles(const std::string& key) const;        // whitespace separated
    // "size:prob size:prob ..." pairs
    std::vector<std::pair<int64_t, double>> get_dist(const std::string& key) const;
};

struct ConfigFile {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const;
    const ConfigSection& require(const std::string& name) const;  // SchemaError if absent
    std::vector<const ConfigSection*> all(const std::string& prefix) const;
};

ConfigFile parse_config(const std::string& text, const std::string& origin = "<config>");
ConfigFile load_config(const std::string& path);

} // namespace netside
