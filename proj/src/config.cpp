#include "netside/config.hpp"

#include <fstream>
#include <sstream>

#include "netside/errors.hpp"

namespace netside {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& s, const std::string& key) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("config key '" + key + "': bad number '" + s + "'");
    }
}

int64_t to_int(const std::string& s, const std::string& key) {
    try {
        size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("config key '" + key + "': bad integer '" + s + "'");
    }
}

} // namespace

bool ConfigSection::has(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return true;
    return false;
}

const std::string& ConfigSection::get(const std::string& key) const {
    const std::string* found = nullptr;
    for (const auto& [k, v] : entries)
        if (k == key) found = &v;
    if (!found)
        throw SchemaError("config section [" + name + "] is missing key '" + key + "'");
    return *found;
}

std::string ConfigSection::get_or(const std::string& key, const std::string& def) const {
    return has(key) ? get(key) : def;
}

double ConfigSection::get_double(const std::string& key) const {
    return to_double(get(key), key);
}

double ConfigSection::get_double_or(const std::string& key, double def) const {
    return has(key) ? get_double(key) : def;
}

int64_t ConfigSection::get_int(const std::string& key) const {
    return to_int(get(key), key);
}

int64_t ConfigSection::get_int_or(const std::string& key, int64_t def) const {
    return has(key) ? get_int(key) : def;
}

std::vector<double> ConfigSection::get_doubles(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(tok, key));
    return out;
}

std::vector<std::pair<int64_t, double>> ConfigSection::get_dist(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<std::pair<int64_t, double>> out;
    std::string tok;
    while (in >> tok) {
        size_t colon = tok.find(':');
        if (colon == std::string::npos)
            throw SchemaError("config key '" + key + "': expected size:prob, got '" + tok + "'");
        out.emplace_back(to_int(tok.substr(0, colon), key),
                         to_double(tok.substr(colon + 1), key));
    }
    if (out.empty()) throw SchemaError("config key '" + key + "': empty distribution");
    return out;
}

const ConfigSection* ConfigFile::find(const std::string& name) const {
    for (const ConfigSection& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

const ConfigSection& ConfigFile::require(const std::string& name) const {
    const ConfigSection* s = find(name);
    if (!s) throw SchemaError("config is missing required section [" + name + "]");
    return *s;
}

std::vector<const ConfigSection*> ConfigFile::all(const std::string& prefix) const {
    std::vector<const ConfigSection*> out;
    for (const ConfigSection& s : sections)
        if (s.name.rfind(prefix, 0) == 0) out.push_back(&s);
    return out;
}

ConfigFile parse_config(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw SchemaError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            cfg.sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw SchemaError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        if (cfg.sections.empty())
            throw SchemaError(origin + ":" + std::to_string(lineno) + ": key before any section");
        cfg.sections.back().entries.emplace_back(trim(line.substr(0, eq)),
                                                 trim(line.substr(eq + 1)));
    }
    return cfg;
}

ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

} // namespace netside
