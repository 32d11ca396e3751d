#include "vet/config.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "vet/common.hpp"

namespace vet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// strip a trailing comment, respecting double-quoted strings
std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

[[noreturn]] void fail(const std::string& origin, std::size_t lineno, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        if (value.empty()) fail(origin, lineno, "empty value");
        bool quoted = false;
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') fail(origin, lineno, "unterminated string");
            value = value.substr(1, value.size() - 2);
            quoted = true;
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full)) fail(origin, lineno, "duplicate key '" + full + "'");
        cfg.values_[full] = value;
        cfg.quoted_[full] = quoted;
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    return parse_string(read_file(path), path);
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    char* end = nullptr;
    const long long parsed = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer: " + v);
    return parsed;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    char* end = nullptr;
    const double parsed = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: " + v);
    return parsed;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: " + it->second);
}

}  // namespace vet
