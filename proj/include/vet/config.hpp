#ifndef VET_CONFIG_HPP
#define VET_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

namespace vet {

// Flat TOML-style configuration: [section] headers, key = value lines,
// comments with '#'. Values may be quoted strings, booleans, integers or
// floats. Keys are addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");
    static ConfigFile parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

private:
    std::map<std::string, std::string> values_;  // raw value text, unquoted for strings
    std::map<std::string, bool> quoted_;
    std::string origin_;
};

}  // namespace vet

#endif
