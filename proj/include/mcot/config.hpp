#pragma once

// Minimal TOML-like configuration:
//
//   # comment
//   [section]
//   key = "string with \"escapes\"\n"
//   number = 12
//   flag = true
//
// Keys before the first [section] belong to section "". Relative paths are
// resolved against the directory of the file they were read from.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcot {

class Config {
public:
    static Config parse(std::string_view text, const std::string& source = "<config>",
                        std::filesystem::path base_dir = {});
    /// Throws ConfigError when the file is missing or malformed.
    static Config load(const std::filesystem::path& path);

    bool has_section(const std::string& section) const { return values_.count(section) != 0; }
    std::optional<std::string> get(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::optional<std::filesystem::path> get_path(const std::string& section, const std::string& key) const;

    /// Throws ConfigError naming the first key of `section` not in `known`.
    void require_known(const std::string& section, std::initializer_list<std::string_view> known) const;

    std::vector<std::string> sections() const;
    const std::string& source() const { return source_; }

private:
    struct Value {
        std::string text;
        std::size_t line = 0;
    };
    std::string where(const std::string& section, const std::string& key) const;

    std::map<std::string, std::map<std::string, Value>> values_;
    std::string source_;
    std::filesystem::path base_dir_;
};

}  // namespace mcot
