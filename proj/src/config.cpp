#include "mcot/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mcot/chain.hpp"
#include "mcot/errors.hpp"

namespace mcot {

namespace {

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

// Parses a quoted string starting at text[0] == '"'. Returns the decoded value
// and the number of bytes consumed.
std::pair<std::string, std::size_t> parse_quoted(std::string_view text, const std::string& where) {
    std::string out;
    std::size_t i = 1;
    while (i < text.size() && text[i] != '"') {
        char c = text[i++];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i >= text.size()) break;
        switch (char e = text[i++]) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case '\\': out += '\\'; break;
            case '"': out += '"'; break;
            default: throw ConfigError(where + ": unknown escape \\" + std::string(1, e));
        }
    }
    if (i >= text.size()) throw ConfigError(where + ": unterminated string");
    return {out, i + 1};
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source, std::filesystem::path base_dir) {
    Config cfg;
    cfg.source_ = source;
    cfg.base_dir_ = std::move(base_dir);
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) throw ConfigError(where + ": unterminated section header");
            section = trim(std::string_view(line).substr(1, close - 1));
            const std::string rest = trim(std::string_view(line).substr(close + 1));
            if (!rest.empty() && rest[0] != '#') throw ConfigError(where + ": junk after section header");
            if (section.empty() || !std::all_of(section.begin(), section.end(), is_key_char))
                throw ConfigError(where + ": bad section name");
            cfg.values_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char))
            throw ConfigError(where + ": bad key '" + key + "'");
        std::string_view rhs = std::string_view(line).substr(eq + 1);
        while (!rhs.empty() && std::isspace(static_cast<unsigned char>(rhs.front()))) rhs.remove_prefix(1);
        std::string value;
        if (!rhs.empty() && rhs.front() == '"') {
            auto [decoded, used] = parse_quoted(rhs, where);
            value = std::move(decoded);
            const std::string rest = trim(rhs.substr(used));
            if (!rest.empty() && rest[0] != '#') throw ConfigError(where + ": junk after string value");
        } else {
            const auto hash = rhs.find('#');
            value = trim(rhs.substr(0, hash));
            if (value.empty()) throw ConfigError(where + ": missing value for '" + key + "'");
        }
        auto& slot = cfg.values_[section];
        if (slot.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        slot[key] = Value{value, line_no};
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string(), std::filesystem::absolute(path).parent_path());
}

std::string Config::where(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    std::size_t line = 0;
    if (s != values_.end())
        if (auto k = s->second.find(key); k != s->second.end()) line = k->second.line;
    return source_ + ":" + std::to_string(line) + " [" + section + "] " + key;
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    if (s == values_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second.text;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
    return get(section, key).value_or(fallback);
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) throw ConfigError(where(section, key) + ": not an integer");
    return out;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        double out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(where(section, key) + ": not a number");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError(where(section, key) + ": expected true or false");
}

std::optional<std::filesystem::path> Config::get_path(const std::string& section, const std::string& key) const {
    auto v = get(section, key);
    if (!v) return std::nullopt;
    std::filesystem::path p(*v);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p;
}

void Config::require_known(const std::string& section, std::initializer_list<std::string_view> known) const {
    auto s = values_.find(section);
    if (s == values_.end()) return;
    for (const auto& [key, _] : s->second)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where(section, key) + ": unknown key");
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : values_) out.push_back(name);
    return out;
}

}  // namespace mcot
