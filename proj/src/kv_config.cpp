#include "swarmlfa/kv_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "swarmlfa/errors.hpp"

namespace swarmlfa {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return !text.empty() && ec == std::errc{} && ptr == end;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    return std::string(buf, end);
}

std::vector<std::string> split_list(std::string_view text, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find(delim, start);
        const auto piece = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!piece.empty()) out.emplace_back(piece);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

KeyValues KeyValues::parse(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(view.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        kv.values_[std::string(key)] = std::string(trim(view.substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    return parse(in);
}

KeyValues KeyValues::section(const std::string& prefix) const {
    KeyValues out;
    const std::string lead = prefix + ".";
    for (const auto& [k, v] : values_) {
        if (k.starts_with(lead)) out.values_[k.substr(lead.size())] = v;
    }
    return out;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValues::get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    if (!parse_number(it->second, v)) bad_value(key, it->second, "a real number");
    return v;
}

std::uint64_t KeyValues::get(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    if (!parse_number(it->second, v)) bad_value(key, it->second, "a non-negative integer");
    return v;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get(key, static_cast<std::uint64_t>(fallback)));
}

bool KeyValues::get(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    bad_value(key, it->second, "true or false");
}

std::vector<double> KeyValues::get_list(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const std::string& piece : split_list(it->second)) {
        double v = 0.0;
        if (!parse_number(piece, v)) bad_value(key, it->second, "a comma-separated list of reals");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KeyValues::get_words(const std::string& key, std::vector<std::string> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return split_list(it->second);
}

void KeyValues::write(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

std::string KeyValues::str() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

}  // namespace swarmlfa
