#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace swarmlfa {

/// Flat key=value text: one pair per line, '#' starts a comment, keys may carry
/// a section prefix ("sgd.eta"). Later lines override earlier ones.
class KeyValues {
public:
    static KeyValues parse(std::istream& in);
    static KeyValues parse(std::string_view text);
    static KeyValues load(const std::string& path);

    bool contains(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    /// Keys beginning with prefix + '.', prefix stripped.
    KeyValues section(const std::string& prefix) const;

    // Typed lookups; each throws ConfigError naming the key on a bad value.
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    std::uint64_t get(const std::string& key, std::uint64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;
    std::vector<std::string> get_words(const std::string& key, std::vector<std::string> fallback) const;

    /// Sorted "key=value\n" lines.
    void write(std::ostream& out) const;
    std::string str() const;

private:
    std::map<std::string, std::string> values_;
};

std::string format_double(double v);
std::vector<std::string> split_list(std::string_view text, char delim = ',');

}  // namespace swarmlfa
