#include "swarmlfa/hdi_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/random.hpp"

namespace swarmlfa {

namespace {

std::uint64_t pair_key(Index u, Index i) noexcept {
    return (static_cast<std::uint64_t>(u) << 32) | i;
}

std::string_view trim(std::string_view s) noexcept {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, Separator sep) {
    const std::string_view delim = separator_text(sep);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + delim.size();
    }
    return fields;
}

bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

template <typename Int>
bool parse_index(std::string_view text, Int& out) {
    text = trim(text);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return !text.empty() && ec == std::errc{} && ptr == end;
}

class IdRemapper {
public:
    Index operator()(std::string_view raw, IdMap& map) {
        auto [it, inserted] = lookup_.try_emplace(std::string(raw), static_cast<Index>(map.labels.size()));
        if (inserted) map.labels.emplace_back(raw);
        return it->second;
    }

private:
    std::unordered_map<std::string, Index> lookup_;
};

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

HdiMatrix::HdiMatrix(std::size_t user_count, std::size_t item_count, std::vector<RatingEntry> entries)
    : user_count_(user_count),
      item_count_(item_count),
      entries_(std::move(entries)),
      by_row_(user_count),
      by_col_(item_count) {
    std::unordered_map<std::uint64_t, std::size_t> seen;
    seen.reserve(entries_.size());
    for (std::size_t pos = 0; pos < entries_.size(); ++pos) {
        const RatingEntry& e = entries_[pos];
        if (e.user >= user_count_ || e.item >= item_count_) {
            throw InputError("entry " + std::to_string(pos) + " (" + std::to_string(e.user) + ", " +
                             std::to_string(e.item) + ") outside " + std::to_string(user_count_) + "x" +
                             std::to_string(item_count_));
        }
        if (!std::isfinite(e.rating)) {
            throw InputError("entry " + std::to_string(pos) + " has a non-finite rating");
        }
        if (!seen.emplace(pair_key(e.user, e.item), pos).second) {
            throw InputError("duplicate entry (" + std::to_string(e.user) + ", " + std::to_string(e.item) + ")");
        }
        by_row_[e.user].push_back(pos);
        by_col_[e.item].push_back(pos);
    }
}

double HdiMatrix::density() const noexcept {
    const double cells = static_cast<double>(user_count_) * static_cast<double>(item_count_);
    return cells > 0 ? static_cast<double>(entries_.size()) / cells : 0.0;
}

std::span<const std::size_t> HdiMatrix::row_positions(Index u) const {
    if (u >= user_count_) throw ConfigError("row " + std::to_string(u) + " out of range");
    return by_row_[u];
}

std::span<const std::size_t> HdiMatrix::col_positions(Index i) const {
    if (i >= item_count_) throw ConfigError("column " + std::to_string(i) + " out of range");
    return by_col_[i];
}

std::vector<SliceEntry> HdiMatrix::row_slice(Index u) const {
    std::vector<SliceEntry> out;
    for (std::size_t pos : row_positions(u)) out.push_back({entries_[pos].item, entries_[pos].rating});
    return out;
}

std::vector<SliceEntry> HdiMatrix::col_slice(Index i) const {
    std::vector<SliceEntry> out;
    for (std::size_t pos : col_positions(i)) out.push_back({entries_[pos].user, entries_[pos].rating});
    return out;
}

std::string_view separator_text(Separator sep) noexcept {
    switch (sep) {
        case Separator::DoubleColon: return "::";
        case Separator::Tab: return "\t";
        case Separator::Comma: return ",";
    }
    return "\t";
}

Separator parse_separator(std::string_view name) {
    if (name == "::" || name == "movielens") return Separator::DoubleColon;
    if (name == "tab" || name == "\t" || name == "tsv") return Separator::Tab;
    if (name == "comma" || name == "," || name == "csv") return Separator::Comma;
    throw ConfigError("unknown separator '" + std::string(name) + "' (expected ::, tab or comma)");
}

ParsedRatings parse_ratings(std::istream& in, const RatingFormat& format) {
    const std::size_t needed = std::max({format.user_column, format.item_column, format.rating_column}) + 1;
    const std::size_t min_fields = std::max(format.min_fields, needed);
    const std::size_t max_fields = std::max(format.max_fields, min_fields);

    ParsedRatings result;
    IdRemapper user_ids;
    IdRemapper item_ids;
    std::vector<RatingEntry> entries;
    std::unordered_map<std::uint64_t, std::size_t> slot;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view, format.separator);
        if (fields.size() < min_fields || fields.size() > max_fields) {
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(min_fields) +
                             (min_fields == max_fields ? "" : "-" + std::to_string(max_fields)) + " fields, got " +
                             std::to_string(fields.size()));
        }
        const std::string_view raw_user = trim(fields[format.user_column]);
        const std::string_view raw_item = trim(fields[format.item_column]);
        if (raw_user.empty() || raw_item.empty()) {
            throw InputError("line " + std::to_string(line_no) + ": empty id field");
        }
        double rating = 0.0;
        if (!parse_double(fields[format.rating_column], rating)) {
            throw InputError("line " + std::to_string(line_no) + ": non-numeric rating '" +
                             std::string(trim(fields[format.rating_column])) + "'");
        }
        const Index u = user_ids(raw_user, result.users);
        const Index i = item_ids(raw_item, result.items);
        auto [it, inserted] = slot.try_emplace(pair_key(u, i), entries.size());
        if (inserted) {
            entries.push_back({u, i, rating});
        } else {
            entries[it->second].rating = rating;
            ++result.duplicates;
        }
    }
    result.lines_read = line_no;
    if (entries.empty()) throw InputError("no entries");
    result.matrix = HdiMatrix(result.users.size(), result.items.size(), std::move(entries));
    return result;
}

ParsedRatings parse_ratings(std::string_view text, const RatingFormat& format) {
    std::istringstream in{std::string(text)};
    return parse_ratings(in, format);
}

HdiMatrix read_canonical(std::istream& in, std::size_t user_count, std::size_t item_count) {
    std::vector<RatingEntry> entries;
    std::size_t max_user = 0;
    std::size_t max_item = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view, Separator::Tab);
        RatingEntry e;
        if (fields.size() != 3 || !parse_index(fields[0], e.user) || !parse_index(fields[1], e.item) ||
            !parse_double(fields[2], e.rating)) {
            throw InputError("line " + std::to_string(line_no) + ": expected user<TAB>item<TAB>rating");
        }
        max_user = std::max<std::size_t>(max_user, e.user + 1);
        max_item = std::max<std::size_t>(max_item, e.item + 1);
        entries.push_back(e);
    }
    if (user_count == 0) user_count = max_user;
    if (item_count == 0) item_count = max_item;
    if (max_user > user_count || max_item > item_count) {
        throw ConfigError("entries exceed declared dimensions " + std::to_string(user_count) + "x" +
                          std::to_string(item_count));
    }
    return HdiMatrix(user_count, item_count, std::move(entries));
}

void write_ratings(std::ostream& out, const HdiMatrix& matrix, Separator sep) {
    const std::string_view delim = separator_text(sep);
    for (const RatingEntry& e : matrix.entries()) {
        out << e.user << delim << e.item << delim << format_real(e.rating) << '\n';
    }
}

void write_id_map(std::ostream& out, const IdMap& map) {
    for (std::size_t i = 0; i < map.labels.size(); ++i) out << map.labels[i] << '\t' << i << '\n';
}

DataSplit split(const HdiMatrix& source, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1");
    }

    const std::size_t n = source.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0x5b1d}));
    std::shuffle(order.begin(), order.end(), rng);

    // The epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
    const auto count_for = [n](double ratio) {
        return std::min(n, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
    };
    const std::size_t n_train = count_for(ratios[0]);
    const std::size_t n_valid = std::min(n - n_train, count_for(ratios[1]));

    std::vector<RatingEntry> parts[3];
    const auto all = source.entries();
    for (std::size_t k = 0; k < n; ++k) {
        const int bucket = k < n_train ? 0 : (k < n_train + n_valid ? 1 : 2);
        parts[bucket].push_back(all[order[k]]);
    }
    const auto make = [&](std::vector<RatingEntry>& v) {
        return HdiMatrix(source.user_count(), source.item_count(), std::move(v));
    };
    return DataSplit{make(parts[0]), make(parts[1]), make(parts[2]), seed};
}

}  // namespace swarmlfa
