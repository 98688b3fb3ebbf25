#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace swarmlfa {

using Index = std::uint32_t;

/// One known rating r_{u,i}, ids already remapped to 0-based ranges.
struct RatingEntry {
    Index user = 0;
    Index item = 0;
    double rating = 0.0;

    friend bool operator==(const RatingEntry&, const RatingEntry&) = default;
};

/// One element of a row or column slice: the opposite-side index and the rating.
struct SliceEntry {
    Index other = 0;
    double rating = 0.0;

    friend bool operator==(const SliceEntry&, const SliceEntry&) = default;
};

/// Sparse known-entry set of a |U| x |I| matrix with row and column indexes.
///
/// Immutable after construction. by_row(u) / by_col(i) hold positions into
/// entries() in insertion order.
class HdiMatrix {
public:
    HdiMatrix() = default;

    /// Validates ranges, finiteness and (user, item) uniqueness; throws InputError.
    HdiMatrix(std::size_t user_count, std::size_t item_count, std::vector<RatingEntry> entries);

    std::size_t user_count() const noexcept { return user_count_; }
    std::size_t item_count() const noexcept { return item_count_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    double density() const noexcept;

    std::span<const RatingEntry> entries() const noexcept { return entries_; }
    std::span<const std::size_t> row_positions(Index u) const;
    std::span<const std::size_t> col_positions(Index i) const;

    /// Known entries of row u as (item, rating), insertion order.
    std::vector<SliceEntry> row_slice(Index u) const;
    /// Known entries of column i as (user, rating), insertion order.
    std::vector<SliceEntry> col_slice(Index i) const;

private:
    std::size_t user_count_ = 0;
    std::size_t item_count_ = 0;
    std::vector<RatingEntry> entries_;
    std::vector<std::vector<std::size_t>> by_row_;
    std::vector<std::vector<std::size_t>> by_col_;
};

enum class Separator { DoubleColon, Tab, Comma };

std::string_view separator_text(Separator sep) noexcept;
/// Accepts "::", "tab", "\t", "comma", ",". Throws ConfigError otherwise.
Separator parse_separator(std::string_view name);

/// Describes a line-oriented rating file. Column positions are 0-based; a line
/// must carry between min_fields and max_fields fields (extra trailing fields,
/// e.g. a timestamp, are ignored).
struct RatingFormat {
    Separator separator = Separator::DoubleColon;
    std::size_t user_column = 0;
    std::size_t item_column = 1;
    std::size_t rating_column = 2;
    std::size_t min_fields = 3;
    std::size_t max_fields = 4;

    static RatingFormat movielens() { return {}; }
    static RatingFormat tsv() { return {.separator = Separator::Tab}; }
    static RatingFormat csv() { return {.separator = Separator::Comma}; }
};

/// Raw id for every remapped index: labels[remapped] == original.
struct IdMap {
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct ParsedRatings {
    HdiMatrix matrix;
    IdMap users;
    IdMap items;
    std::size_t duplicates = 0;  ///< lines overridden by a later line for the same pair
    std::size_t lines_read = 0;
};

/// Parses ratings, remapping raw ids to contiguous 0-based ids in order of first
/// appearance. Duplicate (user, item) lines keep the last rating.
/// Throws InputError naming the line number on a malformed line, or "no entries".
ParsedRatings parse_ratings(std::istream& in, const RatingFormat& format);
ParsedRatings parse_ratings(std::string_view text, const RatingFormat& format);

/// Reads a canonical "user<TAB>item<TAB>rating" file whose ids are already
/// 0-based indices. Dimensions are taken from the arguments when nonzero, else
/// from the largest ids seen. An empty file yields an empty matrix.
HdiMatrix read_canonical(std::istream& in, std::size_t user_count = 0, std::size_t item_count = 0);

/// Writes entries as "user<sep>item<sep>rating\n" using remapped ids and
/// round-trip exact (17 significant digit) ratings.
void write_ratings(std::ostream& out, const HdiMatrix& matrix, Separator sep = Separator::Tab);

/// Writes "original<TAB>remapped\n" lines.
void write_id_map(std::ostream& out, const IdMap& map);

struct DataSplit {
    HdiMatrix train;
    HdiMatrix validation;
    HdiMatrix test;
    std::uint64_t seed = 0;
};

/// Seeded uniform per-entry shuffle, then partition: floor(ratio*N) entries to
/// train and validation, the remainder to test.
/// Throws ConfigError on a negative ratio or ratios not summing to 1 (1e-9).
DataSplit split(const HdiMatrix& source, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace swarmlfa
