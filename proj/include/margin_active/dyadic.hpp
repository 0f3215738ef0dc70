#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace margin_active {

using Point = std::vector<double>;

/// Side length 2^-level.
double side_length(int level);

/// Half-open hypercube prod_i [c_i r, (c_i + 1) r) with r = 2^-level.
struct Cell {
  int level = 0;
  std::vector<std::int64_t> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  double side() const { return side_length(level); }

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept;
};

/// Cell of the level-`level` partition containing x. A coordinate equal to
/// 1.0 lands in the last cell along that axis; coordinates outside [0, 1]
/// raise std::domain_error.
Cell cell_at(std::span<const double> x, int level);

/// The 2^d children at level + 1, in lexicographic order of coordinates.
std::vector<Cell> refine(const Cell& c);

/// ((c_i + 1/2) r)_i
Point barycenter(const Cell& c);

/// Ancestor of c at a coarser (or equal) level.
Cell ancestor(const Cell& c, int level);

bool is_descendant_or_self(const Cell& child, const Cell& parent);

/// Membership in the half-open extent.
bool contains(const Cell& c, std::span<const double> x);

/// Lebesgue measure of the intersection of c with the box [lo, hi).
double overlap_volume(const Cell& c, std::span<const double> lo,
                      std::span<const double> hi);

/// "k:c1,c2,...,cd"
std::string to_string(const Cell& c);
Cell parse_cell(std::string_view text);

/// All 2^(kd) cells of one level, enumerated lexicographically on coordinates
/// (first coordinate most significant). No cells are stored.
class DyadicPartition {
 public:
  DyadicPartition(int level, int dim);

  int level() const { return level_; }
  int dim() const { return dim_; }
  std::int64_t cells_per_axis() const { return per_axis_; }
  std::uint64_t size() const { return size_; }

  Cell cell(std::uint64_t index) const;
  std::uint64_t index_of(const Cell& c) const;
  std::uint64_t index_of_point(std::span<const double> x) const;

  /// Indices (in this partition) of the level-`level()` cells inside
  /// `coarse`, which must be at this level or coarser.
  std::vector<std::uint64_t> descendants_of(const Cell& coarse) const;

 private:
  int level_;
  int dim_;
  std::int64_t per_axis_;
  std::uint64_t size_;
};

}  // namespace margin_active
