#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace margin_active {

/// Labels are 0-based indices into the regression vector: label y stands for
/// the (y+1)-th class. In binary constructions label 1 is "Y = 1".
using Label = int;

inline constexpr int kMaxLabels = 16;

/// Subset of {0, ..., L-1} with L <= 16.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr explicit LabelSet(std::uint16_t bits) : bits_(bits) {}

  static LabelSet all(int num_labels) {
    if (num_labels < 1 || num_labels > kMaxLabels) {
      throw std::domain_error("LabelSet: label count must be in [1, 16]");
    }
    return LabelSet(static_cast<std::uint16_t>((1U << num_labels) - 1U));
  }
  static constexpr LabelSet single(Label y) {
    return LabelSet(static_cast<std::uint16_t>(1U << y));
  }

  constexpr bool contains(Label y) const { return (bits_ >> y) & 1U; }
  constexpr void insert(Label y) { bits_ |= static_cast<std::uint16_t>(1U << y); }
  constexpr void erase(Label y) { bits_ &= static_cast<std::uint16_t>(~(1U << y)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr std::uint16_t bits() const { return bits_; }

  /// Smallest member; the set must be nonempty.
  constexpr Label min() const { return std::countr_zero(bits_); }

  constexpr bool subset_of(LabelSet other) const { return (bits_ & ~other.bits_) == 0; }

  std::vector<Label> members() const {
    std::vector<Label> out;
    for (Label y = 0; y < kMaxLabels; ++y) {
      if (contains(y)) out.push_back(y);
    }
    return out;
  }

  friend constexpr LabelSet operator&(LabelSet a, LabelSet b) {
    return LabelSet(static_cast<std::uint16_t>(a.bits_ & b.bits_));
  }
  friend constexpr LabelSet operator|(LabelSet a, LabelSet b) {
    return LabelSet(static_cast<std::uint16_t>(a.bits_ | b.bits_));
  }
  friend constexpr bool operator==(LabelSet, LabelSet) = default;

 private:
  std::uint16_t bits_ = 0;
};

}  // namespace margin_active
