#include "margin_active/dyadic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace margin_active {

double side_length(int level) { return std::ldexp(1.0, -level); }

std::size_t CellHash::operator()(const Cell& c) const noexcept {
  std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(c.level);
  for (auto v : c.coords) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

Cell cell_at(std::span<const double> x, int level) {
  if (level < 0 || level > 62) throw std::domain_error("cell_at: level out of range");
  const std::int64_t per_axis = std::int64_t{1} << level;
  Cell c{level, std::vector<std::int64_t>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (!(xi >= 0.0 && xi <= 1.0)) {
      throw std::domain_error("cell_at: coordinate outside [0, 1]");
    }
    auto ci = static_cast<std::int64_t>(std::floor(std::ldexp(xi, level)));
    c.coords[i] = std::min(ci, per_axis - 1);
  }
  return c;
}

std::vector<Cell> refine(const Cell& c) {
  const int d = c.dim();
  const std::uint64_t count = std::uint64_t{1} << d;
  std::vector<Cell> children;
  children.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Cell child{c.level + 1, std::vector<std::int64_t>(d)};
    for (int i = 0; i < d; ++i) {
      // first coordinate is the most significant bit of the offset
      const std::uint64_t bit = (mask >> (d - 1 - i)) & 1U;
      child.coords[i] = 2 * c.coords[i] + static_cast<std::int64_t>(bit);
    }
    children.push_back(std::move(child));
  }
  return children;
}

Point barycenter(const Cell& c) {
  const double r = c.side();
  Point p(c.coords.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = (static_cast<double>(c.coords[i]) + 0.5) * r;
  }
  return p;
}

Cell ancestor(const Cell& c, int level) {
  if (level > c.level) throw std::invalid_argument("ancestor: level finer than cell");
  Cell a{level, c.coords};
  const int shift = c.level - level;
  for (auto& v : a.coords) v >>= shift;
  return a;
}

bool is_descendant_or_self(const Cell& child, const Cell& parent) {
  if (child.level < parent.level || child.dim() != parent.dim()) return false;
  return ancestor(child, parent.level) == parent;
}

bool contains(const Cell& c, std::span<const double> x) {
  if (static_cast<int>(x.size()) != c.dim()) return false;
  const double r = c.side();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = static_cast<double>(c.coords[i]) * r;
    const double hi = lo + r;
    const bool last = c.coords[i] == (std::int64_t{1} << c.level) - 1;
    if (x[i] < lo) return false;
    if (x[i] >= hi && !(last && x[i] == 1.0)) return false;
  }
  return true;
}

double overlap_volume(const Cell& c, std::span<const double> lo,
                      std::span<const double> hi) {
  const double r = c.side();
  double vol = 1.0;
  for (std::size_t i = 0; i < c.coords.size(); ++i) {
    const double a = std::max(lo[i], static_cast<double>(c.coords[i]) * r);
    const double b = std::min(hi[i], static_cast<double>(c.coords[i] + 1) * r);
    if (b <= a) return 0.0;
    vol *= b - a;
  }
  return vol;
}

std::string to_string(const Cell& c) {
  std::string s = std::to_string(c.level) + ":";
  for (std::size_t i = 0; i < c.coords.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c.coords[i]);
  }
  return s;
}

Cell parse_cell(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("parse_cell: missing ':'");
  Cell c;
  auto parse_int = [](std::string_view s, auto& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw std::invalid_argument("parse_cell: bad integer '" + std::string(s) + "'");
    }
  };
  parse_int(text.substr(0, colon), c.level);
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::int64_t v = 0;
    parse_int(rest.substr(0, comma), v);
    c.coords.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  const std::int64_t per_axis = std::int64_t{1} << c.level;
  for (auto v : c.coords) {
    if (v < 0 || v >= per_axis) throw std::invalid_argument("parse_cell: coordinate out of range");
  }
  return c;
}

DyadicPartition::DyadicPartition(int level, int dim)
    : level_(level), dim_(dim), per_axis_(std::int64_t{1} << level) {
  if (level < 0 || dim < 1 || static_cast<long long>(level) * dim > 62) {
    throw std::domain_error("DyadicPartition: 2^(level*dim) cells not enumerable");
  }
  size_ = std::uint64_t{1} << (level * dim);
}

Cell DyadicPartition::cell(std::uint64_t index) const {
  Cell c{level_, std::vector<std::int64_t>(dim_)};
  for (int i = dim_ - 1; i >= 0; --i) {
    c.coords[i] = static_cast<std::int64_t>(index & (per_axis_ - 1));
    index >>= level_;
  }
  return c;
}

std::uint64_t DyadicPartition::index_of(const Cell& c) const {
  std::uint64_t idx = 0;
  for (int i = 0; i < dim_; ++i) {
    idx = (idx << level_) | static_cast<std::uint64_t>(c.coords[i]);
  }
  return idx;
}

std::uint64_t DyadicPartition::index_of_point(std::span<const double> x) const {
  return index_of(cell_at(x, level_));
}

std::vector<std::uint64_t> DyadicPartition::descendants_of(const Cell& coarse) const {
  if (coarse.level > level_) throw std::invalid_argument("descendants_of: cell finer than partition");
  const int shift = level_ - coarse.level;
  const std::int64_t span = std::int64_t{1} << shift;
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(std::uint64_t{1} << (shift * dim_)));
  std::vector<std::int64_t> offset(dim_, 0);
  Cell c{level_, std::vector<std::int64_t>(dim_)};
  while (true) {
    for (int i = 0; i < dim_; ++i) c.coords[i] = (coarse.coords[i] << shift) + offset[i];
    out.push_back(index_of(c));
    int axis = dim_ - 1;
    while (axis >= 0 && ++offset[axis] == span) {
      offset[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return out;
}

}  // namespace margin_active
