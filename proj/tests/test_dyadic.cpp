#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "margin_active/dyadic.hpp"
#include "margin_active/rng.hpp"

using namespace margin_active;

TEST_CASE("cell_at uses half-open cells and clamps the right edge") {
  CHECK(cell_at(std::vector<double>{0.3}, 1) == Cell{1, {0}});
  CHECK(cell_at(std::vector<double>{0.5, 0.5}, 1) == Cell{1, {1, 1}});
  CHECK(cell_at(std::vector<double>{1.0}, 2) == Cell{2, {3}});
  CHECK(cell_at(std::vector<double>{0.0}, 5) == Cell{5, {0}});
  CHECK_THROWS_AS(cell_at(std::vector<double>{1.5}, 1), std::domain_error);
  CHECK_THROWS_AS(cell_at(std::vector<double>{-0.01}, 1), std::domain_error);
}

TEST_CASE("refine lists children in lexicographic order") {
  const auto kids = refine(Cell{0, {0}});
  REQUIRE(kids.size() == 2);
  CHECK(kids[0] == Cell{1, {0}});
  CHECK(kids[1] == Cell{1, {1}});

  auto kids2 = refine(Cell{1, {1, 0}});
  REQUIRE(kids2.size() == 4);
  std::vector<std::vector<std::int64_t>> coords;
  for (const auto& k : kids2) {
    CHECK(k.level == 2);
    coords.push_back(k.coords);
  }
  std::vector<std::vector<std::int64_t>> expected{{2, 0}, {3, 0}, {2, 1}, {3, 1}};
  std::sort(coords.begin(), coords.end());
  std::sort(expected.begin(), expected.end());
  CHECK(coords == expected);
}

TEST_CASE("children tile the parent") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_index(3));
    const int k = static_cast<int>(rng.uniform_index(6));
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform();
    const Cell parent = cell_at(x, k);
    const auto kids = refine(parent);
    CHECK(kids.size() == (1u << d));
    double vol = 0.0;
    for (const auto& c : kids) {
      CHECK(is_descendant_or_self(c, parent));
      CHECK(ancestor(c, k) == parent);
      vol += std::pow(c.side(), d);
    }
    CHECK(vol == doctest::Approx(std::pow(parent.side(), d)).epsilon(1e-12));
    // The point of the parent lies in exactly one child.
    int hits = 0;
    for (const auto& c : kids) hits += contains(c, x) ? 1 : 0;
    CHECK(hits == 1);
    CHECK(cell_at(x, k + 1).level == k + 1);
    CHECK(contains(cell_at(x, k + 1), x));
  }
}

TEST_CASE("barycenter") {
  CHECK(barycenter(Cell{1, {0}}) == std::vector<double>{0.25});
  CHECK(barycenter(Cell{2, {3, 0}}) == std::vector<double>{0.875, 0.125});
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = static_cast<int>(rng.uniform_index(10));
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const Cell c = cell_at(x, k);
    CHECK(contains(c, barycenter(c)));
    CHECK(cell_at(barycenter(c), k) == c);
  }
}

TEST_CASE("cell strings round-trip") {
  const Cell c{3, {5, 0, 7}};
  CHECK(to_string(c) == "3:5,0,7");
  CHECK(parse_cell("3:5,0,7") == c);
  CHECK(parse_cell(to_string(Cell{0, {0}})) == Cell{0, {0}});
}

TEST_CASE("overlap volume of a box with a cell") {
  const std::vector<double> lo{0.1, 0.2}, hi{0.3, 0.9};
  CHECK(overlap_volume(Cell{1, {0, 0}}, lo, hi) == doctest::Approx(0.2 * 0.3));
  CHECK(overlap_volume(Cell{1, {1, 1}}, lo, hi) == 0.0);
}

TEST_CASE("partition indexing") {
  const DyadicPartition part(3, 2);
  CHECK(part.cells_per_axis() == 8);
  CHECK(part.size() == 64u);
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    const Cell c = part.cell(i);
    CHECK(part.index_of(c) == i);
    CHECK(part.index_of_point(barycenter(c)) == i);
  }
  const auto desc = part.descendants_of(Cell{1, {1, 0}});
  CHECK(desc.size() == 16u);
  for (auto i : desc) CHECK(is_descendant_or_self(part.cell(i), Cell{1, {1, 0}}));
  CHECK(part.descendants_of(Cell{3, {2, 2}}).size() == 1u);
}
