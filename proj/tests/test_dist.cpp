#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "margin_active/config_error.hpp"
#include "margin_active/dist.hpp"
#include "margin_active/learner.hpp"

using namespace margin_active;
using margin_active::testing::lb_fixed;
using margin_active::testing::lb_params;

TEST_CASE("soft margin") {
  CHECK(soft_margin(std::vector<double>{0.5, 0.5, 0.1}) == doctest::Approx(0.4));
  CHECK(std::isinf(soft_margin(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3})));
  CHECK(soft_margin(std::vector<double>{0.7, 0.3}) == doctest::Approx(0.4));
}

TEST_CASE("sharp margin never exceeds the soft margin") {
  CHECK(sharp_margin(std::vector<double>{0.5, 0.5, 0.1}) == 0.0);
  CHECK(sharp_margin(std::vector<double>{0.6, 0.3, 0.1}) == doctest::Approx(0.3));
  Rng rng(21);
  for (int t = 0; t < 2000; ++t) {
    const int L = 2 + static_cast<int>(rng.uniform_index(4));
    std::vector<double> eta(L);
    double s = 0.0;
    for (auto& v : eta) {
      // coarse values, ties included
      v = static_cast<double>(rng.uniform_index(4));
      s += v;
    }
    if (s == 0.0) continue;
    for (auto& v : eta) v /= s;
    CHECK(sharp_margin(eta) <= soft_margin(eta));
    CHECK(!bayes_labels(eta).empty());
  }
}

TEST_CASE("bayes labels collect every argmax") {
  CHECK(bayes_labels(std::vector<double>{0.4, 0.4, 0.2}) == LabelSet(0b011));
  CHECK(bayes_labels(std::vector<double>{0.1, 0.2, 0.7}) == LabelSet::single(2));
}

TEST_CASE("lower-bound density") {
  const auto p2 = lb_params(3, 1.0, 1.0, 1.0, 2);
  const DyadicPartition part(3, 2);
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    CHECK(lb_density(p2, barycenter(part.cell(i))) == 16.0);
  }
  const auto p1 = lb_params(2);
  const double r = p1.r();
  const double xc = barycenter(Cell{2, {1}})[0];
  CHECK(lb_density(p1, std::vector<double>{xc + r / 8.0}) == 0.0);
  CHECK(lb_density(p1, std::vector<double>{xc + r / 8.0 - 1e-9}) == 4.0);

  // Each cell carries r^d of mass: r^-d cells x (r/4)^d volume x 4^d.
  const auto spec = lb_fixed(p2, 1, 1);
  double total = 0.0;
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    const double m = *spec->region_mass(part.cell(i));
    CHECK(m == doctest::Approx(std::pow(p2.r(), 2)).epsilon(1e-12));
    total += m;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lower-bound regression function") {
  const auto p = lb_params(2, 1.0, 1.0, 1.0);
  const double r = p.r();
  const double xc = barycenter(Cell{2, {2}})[0];
  const auto plus = lb_fixed(p, 1, 1);
  CHECK(plus->eta(std::vector<double>{xc})[1] == doctest::Approx(0.5 + r / 8.0));
  CHECK(lb_bump(p, std::vector<double>{xc + r / 4.0 - 1e-15}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lb_eta(p, plus->coins(), std::vector<double>{xc + r / 4.0 - 1e-15}) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lb_bump(p, std::vector<double>{xc + r / 8.0}) == doctest::Approx(r));
  // constant on the support
  for (double off : {-r / 8.0 + 1e-12, -r / 16.0, 0.0, r / 16.0, r / 8.0 - 1e-12}) {
    CHECK(lb_bump(p, std::vector<double>{xc + off}) == doctest::Approx(r));
  }
  const auto zero = lb_fixed(p, 0, -1);
  CHECK(zero->eta(std::vector<double>{xc})[1] == 0.5);
}

TEST_CASE("coin probabilities") {
  CHECK(lb_params(1, 1.0, 1.0).z_probability() == doctest::Approx(0.5));
  CHECK(lb_params(2, 1.0, 2.0).z_probability() == doctest::Approx(1.0 / 16));

  const auto p = lb_params(6, 1.0, 1.0);  // 64 cells, P(z = 1) = 1/64
  Rng rng(77);
  double ones = 0.0, cells = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const auto zs = sample_zsigma(p, rng);
    for (auto z : zs.z) ones += z;
    cells += static_cast<double>(zs.z.size());
  }
  const double q = p.z_probability();
  const double se = std::sqrt(q * (1 - q) / cells);
  CHECK(std::abs(ones / cells - q) <= 3 * se);
}

TEST_CASE("theta check") {
  const auto p = lb_params(3, 1.0, 1.0);
  const DyadicPartition part(3, 1);
  ZSigmaAssignment zs{3, 1, std::vector<std::uint8_t>(part.size(), 0), std::vector<std::int8_t>(part.size(), 1)};
  CHECK(check_theta_beta(zs, p, 0.5));
  std::fill(zs.z.begin(), zs.z.end(), 1);
  CHECK_FALSE(check_theta_beta(zs, p, 0.5));

  // membership frequency against the Chernoff lower bound at C_beta = 2
  const auto p2 = lb_params(4, 1.0, 1.0, 1.0, 2);
  Rng rng(5);
  int ok = 0;
  const int draws = 400;
  for (int i = 0; i < draws; ++i) ok += check_theta_beta(sample_zsigma(p2, rng), p2, 2.0) ? 1 : 0;
  const double bound = 1.0 - std::exp(-(1.0 / 3.0) * std::pow(p2.r(), -(2.0 - 1.0)));
  CHECK(static_cast<double>(ok) / draws >= bound);
}

TEST_CASE("label oracle") {
  const ConstantSpec certain(1, {0.0, 1.0});
  BudgetMeter meter(1000);
  Oracle oracle(certain, meter);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(oracle.query(std::vector<double>{rng.uniform()}, rng) == 1);

  const ConstantSpec fair(1, {0.5, 0.5});
  BudgetMeter meter2(10000);
  Oracle o2(fair, meter2);
  int ones = 0;
  for (int i = 0; i < 10000; ++i) ones += o2.query(std::vector<double>{0.3}, rng);
  CHECK(std::abs(ones / 1e4 - 0.5) <= 3 * std::sqrt(0.25 / 1e4));
  CHECK_THROWS_AS(o2.query(std::vector<double>{0.3}, rng), BudgetError);
}

TEST_CASE("labels in one construction cell are i.i.d. given the coins") {
  const auto p = lb_params(2, 1.0, 1.0);
  const auto spec = lb_fixed(p, 1, 1);
  const double q = 0.5 + p.lambda / 8.0 * p.r();
  CHECK(p.bump_height() == doctest::Approx(q - 0.5));
  const auto x = barycenter(Cell{2, {1}});
  Rng rng(42);
  const int pairs = 20000;
  BudgetMeter meter(2 * pairs);
  Oracle oracle(*spec, meter);
  double counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < pairs; ++i) {
    const int a = oracle.query(x, rng);
    const int b = oracle.query(x, rng);
    counts[2 * a + b] += 1.0;
  }
  const double expect[4] = {(1 - q) * (1 - q), (1 - q) * q, q * (1 - q), q * q};
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double e = expect[i] * pairs;
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  CHECK(chi2 < 16.27);  // chi-square(3) upper 0.1% point
}

TEST_CASE("ramp exact hooks agree with Monte Carlo") {
  const RampSpec ramp({1, 3, 0.4, 0.6, 1.0, 0.1});
  const DyadicPartition part(3, 1);
  Rng rng(8);
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    const Cell c = part.cell(i);
    const auto mean = *ramp.cell_mean_eta(c);
    std::vector<double> acc(3, 0.0);
    const int m = 4000;
    std::vector<double> x(1);
    for (int j = 0; j < m; ++j) {
      REQUIRE(ramp.sample_in_cell(c, rng, x));
      const auto e = ramp.eta(x);
      for (int y = 0; y < 3; ++y) acc[y] += e[y] / m;
    }
    for (int y = 0; y < 3; ++y) CHECK(acc[y] == doctest::Approx(mean[y]).epsilon(0.02));
    CHECK(*ramp.region_mass(c) == doctest::Approx(0.125));
  }
  CHECK(*ramp.cell_bayes_labels(Cell{1, {0}}) == LabelSet(0b011));
  CHECK(*ramp.cell_bayes_labels(Cell{2, {3}}) == LabelSet::single(0));
  CHECK(ramp.holder_constant() == doctest::Approx(0.6));
}

TEST_CASE("figure1 regions") {
  const auto fig = make_figure1_spec({});
  CHECK(fig->non_unique_bayes_mass() == doctest::Approx(0.5));
  double total = 0.0;
  for (const auto& r : fig->regions()) total += r.mass;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("spec_from_json") {
  const auto s = spec_from_json({{"family", "ramp"}, {"labels", 3}, {"floor", 0.1}});
  CHECK(s->num_labels() == 3);
  CHECK(spec_from_json({{"family", "figure1"}})->num_labels() == 3);
  const auto lb = spec_from_json({{"family", "lowerbound"}, {"n", 4096}, {"seed", 3}});
  CHECK(lb->construction_level() == 2);
  CHECK_THROWS_AS(spec_from_json({{"family", "nope"}}), ConfigError);
  CHECK_THROWS_AS(spec_from_json({{"family", "ramp"}, {"slope", "x"}}), ConfigError);
}
