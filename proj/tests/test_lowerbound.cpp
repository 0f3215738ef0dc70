#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "margin_active/lowerbound.hpp"
#include "margin_active/risk.hpp"

using namespace margin_active;
using margin_active::testing::lb_fixed;
using margin_active::testing::lb_params;

TEST_CASE("construction parameters") {
  const auto p = make_lower_bound_params(4096, 1.0, 1.0, 1.0, 1);
  CHECK(p.level == 2);
  CHECK(p.c_eta() == 0.125);
  CHECK(p.bump_height() == doctest::Approx(1.0 / 32));
  CHECK(make_lower_bound_params(4095, 1.0, 1.0, 1.0, 1).level == 2);
  CHECK(make_lower_bound_params(4097, 1.0, 1.0, 1.0, 1).level == 3);
}

TEST_CASE("uniform allocation") {
  const auto spec = lb_fixed(lb_params(3), 1, 1);
  const auto alloc = UniformAllocation{}.allocation(*spec, 1000);
  REQUIRE(alloc.size() == 8u);
  for (auto a : alloc) CHECK(a == 62);  // floor(1000 / 8 / 2)
}

TEST_CASE("labeling rules") {
  const auto spec = lb_fixed(lb_params(2), 1, -1);
  Rng rng(1);
  const auto np = make_np_labeling();
  CHECK(np->label(std::vector<int>{1, 1, 1}, *spec, 0, rng) == 1);
  CHECK(np->label(std::vector<int>{}, *spec, 0, rng) == 1);
  CHECK(make_majority_labeling()->label(std::vector<int>{1, 0}, *spec, 0, rng) == 1);
  CHECK(make_minority_labeling()->label(std::vector<int>{1, 0}, *spec, 0, rng) == 0);
  CHECK(make_minority_labeling()->label(std::vector<int>{1, 1, 0}, *spec, 0, rng) == 0);
  CHECK(make_bayes_cheater()->label(std::vector<int>{1, 1, 1}, *spec, 2, rng) == 0);
  CHECK(make_labeling("always1")->label(std::vector<int>{0}, *spec, 0, rng) == 1);
  CHECK_THROWS(make_labeling("psychic"));
}

TEST_CASE("cheater has zero risk and np strategy respects the budget") {
  Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    const auto p = make_lower_bound_params(1 << 12, 1.0, 1.0, 1.0, 1);
    const LowerBoundSpec spec(p, sample_zsigma(p, rng));
    BudgetMeter meter(1 << 12);
    Oracle oracle(spec, meter);
    const auto h = np_strategy(oracle, spec, 1 << 12, UniformAllocation{}, *make_bayes_cheater(), rng);
    CHECK(excess_risk_exact(h, spec).value == 0.0);
    CHECK(meter.used() <= (1 << 12));
  }
}

TEST_CASE("ensemble results do not depend on the worker count") {
  std::vector<EnsembleLearner> learners;
  for (const char* rule : {"np", "majority", "cheater"}) {
    learners.push_back({rule, [rule](const LowerBoundSpec& spec, std::int64_t n, Rng& rng, std::int64_t& q) {
                          BudgetMeter meter(n);
                          Oracle oracle(spec, meter);
                          auto h = np_strategy(oracle, spec, n, UniformAllocation{}, *make_labeling(rule), rng);
                          q = meter.used();
                          return h;
                        }});
  }
  const auto one = run_ensemble(2048, 1.0, 1.0, 1.0, 1, learners, 12, 5, 1);
  const auto three = run_ensemble(2048, 1.0, 1.0, 1.0, 1, learners, 12, 5, 3);
  CHECK(one.risks == three.risks);
  CHECK(to_csv(one) == to_csv(three));
  CHECK(one.mean[2] == 0.0);
  // np and majority coincide on binary outcomes
  CHECK(one.risks[0] == one.risks[1]);
  CHECK(to_csv(one).rfind("draw,learner,n,risk\n", 0) == 0);
}

TEST_CASE("likelihood ratio") {
  CHECK(likelihood_ratio(std::vector<int>{}, 0.1) == 1.0);
  CHECK(likelihood_ratio(std::vector<int>{1, 0}, 0.1) == doctest::Approx(0.25 / 0.24));
  double prev = 0.0;
  for (int m = 2; m <= 12; m += 2) {
    const auto rep = likelihood_ratio_bound_check(m, 0.2);
    CHECK(rep.pass);
    CHECK(rep.max_ratio >= prev);
    CHECK(rep.max_ratio <= 16.0 * std::exp(2.0));
    CHECK(rep.bound == doctest::Approx(118.2249).epsilon(1e-5));
    prev = rep.max_ratio;
  }
  CHECK_THROWS_AS(likelihood_ratio_bound_check(14, 0.2), std::domain_error);
}

TEST_CASE("binomial helpers against hand values") {
  CHECK(binomial_cdf(4, 0.5, 1) == doctest::Approx(5.0 / 16));
  CHECK(binomial_upper_tail(4, 0.5, 3) == doctest::Approx(5.0 / 16));
  CHECK(binomial_upper_tail(100, 0.5, 60) == doctest::Approx(0.028444).epsilon(1e-4));
  CHECK(binomial_cdf(200, 0.55, 99) == doctest::Approx(0.068075).epsilon(1e-4));
}

TEST_CASE("anti-concentration") {
  Rng rng(8);
  const auto rep = anticoncentration_check(0.05, 200, 100000, rng);
  CHECK(std::abs(rep.frequency - rep.reference) <= 3 * rep.se);
  CHECK(rep.pass);

  const auto tiny = anticoncentration_check(1e-6, 20, 100000, rng);
  CHECK(std::abs(tiny.frequency - binomial_cdf(20, 0.5, 9)) <= 3 * tiny.se);

  for (double gap : {0.02, 0.05, 0.1, 0.2}) {
    for (int m : {1, 5, 12}) {
      if (m > 0.5 / (gap * gap) * (1.0 + 1e-12)) continue;
      CHECK(anticoncentration_check(gap, m, 20000, rng).frequency >= 0.01);
    }
  }
  CHECK_THROWS_AS(anticoncentration_check(0.2, 13, 10, rng), std::domain_error);
}

TEST_CASE("chernoff") {
  Rng rng(9);
  const auto rep = chernoff_check(0.5, 100, 0.2, 100000, rng);
  CHECK(rep.bound == doctest::Approx(std::exp(-100 * 0.04 * 0.5 / 3)));
  CHECK(rep.bound == doctest::Approx(0.513).epsilon(1e-3));
  CHECK(std::abs(rep.frequency - 0.028444) <= 3 * rep.se + 1e-4);
  CHECK(rep.pass);

  const auto huge = chernoff_check(0.5, 50, 2.5, 10000, rng);
  CHECK(huge.frequency == 0.0);
  CHECK(huge.pass);

  double prev = 1.0;
  for (int m = 10; m <= 200; m += 10) {
    const double b = chernoff_check(0.3, m, 0.5, 10, rng).bound;
    CHECK(b < prev);
    prev = b;
  }
}
