#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "margin_active/dist.hpp"

namespace margin_active {

/// Outcome of a statistical assumption check. Checks certify at a stated
/// resolution (grid size, Monte-Carlo sample), they do not prove.
struct ConditionReport {
  std::string condition;
  nlohmann::json parameters;
  std::uint64_t grid_size = 0;
  std::vector<Point> witnesses;
  bool pass = false;
  double measured_constant = 0.0;
  std::optional<double> measured_exponent;
  std::uint64_t seed = 0;
  nlohmann::json details;
};

nlohmann::json to_json(const ConditionReport& r);

/// Hölder ratio ||eta(x) - eta(x')||_inf / ||x - x'||_inf^alpha over all
/// pairs of a lattice + random point set (plus close random pairs). Passes
/// iff the max ratio is <= lambda up to 1e-9 relative slack.
ConditionReport check_holder(const DistributionSpec& spec, double lambda, double alpha, int grid_n,
                             std::uint64_t seed);

/// Monte-Carlo check of P_X(soft margin <= tau) <= C_beta tau^beta for each
/// tau, with a 3 standard-error allowance. Also reports the fitted exponent
/// of the margin c.d.f. and, as an informational field, the
/// P_X(sharp margin <= tau) curve.
ConditionReport check_tmc(const DistributionSpec& spec, double beta, double c_beta,
                          const std::vector<double>& tau_grid, std::uint64_t mc_n,
                          std::uint64_t seed);

/// Refined margin condition: the soft-margin TMC plus
/// P_X(sharp margin <= tau) <= eps + C_beta tau^beta_sharp. Reports the
/// measured non-unique-Bayes mass P_X(sharp margin = 0).
ConditionReport check_rmc(const DistributionSpec& spec, double eps, double beta, double beta_sharp,
                          double c_beta, const std::vector<double>& tau_grid, std::uint64_t mc_n,
                          std::uint64_t seed);

/// Every dyadic cell with positive mass, at levels 1..max_level, has
/// P_X(C) >= c_d r^d. Uses exact cell masses when the family has them,
/// otherwise Monte-Carlo frequencies with a 3 standard-error allowance.
ConditionReport check_strong_density(const DistributionSpec& spec, double c_d, int max_level,
                                     std::uint64_t mc_n, std::uint64_t seed);

}  // namespace margin_active
