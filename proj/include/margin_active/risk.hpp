#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "margin_active/dist.hpp"
#include "margin_active/learner.hpp"

namespace margin_active {

struct RiskEstimate {
  double value = 0.0;
  std::string method;  // "exact" or "monte-carlo"
  std::uint64_t mc_points = 0;
  std::optional<double> standard_error;
};

nlohmann::json to_json(const RiskEstimate& r);

using Classifier = std::function<Label(std::span<const double>)>;

/// Mean of eta_(1)(X) - eta_h(X)(X) over M draws X ~ P_X.
RiskEstimate excess_risk_mc(const Classifier& h, const DistributionSpec& spec, std::uint64_t m,
                            Rng& rng);

/// Exact excess risk of a cellwise-constant classifier. Throws
/// UnsupportedSpecError when the family has no closed-form cell risks.
RiskEstimate excess_risk_exact(const CellwiseClassifier& h, const DistributionSpec& spec);

/// Contribution of each cell of the level-`level` partition to the exact
/// excess risk of h, in partition order.
std::vector<double> risk_by_cell(const CellwiseClassifier& h, const DistributionSpec& spec, int level);

struct RateExponents {
  double passive_strong_density = 0.0;
  double active_sharp = 0.0;
  double active_general = 0.0;
  double passive_general = 0.0;
};

nlohmann::json to_json(const RateExponents& e);

RateExponents theoretical_exponents(double alpha, double beta, double beta_sharp, int dim);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_se = 0.0;
  std::vector<std::pair<double, double>> points;  // (n, risk) actually used
  std::size_t dropped_zero = 0;
};

nlohmann::json to_json(const RateFit& f);

/// Least squares of ln(risk) on ln(n). Zero risks are dropped and counted;
/// fewer than three usable points raise std::domain_error.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

}  // namespace margin_active
