#include "margin_active/risk.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "margin_active/stats.hpp"

namespace margin_active {

nlohmann::json to_json(const RiskEstimate& r) {
  nlohmann::json j{{"value", r.value}, {"method", r.method}};
  if (r.method == "monte-carlo") j["mc_points"] = r.mc_points;
  if (r.standard_error) j["standard_error"] = *r.standard_error;
  return j;
}

RiskEstimate excess_risk_mc(const Classifier& h, const DistributionSpec& spec, std::uint64_t m, Rng& rng) {
  if (m == 0) throw std::domain_error("excess_risk_mc: need at least one point");
  Point x(spec.dim());
  std::vector<double> eta(spec.num_labels());
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    spec.sample_x(rng, x);
    spec.eta(x, eta);
    const double top = *std::max_element(eta.begin(), eta.end());
    const double v = top - eta[h(x)];
    sum += v;
    sum_sq += v * v;
  }
  const auto n = static_cast<double>(m);
  const double mean = sum / n;
  double se = 0.0;
  if (m > 1) se = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0) / n);
  return {std::max(mean, 0.0), "monte-carlo", m, se};
}

RiskEstimate excess_risk_exact(const CellwiseClassifier& h, const DistributionSpec& spec) {
  const auto& part = h.partition();
  double total = 0.0;
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    const auto v = spec.cell_excess_risk(part.cell(i), h.at_index(i));
    if (!v) throw UnsupportedSpecError("spec '" + spec.id() + "' has no exact cell risks");
    total += *v;
  }
  return {std::max(total, 0.0), "exact", 0, std::nullopt};
}

std::vector<double> risk_by_cell(const CellwiseClassifier& h, const DistributionSpec& spec, int level) {
  if (level < 0) throw std::domain_error("risk_by_cell: negative level");
  const DyadicPartition coarse(level, h.dim());
  const DyadicPartition common(std::max(level, h.level()), h.dim());
  std::vector<double> out(coarse.size(), 0.0);
  for (std::uint64_t i = 0; i < common.size(); ++i) {
    const Cell c = common.cell(i);
    const Label y = h.at_index(h.partition().index_of(ancestor(c, h.level())));
    const auto v = spec.cell_excess_risk(c, y);
    if (!v) throw UnsupportedSpecError("spec '" + spec.id() + "' has no exact cell risks");
    out[coarse.index_of(ancestor(c, level))] += *v;
  }
  return out;
}

nlohmann::json to_json(const RateExponents& e) {
  return {{"passive_strong_density", e.passive_strong_density},
          {"active_sharp", e.active_sharp},
          {"active_general", e.active_general},
          {"passive_general", e.passive_general}};
}

RateExponents theoretical_exponents(double alpha, double beta, double beta_sharp, int dim) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("theoretical_exponents: alpha must be in (0,1]");
  if (beta < 0.0 || beta_sharp < 0.0) throw std::domain_error("theoretical_exponents: negative margin exponent");
  if (dim < 1) throw std::domain_error("theoretical_exponents: dim must be positive");
  if (alpha * beta_sharp > dim) throw std::domain_error("theoretical_exponents: requires alpha * beta' <= d");
  const double d = dim;
  RateExponents e;
  e.passive_strong_density = alpha * (beta + 1.0) / (2.0 * alpha + d);
  e.active_sharp = alpha * (beta_sharp + 1.0) / (2.0 * alpha + d - alpha * beta_sharp);
  e.active_general = e.passive_strong_density;
  e.passive_general = alpha * (beta + 1.0) / (2.0 * alpha + d + alpha * beta);
  return e;
}

nlohmann::json to_json(const RateFit& f) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [n, r] : f.points) pts.push_back({n, r});
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"residual_se", f.residual_se},
          {"points", pts},
          {"dropped_zero", f.dropped_zero}};
}

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  RateFit fit;
  std::vector<double> lx, ly;
  std::set<double> seen;
  for (const auto& [n, risk] : points) {
    if (!(n > 0.0)) throw std::domain_error("fit_rate: budgets must be positive");
    if (risk < 0.0) throw std::domain_error("fit_rate: negative risk");
    if (risk == 0.0) {
      ++fit.dropped_zero;
      continue;
    }
    if (!seen.insert(n).second) throw std::domain_error("fit_rate: budgets must be distinct");
    fit.points.emplace_back(n, risk);
    lx.push_back(std::log(n));
    ly.push_back(std::log(risk));
  }
  if (fit.points.size() < 3) throw std::domain_error("fit_rate: fewer than three positive-risk points");
  const auto line = ols(lx, ly);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.residual_se = line.residual_se;
  return fit;
}

}  // namespace margin_active
