#include "margin_active/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "margin_active/stats.hpp"

namespace margin_active {

namespace {

constexpr std::size_t kLatticeCap = 4096;
constexpr std::size_t kRandomPoints = 1000;
constexpr std::size_t kClosePairs = 2000;
constexpr double kHolderSlack = 1e-9;
// eta differences this small are rounding noise from evaluating eta
constexpr double kEtaRounding = 16.0 * std::numeric_limits<double>::epsilon();

double sup_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

struct MarginSample {
  std::vector<Point> points;
  std::vector<double> soft;
  std::vector<double> sharp;
};

MarginSample sample_margins(const DistributionSpec& spec, std::uint64_t mc_n, Rng& rng) {
  MarginSample s;
  s.points.reserve(mc_n);
  s.soft.reserve(mc_n);
  s.sharp.reserve(mc_n);
  Point x(spec.dim());
  std::vector<double> eta(spec.num_labels());
  for (std::uint64_t i = 0; i < mc_n; ++i) {
    spec.sample_x(rng, x);
    spec.eta(x, eta);
    s.points.push_back(x);
    s.soft.push_back(soft_margin(eta));
    s.sharp.push_back(sharp_margin(eta));
  }
  return s;
}

struct CdfCheck {
  bool pass = true;
  double measured_constant = 0.0;
  std::optional<double> measured_exponent;
  nlohmann::json curve = nlohmann::json::array();
  std::vector<Point> witnesses;
};

// For each tau: p = frac{margin <= tau}; pass iff p <= offset + c tau^beta + 3 se.
CdfCheck check_cdf(const MarginSample& s, const std::vector<double>& margins, double offset,
                   double c, double beta, const std::vector<double>& taus) {
  CdfCheck out;
  const auto n = static_cast<double>(margins.size());
  std::vector<double> log_tau, log_p;
  for (double tau : taus) {
    std::size_t hits = 0;
    std::size_t witness = margins.size();
    for (std::size_t i = 0; i < margins.size(); ++i) {
      if (margins[i] <= tau) {
        ++hits;
        if (witness == margins.size() || margins[i] < margins[witness]) witness = i;
      }
    }
    const double p = static_cast<double>(hits) / n;
    const double se = std::sqrt(p * (1.0 - p) / n);
    const double bound = offset + c * std::pow(tau, beta);
    const bool ok = p <= bound + 3.0 * se;
    if (!ok) {
      out.pass = false;
      if (witness < margins.size()) out.witnesses.push_back(s.points[witness]);
    }
    const double excess = std::max(p - offset, 0.0);
    out.measured_constant = std::max(out.measured_constant, excess / std::pow(tau, beta));
    if (p > 0.0) {
      log_tau.push_back(std::log(tau));
      log_p.push_back(std::log(p));
    }
    out.curve.push_back({{"tau", tau}, {"frequency", p}, {"se", se}, {"bound", bound}, {"ok", ok}});
  }
  if (log_tau.size() >= 2) {
    try {
      out.measured_exponent = ols(log_tau, log_p).slope;
    } catch (const std::domain_error&) {
    }
  }
  return out;
}

void check_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw std::domain_error("margin check: tau grid must be nonempty");
  for (double t : taus) {
    if (!(t > 0.0)) throw std::domain_error("margin check: tau values must be positive");
  }
}

}  // namespace

nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json j{{"condition", r.condition},
                   {"parameters", r.parameters},
                   {"grid_size", r.grid_size},
                   {"witnesses", r.witnesses},
                   {"pass", r.pass},
                   {"measured_constant", r.measured_constant},
                   {"seed", r.seed},
                   {"details", r.details}};
  j["measured_exponent"] = r.measured_exponent ? nlohmann::json(*r.measured_exponent) : nlohmann::json();
  return j;
}

ConditionReport check_holder(const DistributionSpec& spec, double lambda, double alpha, int grid_n,
                             std::uint64_t seed) {
  if (grid_n < 2) throw std::domain_error("check_holder: grid_n must be at least 2");
  const int d = spec.dim();
  Rng rng(seed);

  // lattice: per-axis count limited so the full lattice stays below the cap
  std::size_t per_axis = static_cast<std::size_t>(grid_n);
  while (per_axis > 2 && std::pow(static_cast<double>(per_axis), d) > static_cast<double>(kLatticeCap)) {
    --per_axis;
  }
  std::vector<Point> pts;
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
    pts.push_back(std::move(p));
    int axis = d - 1;
    while (axis >= 0 && ++idx[axis] == per_axis) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  const std::size_t lattice_size = pts.size();
  for (std::size_t k = 0; k < kRandomPoints; ++k) {
    Point p(d);
    for (auto& v : p) v = rng.uniform();
    pts.push_back(std::move(p));
  }

  std::vector<std::vector<double>> etas;
  etas.reserve(pts.size());
  for (const auto& p : pts) etas.push_back(spec.eta(p));

  double worst = 0.0;
  std::pair<Point, Point> witness;
  std::uint64_t pairs = 0;
  auto consider = [&](const Point& a, const std::vector<double>& ea, const Point& b,
                      const std::vector<double>& eb) {
    const double dx = sup_distance(a, b);
    if (dx == 0.0) return;
    ++pairs;
    const double ratio = std::max(sup_distance(ea, eb) - kEtaRounding, 0.0) / std::pow(dx, alpha);
    if (ratio > worst) {
      worst = ratio;
      witness = {a, b};
    }
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) consider(pts[i], etas[i], pts[j], etas[j]);
  }
  // close pairs probe local slopes at scales the lattice cannot resolve
  for (std::size_t k = 0; k < kClosePairs; ++k) {
    Point a(d), b(d);
    const double scale = std::pow(10.0, -1.0 - 4.0 * rng.uniform());
    for (int i = 0; i < d; ++i) {
      a[i] = rng.uniform();
      b[i] = clamp01(a[i] + scale * (2.0 * rng.uniform() - 1.0));
    }
    consider(a, spec.eta(a), b, spec.eta(b));
  }

  ConditionReport rep;
  rep.condition = "holder";
  rep.parameters = {{"lambda", lambda}, {"alpha", alpha}, {"grid_n", grid_n}};
  rep.grid_size = pts.size();
  rep.seed = seed;
  rep.measured_constant = worst;
  rep.pass = worst <= lambda * (1.0 + kHolderSlack) + kHolderSlack;
  if (!rep.pass) rep.witnesses = {witness.first, witness.second};
  rep.details = {{"pairs", pairs}, {"lattice_points", lattice_size}, {"max_ratio", worst}};
  return rep;
}

ConditionReport check_tmc(const DistributionSpec& spec, double beta, double c_beta,
                          const std::vector<double>& tau_grid, std::uint64_t mc_n, std::uint64_t seed) {
  check_taus(tau_grid);
  if (mc_n == 0) throw std::domain_error("check_tmc: mc_n must be positive");
  Rng rng(seed);
  const auto s = sample_margins(spec, mc_n, rng);
  const auto soft = check_cdf(s, s.soft, 0.0, c_beta, beta, tau_grid);
  // informational: the stricter condition on the sharp margin, which forces
  // a unique Bayes label almost everywhere
  const auto sharp = check_cdf(s, s.sharp, 0.0, c_beta, beta, tau_grid);

  ConditionReport rep;
  rep.condition = "tmc";
  rep.parameters = {{"beta", beta}, {"c_beta", c_beta}, {"tau_grid", tau_grid}, {"mc_n", mc_n}};
  rep.grid_size = mc_n;
  rep.seed = seed;
  rep.pass = soft.pass;
  rep.witnesses = soft.witnesses;
  rep.measured_constant = soft.measured_constant;
  rep.measured_exponent = soft.measured_exponent;
  rep.details = {{"soft_margin_cdf", soft.curve}, {"sharp_margin_condition_holds", sharp.pass},
                 {"sharp_margin_cdf", sharp.curve}};
  return rep;
}

ConditionReport check_rmc(const DistributionSpec& spec, double eps, double beta, double beta_sharp,
                          double c_beta, const std::vector<double>& tau_grid, std::uint64_t mc_n,
                          std::uint64_t seed) {
  check_taus(tau_grid);
  if (beta_sharp < beta) throw std::domain_error("check_rmc: requires beta' >= beta");
  if (mc_n == 0) throw std::domain_error("check_rmc: mc_n must be positive");
  Rng rng(seed);
  const auto s = sample_margins(spec, mc_n, rng);
  const auto soft = check_cdf(s, s.soft, 0.0, c_beta, beta, tau_grid);
  const auto sharp = check_cdf(s, s.sharp, eps, c_beta, beta_sharp, tau_grid);
  const auto ties = static_cast<double>(std::count(s.sharp.begin(), s.sharp.end(), 0.0));

  ConditionReport rep;
  rep.condition = "rmc";
  rep.parameters = {{"eps", eps},       {"beta", beta},         {"beta_sharp", beta_sharp},
                    {"c_beta", c_beta}, {"tau_grid", tau_grid}, {"mc_n", mc_n}};
  rep.grid_size = mc_n;
  rep.seed = seed;
  rep.pass = soft.pass && sharp.pass;
  rep.witnesses = soft.witnesses;
  rep.witnesses.insert(rep.witnesses.end(), sharp.witnesses.begin(), sharp.witnesses.end());
  rep.measured_constant = std::max(soft.measured_constant, sharp.measured_constant);
  rep.measured_exponent = sharp.measured_exponent;
  const double eps_hat = ties / static_cast<double>(mc_n);
  rep.details = {{"measured_eps", eps_hat},
                 {"measured_eps_se", std::sqrt(eps_hat * (1.0 - eps_hat) / static_cast<double>(mc_n))},
                 {"soft_pass", soft.pass},
                 {"sharp_pass", sharp.pass},
                 {"soft_margin_cdf", soft.curve},
                 {"sharp_margin_cdf", sharp.curve}};
  return rep;
}

ConditionReport check_strong_density(const DistributionSpec& spec, double c_d, int max_level,
                                     std::uint64_t mc_n, std::uint64_t seed) {
  if (max_level < 1) throw std::domain_error("check_strong_density: max_level must be at least 1");
  const int d = spec.dim();
  ConditionReport rep;
  rep.condition = "strong_density";
  rep.parameters = {{"c_d", c_d}, {"max_level", max_level}, {"mc_n", mc_n}};
  rep.seed = seed;
  rep.pass = true;
  rep.measured_constant = std::numeric_limits<double>::infinity();

  const bool exact = spec.region_mass(Cell{0, std::vector<std::int64_t>(d, 0)}).has_value();
  std::vector<Point> sample;
  if (!exact) {
    if (mc_n == 0) throw std::domain_error("check_strong_density: mc_n must be positive");
    Rng rng(seed);
    sample.resize(mc_n, Point(d));
    for (auto& p : sample) spec.sample_x(rng, p);
  }

  nlohmann::json levels = nlohmann::json::array();
  for (int level = 1; level <= max_level; ++level) {
    const DyadicPartition part(level, d);
    const double cell_vol = std::pow(side_length(level), d);
    const double target = c_d * cell_vol;
    std::vector<double> mass(part.size(), 0.0);
    if (exact) {
      for (std::uint64_t i = 0; i < part.size(); ++i) mass[i] = *spec.region_mass(part.cell(i));
    } else {
      for (const auto& p : sample) mass[part.index_of_point(p)] += 1.0;
      for (auto& m : mass) m /= static_cast<double>(mc_n);
    }
    const double tol = exact ? 1e-12 * cell_vol
                             : 3.0 * std::sqrt(target * (1.0 - std::min(target, 1.0)) / static_cast<double>(mc_n));
    std::uint64_t positive = 0, violations = 0;
    for (std::uint64_t i = 0; i < part.size(); ++i) {
      if (mass[i] <= 0.0) continue;  // zero-mass cells are outside the condition
      ++positive;
      rep.measured_constant = std::min(rep.measured_constant, mass[i] / cell_vol);
      if (mass[i] < target - tol) {
        ++violations;
        if (rep.witnesses.size() < 8) rep.witnesses.push_back(barycenter(part.cell(i)));
      }
    }
    if (violations) rep.pass = false;
    rep.grid_size += part.size();
    levels.push_back({{"level", level}, {"cells", part.size()}, {"positive_cells", positive},
                      {"violations", violations}});
  }
  rep.details = {{"method", exact ? "exact" : "monte-carlo"}, {"levels", levels}};
  return rep;
}

}  // namespace margin_active
