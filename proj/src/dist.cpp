#include "margin_active/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "margin_active/config_error.hpp"

namespace margin_active {

namespace {

constexpr int kRejectionCap = 10000;

void check_probability_vector(std::span<const double> eta, const char* who) {
  if (eta.size() < 2 || eta.size() > static_cast<std::size_t>(kMaxLabels)) {
    throw std::domain_error(std::string(who) + ": label count must be in [2, 16]");
  }
  double sum = 0.0;
  for (double v : eta) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(who) + ": eta outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::domain_error(std::string(who) + ": eta does not sum to 1");
}

double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

// Sup-norm distance from x to the barycenter of its level-`level` cell.
double distance_to_barycenter(std::span<const double> x, int level) {
  const double r = side_length(level);
  const std::int64_t last = (std::int64_t{1} << level) - 1;
  double dist = 0.0;
  for (double xi : x) {
    auto c = std::min(static_cast<std::int64_t>(std::floor(std::ldexp(xi, level))), last);
    dist = std::max(dist, std::abs(xi - (static_cast<double>(c) + 0.5) * r));
  }
  return dist;
}

void check_point(std::span<const double> x, int dim) {
  if (static_cast<int>(x.size()) != dim) throw std::domain_error("point has wrong dimension");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("point outside [0,1]^d");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> DistributionSpec::eta(std::span<const double> x) const {
  std::vector<double> out(num_labels());
  eta(x, out);
  return out;
}

bool DistributionSpec::sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const {
  const double r = cell.side();
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    for (int i = 0; i < cell.dim(); ++i) {
      out[i] = (static_cast<double>(cell.coords[i]) + rng.uniform()) * r;
    }
    if (in_support(out)) return true;
  }
  return false;
}

std::optional<double> DistributionSpec::region_mass(const Cell&) const { return std::nullopt; }
std::optional<double> DistributionSpec::cell_excess_risk(const Cell&, Label) const {
  return std::nullopt;
}
std::optional<LabelSet> DistributionSpec::cell_bayes_labels(const Cell&) const {
  return std::nullopt;
}
std::optional<std::vector<double>> DistributionSpec::cell_mean_eta(const Cell&) const {
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Margins

double soft_margin(std::span<const double> eta) {
  const double top = max_of(eta);
  double runner_up = -std::numeric_limits<double>::infinity();
  for (double v : eta) {
    if (v != top) runner_up = std::max(runner_up, v);
  }
  if (runner_up == -std::numeric_limits<double>::infinity()) {
    return std::numeric_limits<double>::infinity();
  }
  return top - runner_up;
}

double sharp_margin(std::span<const double> eta) {
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double v : eta) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

double soft_margin(const DistributionSpec& spec, std::span<const double> x) {
  return soft_margin(spec.eta(x));
}

double sharp_margin(const DistributionSpec& spec, std::span<const double> x) {
  return sharp_margin(spec.eta(x));
}

LabelSet bayes_labels(std::span<const double> eta) {
  const double top = max_of(eta);
  LabelSet s;
  for (std::size_t y = 0; y < eta.size(); ++y) {
    if (eta[y] == top) s.insert(static_cast<Label>(y));
  }
  return s;
}

// ---------------------------------------------------------------------------
// ConstantSpec

ConstantSpec::ConstantSpec(int dim, std::vector<double> eta) : dim_(dim), eta_(std::move(eta)) {
  if (dim < 1) throw std::domain_error("ConstantSpec: dim must be positive");
  check_probability_vector(eta_, "ConstantSpec");
}

std::string ConstantSpec::id() const { return "constant"; }

void ConstantSpec::eta(std::span<const double>, std::span<double> out) const {
  std::copy(eta_.begin(), eta_.end(), out.begin());
}

void ConstantSpec::sample_x(Rng& rng, std::span<double> out) const {
  for (int i = 0; i < dim_; ++i) out[i] = rng.uniform();
}

bool ConstantSpec::in_support(std::span<const double> x) const {
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

bool ConstantSpec::sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const {
  const double r = cell.side();
  for (int i = 0; i < dim_; ++i) out[i] = (static_cast<double>(cell.coords[i]) + rng.uniform()) * r;
  return true;
}

std::optional<double> ConstantSpec::region_mass(const Cell& cell) const {
  return std::pow(cell.side(), dim_);
}

std::optional<double> ConstantSpec::cell_excess_risk(const Cell& cell, Label label) const {
  return (max_of(eta_) - eta_.at(label)) * std::pow(cell.side(), dim_);
}

std::optional<LabelSet> ConstantSpec::cell_bayes_labels(const Cell&) const {
  return bayes_labels(eta_);
}

std::optional<std::vector<double>> ConstantSpec::cell_mean_eta(const Cell&) const { return eta_; }

nlohmann::json ConstantSpec::describe() const {
  return {{"family", "constant"}, {"dim", dim_}, {"eta", eta_}};
}

// ---------------------------------------------------------------------------
// RampSpec

RampSpec::RampSpec(Params p) : p_(p) {
  if (p_.dim < 1) throw std::domain_error("RampSpec: dim must be positive");
  if (p_.num_labels < 2 || p_.num_labels > kMaxLabels) {
    throw std::domain_error("RampSpec: label count must be in [2, 16]");
  }
  if (!(p_.crossing >= 0.0 && p_.crossing <= 1.0)) throw std::domain_error("RampSpec: crossing outside [0,1]");
  if (!(p_.slope >= 0.0)) throw std::domain_error("RampSpec: slope must be nonnegative");
  if (!(p_.power > 0.0)) throw std::domain_error("RampSpec: power must be positive");
  if (!(p_.floor >= 0.0)) throw std::domain_error("RampSpec: floor must be nonnegative");
  base_ = (1.0 - (p_.num_labels - 2) * p_.floor) / 2.0;
  if (p_.floor > base_) throw std::domain_error("RampSpec: floor exceeds the leading labels' base level");
  const double reach = std::max(p_.crossing, 1.0 - p_.crossing);
  if (p_.slope * std::pow(reach, p_.power) > base_ + 1e-12) {
    throw std::domain_error("RampSpec: slope too large, eta would leave [0,1]");
  }
}

double RampSpec::holder_constant() const {
  if (p_.power <= 1.0) return p_.slope * std::pow(2.0, 1.0 - p_.power);
  return p_.slope * p_.power * std::pow(std::max(p_.crossing, 1.0 - p_.crossing), p_.power - 1.0);
}

std::string RampSpec::id() const { return "ramp"; }

double RampSpec::g(double t) const {
  const double u = t - p_.crossing;
  if (u == 0.0) return 0.0;
  const double mag = p_.slope * std::pow(std::abs(u), p_.power);
  return u > 0 ? mag : -mag;
}

void RampSpec::eta(std::span<const double> x, std::span<double> out) const {
  const double gv = g(x[0]);
  out[0] = base_ + gv;
  out[1] = base_ - gv;
  for (int y = 2; y < p_.num_labels; ++y) out[y] = p_.floor;
}

void RampSpec::sample_x(Rng& rng, std::span<double> out) const {
  for (int i = 0; i < p_.dim; ++i) out[i] = rng.uniform();
}

bool RampSpec::in_support(std::span<const double> x) const {
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

bool RampSpec::sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const {
  const double r = cell.side();
  for (int i = 0; i < p_.dim; ++i) out[i] = (static_cast<double>(cell.coords[i]) + rng.uniform()) * r;
  return true;
}

std::optional<double> RampSpec::region_mass(const Cell& cell) const {
  return std::pow(cell.side(), p_.dim);
}

double RampSpec::abs_power_integral(double a, double b) const {
  // antiderivative of |t - c|^p is sign(t - c) |t - c|^(p+1) / (p+1)
  auto F = [this](double t) {
    const double u = t - p_.crossing;
    const double mag = std::pow(std::abs(u), p_.power + 1.0) / (p_.power + 1.0);
    return u >= 0 ? mag : -mag;
  };
  return F(b) - F(a);
}

double RampSpec::signed_part_integral(double a, double b, int sign) const {
  if (sign > 0) a = std::max(a, p_.crossing);
  else b = std::min(b, p_.crossing);
  if (b <= a) return 0.0;
  return p_.slope * abs_power_integral(a, b);
}

std::optional<double> RampSpec::cell_excess_risk(const Cell& cell, Label label) const {
  const double r = cell.side();
  const double a = static_cast<double>(cell.coords[0]) * r;
  const double b = a + r;
  const double cross_section = std::pow(r, p_.dim - 1);
  double integral = 0.0;
  if (label == 0) {
    integral = 2.0 * signed_part_integral(a, b, -1);
  } else if (label == 1) {
    integral = 2.0 * signed_part_integral(a, b, +1);
  } else {
    integral = (base_ - p_.floor) * r + signed_part_integral(a, b, +1) + signed_part_integral(a, b, -1);
  }
  return integral * cross_section;
}

std::optional<LabelSet> RampSpec::cell_bayes_labels(const Cell& cell) const {
  const double r = cell.side();
  const double a = static_cast<double>(cell.coords[0]) * r;
  const double b = a + r;
  const bool last = cell.coords[0] == (std::int64_t{1} << cell.level) - 1;
  LabelSet s;
  if (p_.slope == 0.0) {
    s.insert(0);
    s.insert(1);
    if (p_.floor == base_) s = LabelSet::all(p_.num_labels);
    return s;
  }
  if (b > p_.crossing || (last && p_.crossing == 1.0)) s.insert(0);
  if (a < p_.crossing) s.insert(1);
  const bool hits_crossing = a <= p_.crossing && (p_.crossing < b || (last && p_.crossing == 1.0));
  if (hits_crossing) {
    s.insert(0);
    s.insert(1);
    if (p_.floor == base_) s = LabelSet::all(p_.num_labels);
  }
  return s;
}

std::optional<std::vector<double>> RampSpec::cell_mean_eta(const Cell& cell) const {
  const double r = cell.side();
  const double a = static_cast<double>(cell.coords[0]) * r;
  const double b = a + r;
  const double mean_g = (signed_part_integral(a, b, +1) - signed_part_integral(a, b, -1)) / r;
  std::vector<double> out(p_.num_labels, p_.floor);
  out[0] = base_ + mean_g;
  out[1] = base_ - mean_g;
  return out;
}

nlohmann::json RampSpec::describe() const {
  return {{"family", "ramp"},        {"dim", p_.dim},     {"labels", p_.num_labels},
          {"crossing", p_.crossing}, {"slope", p_.slope}, {"power", p_.power},
          {"floor", p_.floor}};
}

// ---------------------------------------------------------------------------
// RegionSpec

RegionSpec::RegionSpec(int dim, int num_labels, std::vector<Region> regions, std::string name)
    : dim_(dim), num_labels_(num_labels), regions_(std::move(regions)), name_(std::move(name)) {
  if (dim < 1) throw std::domain_error("RegionSpec: dim must be positive");
  if (num_labels < 2 || num_labels > kMaxLabels) throw std::domain_error("RegionSpec: label count must be in [2, 16]");
  if (regions_.empty()) throw std::domain_error("RegionSpec: no regions");
  double total = 0.0;
  for (const auto& reg : regions_) {
    if (static_cast<int>(reg.lo.size()) != dim || static_cast<int>(reg.hi.size()) != dim) {
      throw std::domain_error("RegionSpec: region '" + reg.name + "' has wrong dimension");
    }
    for (int i = 0; i < dim; ++i) {
      if (!(0.0 <= reg.lo[i] && reg.lo[i] < reg.hi[i] && reg.hi[i] <= 1.0)) {
        throw std::domain_error("RegionSpec: region '" + reg.name + "' is not a box inside [0,1]^d");
      }
    }
    if (static_cast<int>(reg.eta.size()) != num_labels) {
      throw std::domain_error("RegionSpec: region '" + reg.name + "' eta has wrong length");
    }
    check_probability_vector(reg.eta, "RegionSpec");
    if (!(reg.mass >= 0.0)) throw std::domain_error("RegionSpec: negative mass");
    total += reg.mass;
    cumulative_mass_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::domain_error("RegionSpec: region masses must sum to 1");
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    for (std::size_t j = i + 1; j < regions_.size(); ++j) {
      bool overlap = true;
      for (int k = 0; k < dim; ++k) {
        if (regions_[i].hi[k] <= regions_[j].lo[k] || regions_[j].hi[k] <= regions_[i].lo[k]) overlap = false;
      }
      if (overlap) throw std::domain_error("RegionSpec: regions overlap");
    }
  }
}

int RegionSpec::find_region(std::span<const double> x) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& reg = regions_[i];
    bool inside = true;
    for (int k = 0; k < dim_ && inside; ++k) {
      const bool upper_ok = x[k] < reg.hi[k] || (reg.hi[k] == 1.0 && x[k] == 1.0);
      inside = x[k] >= reg.lo[k] && upper_ok;
    }
    if (inside) return static_cast<int>(i);
  }
  return -1;
}

void RegionSpec::eta(std::span<const double> x, std::span<double> out) const {
  const int idx = find_region(x);
  if (idx < 0) {
    std::fill(out.begin(), out.begin() + num_labels_, 1.0 / num_labels_);
    return;
  }
  std::copy(regions_[idx].eta.begin(), regions_[idx].eta.end(), out.begin());
}

void RegionSpec::sample_x(Rng& rng, std::span<double> out) const {
  const double u = rng.uniform() * cumulative_mass_.back();
  auto it = std::upper_bound(cumulative_mass_.begin(), cumulative_mass_.end(), u);
  auto idx = static_cast<std::size_t>(std::distance(cumulative_mass_.begin(), it));
  idx = std::min(idx, regions_.size() - 1);
  while (regions_[idx].mass <= 0.0) idx = (idx + 1) % regions_.size();
  const auto& reg = regions_[idx];
  for (int k = 0; k < dim_; ++k) out[k] = rng.uniform(reg.lo[k], reg.hi[k]);
}

bool RegionSpec::in_support(std::span<const double> x) const {
  const int idx = find_region(x);
  return idx >= 0 && regions_[idx].mass > 0.0;
}

bool RegionSpec::sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const {
  // Lebesgue-uniform on cell ∩ support: pick a region by overlap volume.
  std::vector<double> weights(regions_.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].mass <= 0.0) continue;
    weights[i] = overlap_volume(cell, regions_[i].lo, regions_[i].hi);
    total += weights[i];
  }
  if (total <= 0.0) return false;
  double u = rng.uniform() * total;
  std::size_t idx = 0;
  for (; idx + 1 < weights.size(); ++idx) {
    if (u < weights[idx]) break;
    u -= weights[idx];
  }
  while (weights[idx] <= 0.0) --idx;
  const auto& reg = regions_[idx];
  const double r = cell.side();
  for (int k = 0; k < dim_; ++k) {
    const double lo = std::max(reg.lo[k], static_cast<double>(cell.coords[k]) * r);
    const double hi = std::min(reg.hi[k], static_cast<double>(cell.coords[k] + 1) * r);
    out[k] = rng.uniform(lo, hi);
  }
  return true;
}

std::optional<double> RegionSpec::region_mass(const Cell& cell) const {
  double mass = 0.0;
  for (const auto& reg : regions_) {
    double vol = 1.0;
    for (int k = 0; k < dim_; ++k) vol *= reg.hi[k] - reg.lo[k];
    mass += reg.mass * overlap_volume(cell, reg.lo, reg.hi) / vol;
  }
  return mass;
}

std::optional<double> RegionSpec::cell_excess_risk(const Cell& cell, Label label) const {
  double risk = 0.0;
  for (const auto& reg : regions_) {
    double vol = 1.0;
    for (int k = 0; k < dim_; ++k) vol *= reg.hi[k] - reg.lo[k];
    const double m = reg.mass * overlap_volume(cell, reg.lo, reg.hi) / vol;
    risk += m * (max_of(reg.eta) - reg.eta.at(label));
  }
  return risk;
}

std::optional<LabelSet> RegionSpec::cell_bayes_labels(const Cell& cell) const {
  LabelSet s;
  for (const auto& reg : regions_) {
    if (reg.mass > 0.0 && overlap_volume(cell, reg.lo, reg.hi) > 0.0) s = s | bayes_labels(reg.eta);
  }
  return s;
}

std::optional<std::vector<double>> RegionSpec::cell_mean_eta(const Cell& cell) const {
  std::vector<double> acc(num_labels_, 0.0);
  double total = 0.0;
  for (const auto& reg : regions_) {
    if (reg.mass <= 0.0) continue;
    const double w = overlap_volume(cell, reg.lo, reg.hi);
    if (w <= 0.0) continue;
    total += w;
    for (int y = 0; y < num_labels_; ++y) acc[y] += w * reg.eta[y];
  }
  if (total <= 0.0) return std::nullopt;
  for (auto& v : acc) v /= total;
  return acc;
}

nlohmann::json RegionSpec::describe() const {
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& reg : regions_) {
    regs.push_back({{"name", reg.name}, {"lo", reg.lo}, {"hi", reg.hi}, {"mass", reg.mass}, {"eta", reg.eta}});
  }
  return {{"family", "regions"}, {"name", name_}, {"dim", dim_}, {"labels", num_labels_}, {"regions", regs}};
}

double RegionSpec::non_unique_bayes_mass() const {
  double m = 0.0;
  for (const auto& reg : regions_) {
    if (bayes_labels(reg.eta).size() > 1) m += reg.mass;
  }
  return m;
}

std::shared_ptr<RegionSpec> make_figure1_spec(const Figure1Params& p) {
  const double total = p.all_tie_mass + p.top_two_tie_mass + p.separated_mass;
  if (std::abs(total - 1.0) > 1e-9) throw std::domain_error("figure1: masses must sum to 1");
  if (!(p.tie_level > 1.0 / 3.0 && p.tie_level <= 0.5)) {
    throw std::domain_error("figure1: tie_level must lie in (1/3, 1/2]");
  }
  const double third = 1.0 - p.separated_top - p.separated_second;
  if (!(p.separated_top > p.separated_second && p.separated_second > third && third >= 0.0)) {
    throw std::domain_error("figure1: separated region needs eta_1 > eta_2 > eta_3 >= 0");
  }
  if (!(p.spacing >= 0.0 && p.spacing < 0.5)) throw std::domain_error("figure1: bad spacing");
  const double usable = 1.0 - 2.0 * p.spacing;
  std::vector<RegionSpec::Region> regions;
  double cursor = 0.0;
  auto add = [&](std::string name, double mass, std::vector<double> eta) {
    const double width = usable * mass;
    if (mass > 0.0) regions.push_back({std::move(name), {cursor}, {cursor + width}, mass, std::move(eta)});
    cursor += width + p.spacing;
  };
  add("all_tie", p.all_tie_mass, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  add("top_two_tie", p.top_two_tie_mass, {1.0 - 2.0 * p.tie_level, p.tie_level, p.tie_level});
  add("separated", p.separated_mass, {third, p.separated_second, p.separated_top});
  regions.back().hi[0] = std::min(regions.back().hi[0], 1.0);
  return std::make_shared<RegionSpec>(1, 3, std::move(regions), "figure1");
}

// ---------------------------------------------------------------------------
// Lower-bound construction

double LowerBoundParams::bump_height() const { return c_eta() * std::pow(r(), alpha); }
double LowerBoundParams::z_probability() const { return std::pow(r(), alpha * beta); }

LowerBoundParams make_lower_bound_params(std::int64_t n, double alpha, double beta, double lambda,
                                         int dim) {
  if (n < 1) throw std::domain_error("lower bound: budget must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("lower bound: alpha must be in (0,1]");
  if (!(lambda > 0.0)) throw std::domain_error("lower bound: lambda must be positive");
  if (!(beta >= 0.0)) throw std::domain_error("lower bound: beta must be nonnegative");
  if (dim < 1) throw std::domain_error("lower bound: dim must be positive");
  if (alpha * beta > dim) throw std::domain_error("lower bound: requires alpha * beta <= d");
  const double c1 = 64.0 / (lambda * lambda);
  const double raw = std::pow(c1 / static_cast<double>(n), 1.0 / (2.0 * alpha + dim));
  // round down to 2^-k, with a little slack at exact powers of two
  int level = static_cast<int>(std::ceil(-std::log2(raw) - 1e-9));
  level = std::max(level, 0);
  LowerBoundParams p{n, alpha, lambda, beta, dim, level};
  if (2.0 * p.bump_height() > 1.0) {
    throw std::domain_error("lower bound: lambda r^alpha > 4 puts eta outside [0,1]");
  }
  return p;
}

ZSigmaAssignment sample_zsigma(const LowerBoundParams& params, Rng& rng) {
  const DyadicPartition part(params.level, params.dim);
  ZSigmaAssignment zs{params.level, params.dim, std::vector<std::uint8_t>(part.size()),
                      std::vector<std::int8_t>(part.size())};
  const double pz = params.z_probability();
  for (std::uint64_t i = 0; i < part.size(); ++i) {
    zs.z[i] = rng.bernoulli(pz) ? 1 : 0;
    zs.sigma[i] = static_cast<std::int8_t>(rng.sign());
  }
  return zs;
}

bool check_theta_beta(const ZSigmaAssignment& zs, const LowerBoundParams& params, double c_beta) {
  const auto ones = std::count(zs.z.begin(), zs.z.end(), std::uint8_t{1});
  const double mass = std::pow(params.r(), params.dim) * static_cast<double>(ones);
  return mass <= c_beta * params.z_probability();
}

double lb_density(const LowerBoundParams& params, std::span<const double> x) {
  check_point(x, params.dim);
  return distance_to_barycenter(x, params.level) < params.r() / 8.0 ? std::pow(4.0, params.dim) : 0.0;
}

double lb_bump(const LowerBoundParams& params, std::span<const double> x) {
  check_point(x, params.dim);
  const double r = params.r();
  const double ra = std::pow(r, params.alpha);
  const double dist = distance_to_barycenter(x, params.level);
  const double ramp = std::max(2.0 * ra - 8.0 * std::pow(r, params.alpha - 1.0) * dist, 0.0);
  return std::min(ramp, ra);
}

double lb_eta(const LowerBoundParams& params, const ZSigmaAssignment& zs, std::span<const double> x) {
  const DyadicPartition part(params.level, params.dim);
  const auto idx = part.index_of_point(x);
  const double phi = lb_bump(params, x);
  return 0.5 + params.c_eta() * zs.z[idx] * zs.sigma[idx] * phi;
}

LowerBoundSpec::LowerBoundSpec(LowerBoundParams params, ZSigmaAssignment zs)
    : params_(params), zs_(std::move(zs)), partition_(params.level, params.dim) {
  if (zs_.level != params_.level || zs_.dim != params_.dim || zs_.z.size() != partition_.size() ||
      zs_.sigma.size() != partition_.size()) {
    throw std::domain_error("LowerBoundSpec: coin vectors do not match the construction partition");
  }
  for (std::size_t i = 0; i < zs_.z.size(); ++i) {
    if (zs_.z[i] > 1 || (zs_.sigma[i] != 1 && zs_.sigma[i] != -1)) {
      throw std::domain_error("LowerBoundSpec: coins must be z in {0,1}, sigma in {-1,+1}");
    }
  }
}

Label LowerBoundSpec::cell_sign_label(std::uint64_t cell_index) const {
  return zs_.sigma.at(cell_index) > 0 ? 1 : 0;
}

std::string LowerBoundSpec::id() const { return "lowerbound"; }

void LowerBoundSpec::eta(std::span<const double> x, std::span<double> out) const {
  const double p1 = lb_eta(params_, zs_, x);
  out[1] = p1;
  out[0] = 1.0 - p1;
}

void LowerBoundSpec::bump_box(std::uint64_t index, std::span<double> lo, std::span<double> hi) const {
  const Cell c = partition_.cell(index);
  const double r = params_.r();
  for (int i = 0; i < params_.dim; ++i) {
    const double center = (static_cast<double>(c.coords[i]) + 0.5) * r;
    lo[i] = center - r / 8.0;
    hi[i] = center + r / 8.0;
  }
}

void LowerBoundSpec::sample_x(Rng& rng, std::span<double> out) const {
  const auto idx = rng.uniform_index(partition_.size());
  std::vector<double> lo(params_.dim), hi(params_.dim);
  bump_box(idx, lo, hi);
  for (int i = 0; i < params_.dim; ++i) out[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform_open();
}

bool LowerBoundSpec::in_support(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != params_.dim) return false;
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return distance_to_barycenter(x, params_.level) < params_.r() / 8.0;
}

template <typename F>
void LowerBoundSpec::for_each_bump_in(const Cell& cell, F&& f) const {
  const double density = std::pow(4.0, params_.dim);
  if (cell.level >= params_.level) {
    const Cell owner = ancestor(cell, params_.level);
    const auto idx = partition_.index_of(owner);
    std::vector<double> lo(params_.dim), hi(params_.dim);
    bump_box(idx, lo, hi);
    const double vol = overlap_volume(cell, lo, hi);
    if (vol > 0.0) f(idx, density * vol, vol);
    return;
  }
  const double bump_vol = std::pow(params_.r() / 4.0, params_.dim);
  for (auto idx : partition_.descendants_of(cell)) f(idx, density * bump_vol, bump_vol);
}

bool LowerBoundSpec::sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const {
  if (cell.level >= params_.level) {
    const auto idx = partition_.index_of(ancestor(cell, params_.level));
    std::vector<double> lo(params_.dim), hi(params_.dim);
    bump_box(idx, lo, hi);
    const double r = cell.side();
    for (int i = 0; i < params_.dim; ++i) {
      const double a = std::max(lo[i], static_cast<double>(cell.coords[i]) * r);
      const double b = std::min(hi[i], static_cast<double>(cell.coords[i] + 1) * r);
      if (b <= a) return false;
      out[i] = a + (b - a) * rng.uniform_open();
    }
    return true;
  }
  // every construction cell inside carries an identical bump
  const auto inside = partition_.descendants_of(cell);
  const auto idx = inside[rng.uniform_index(inside.size())];
  std::vector<double> lo(params_.dim), hi(params_.dim);
  bump_box(idx, lo, hi);
  for (int i = 0; i < params_.dim; ++i) out[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform_open();
  return true;
}

std::optional<double> LowerBoundSpec::region_mass(const Cell& cell) const {
  double mass = 0.0;
  for_each_bump_in(cell, [&](std::uint64_t, double m, double) { mass += m; });
  return mass;
}

std::optional<double> LowerBoundSpec::cell_excess_risk(const Cell& cell, Label label) const {
  const double gap = 2.0 * params_.bump_height();
  double risk = 0.0;
  for_each_bump_in(cell, [&](std::uint64_t idx, double m, double) {
    if (zs_.z[idx] == 1 && label != cell_sign_label(idx)) risk += m * gap;
  });
  return risk;
}

std::optional<LabelSet> LowerBoundSpec::cell_bayes_labels(const Cell& cell) const {
  LabelSet s;
  for_each_bump_in(cell, [&](std::uint64_t idx, double, double) {
    if (zs_.z[idx] == 0) {
      s.insert(0);
      s.insert(1);
    } else {
      s.insert(cell_sign_label(idx));
    }
  });
  return s;
}

std::optional<std::vector<double>> LowerBoundSpec::cell_mean_eta(const Cell& cell) const {
  double total = 0.0;
  double p1 = 0.0;
  const double h = params_.bump_height();
  for_each_bump_in(cell, [&](std::uint64_t idx, double, double vol) {
    total += vol;
    p1 += vol * (0.5 + h * zs_.z[idx] * zs_.sigma[idx]);
  });
  if (total <= 0.0) return std::nullopt;
  p1 /= total;
  return std::vector<double>{1.0 - p1, p1};
}

nlohmann::json LowerBoundSpec::describe() const {
  std::vector<int> z(zs_.z.begin(), zs_.z.end());
  std::vector<int> sigma(zs_.sigma.begin(), zs_.sigma.end());
  return {{"family", "lowerbound"}, {"n", params_.budget}, {"alpha", params_.alpha},
          {"beta", params_.beta},   {"lambda", params_.lambda}, {"dim", params_.dim},
          {"level", params_.level}, {"z", z}, {"sigma", sigma}};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> coin_vector(const nlohmann::json& j, const std::string& key, std::size_t size,
                             const std::string& path) {
  const auto& v = j.at(key);
  if (v.is_number_integer()) return std::vector<int>(size, v.get<int>());
  auto out = require_field<std::vector<int>>(j, key, path);
  if (out.size() != size) {
    throw ConfigError(join_path(path, key), "expected " + std::to_string(size) + " entries");
  }
  return out;
}

}  // namespace

SpecPtr spec_from_json(const nlohmann::json& j) {
  const std::string path = "spec";
  const auto family = require_field<std::string>(j, "family", path);
  try {
    if (family == "constant") {
      return std::make_shared<ConstantSpec>(field_or<int>(j, "dim", 1, path),
                                            require_field<std::vector<double>>(j, "eta", path));
    }
    if (family == "ramp") {
      RampSpec::Params p;
      p.dim = field_or<int>(j, "dim", 1, path);
      p.num_labels = field_or<int>(j, "labels", 2, path);
      p.crossing = field_or<double>(j, "crossing", 0.5, path);
      p.slope = field_or<double>(j, "slope", 0.5, path);
      p.power = field_or<double>(j, "power", 1.0, path);
      p.floor = field_or<double>(j, "floor", 0.0, path);
      return std::make_shared<RampSpec>(p);
    }
    if (family == "regions") {
      const int dim = require_field<int>(j, "dim", path);
      const int labels = require_field<int>(j, "labels", path);
      const auto regs_path = join_path(path, "regions");
      if (!j.contains("regions") || !j["regions"].is_array()) throw ConfigError(regs_path, "expected an array");
      std::vector<RegionSpec::Region> regions;
      for (std::size_t i = 0; i < j["regions"].size(); ++i) {
        const auto& rj = j["regions"][i];
        const auto rp = index_path(regs_path, i);
        regions.push_back({field_or<std::string>(rj, "name", "region" + std::to_string(i), rp),
                           require_field<std::vector<double>>(rj, "lo", rp),
                           require_field<std::vector<double>>(rj, "hi", rp),
                           require_field<double>(rj, "mass", rp),
                           require_field<std::vector<double>>(rj, "eta", rp)});
      }
      return std::make_shared<RegionSpec>(dim, labels, std::move(regions),
                                          field_or<std::string>(j, "name", "regions", path));
    }
    if (family == "figure1") {
      Figure1Params p;
      p.all_tie_mass = field_or<double>(j, "all_tie_mass", p.all_tie_mass, path);
      p.top_two_tie_mass = field_or<double>(j, "top_two_tie_mass", p.top_two_tie_mass, path);
      p.separated_mass = field_or<double>(j, "separated_mass", p.separated_mass, path);
      p.tie_level = field_or<double>(j, "tie_level", p.tie_level, path);
      p.separated_top = field_or<double>(j, "separated_top", p.separated_top, path);
      p.separated_second = field_or<double>(j, "separated_second", p.separated_second, path);
      p.spacing = field_or<double>(j, "spacing", p.spacing, path);
      return make_figure1_spec(p);
    }
    if (family == "lowerbound") {
      auto params = make_lower_bound_params(
          require_field<std::int64_t>(j, "n", path), field_or<double>(j, "alpha", 1.0, path),
          field_or<double>(j, "beta", 1.0, path), field_or<double>(j, "lambda", 1.0, path),
          field_or<int>(j, "dim", 1, path));
      ZSigmaAssignment zs;
      if (j.contains("z") || j.contains("sigma")) {
        const DyadicPartition part(params.level, params.dim);
        if (!j.contains("z") || !j.contains("sigma")) {
          throw ConfigError(path, "give both 'z' and 'sigma' or neither");
        }
        const auto z = coin_vector(j, "z", part.size(), path);
        const auto s = coin_vector(j, "sigma", part.size(), path);
        zs = {params.level, params.dim, {}, {}};
        for (std::size_t i = 0; i < part.size(); ++i) {
          zs.z.push_back(static_cast<std::uint8_t>(z[i]));
          zs.sigma.push_back(static_cast<std::int8_t>(s[i]));
        }
      } else {
        Rng rng(field_or<std::uint64_t>(j, "seed", 0, path));
        zs = sample_zsigma(params, rng);
      }
      return std::make_shared<LowerBoundSpec>(params, std::move(zs));
    }
  } catch (const std::domain_error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join_path(path, "family"), "unknown family '" + family + "'");
}

}  // namespace margin_active
