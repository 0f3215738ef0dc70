#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "margin_active/dyadic.hpp"
#include "margin_active/labels.hpp"
#include "margin_active/rng.hpp"

namespace margin_active {

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an operation needs an analytic quantity the family lacks.
class UnsupportedSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Analytic description of (P_X, eta) on [0,1]^d with L labels.
///
/// Implementations are immutable once built, so one instance can be shared
/// by concurrent runs. The optional exact hooks return std::nullopt when a
/// family has no closed form; risk integration then falls back to Monte
/// Carlo or reports the family as unsupported.
class DistributionSpec {
 public:
  virtual ~DistributionSpec() = default;

  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual int num_labels() const = 0;

  /// Writes eta(x) into out (size L).
  virtual void eta(std::span<const double> x, std::span<double> out) const = 0;
  std::vector<double> eta(std::span<const double> x) const;

  /// X ~ P_X written into out (size d).
  virtual void sample_x(Rng& rng, std::span<double> out) const = 0;

  virtual bool in_support(std::span<const double> x) const = 0;

  /// X uniform on cell ∩ support, by rejection against in_support with a cap
  /// of 10^4 rejections. Returns false when the cell looks support-empty.
  virtual bool sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const;

  /// P_X(cell), when known in closed form.
  virtual std::optional<double> region_mass(const Cell& cell) const;

  /// Integral over cell of (eta_(1)(x) - eta_label(x)) dP_X(x).
  virtual std::optional<double> cell_excess_risk(const Cell& cell, Label label) const;

  /// Labels that are a Bayes label at some point of cell ∩ support.
  virtual std::optional<LabelSet> cell_bayes_labels(const Cell& cell) const;

  /// Average of eta over cell ∩ support under the uniform law there; the
  /// target of the per-cell label-frequency estimate.
  virtual std::optional<std::vector<double>> cell_mean_eta(const Cell& cell) const;

  virtual nlohmann::json describe() const = 0;

  /// Finest dyadic level at which eta and P_X are constant per cell (or
  /// -1 if none); used only for reporting.
  virtual int construction_level() const { return -1; }
};

using SpecPtr = std::shared_ptr<const DistributionSpec>;

// ---------------------------------------------------------------------------
// Margins

/// eta_(1) - max{eta_y : eta_y != eta_(1)}; +infinity when all values tie.
double soft_margin(std::span<const double> eta);
/// eta_(1) - eta_(2); zero when the Bayes label is not unique.
double sharp_margin(std::span<const double> eta);

double soft_margin(const DistributionSpec& spec, std::span<const double> x);
double sharp_margin(const DistributionSpec& spec, std::span<const double> x);

/// All argmax labels of eta (exact ties).
LabelSet bayes_labels(std::span<const double> eta);

// ---------------------------------------------------------------------------
// Built-in families

/// Constant eta, P_X uniform on [0,1]^d.
class ConstantSpec final : public DistributionSpec {
 public:
  ConstantSpec(int dim, std::vector<double> eta);

  std::string id() const override;
  int dim() const override { return dim_; }
  int num_labels() const override { return static_cast<int>(eta_.size()); }
  void eta(std::span<const double> x, std::span<double> out) const override;
  using DistributionSpec::eta;
  void sample_x(Rng& rng, std::span<double> out) const override;
  bool in_support(std::span<const double> x) const override;
  bool sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const override;
  std::optional<double> region_mass(const Cell& cell) const override;
  std::optional<double> cell_excess_risk(const Cell& cell, Label label) const override;
  std::optional<LabelSet> cell_bayes_labels(const Cell& cell) const override;
  std::optional<std::vector<double>> cell_mean_eta(const Cell& cell) const override;
  nlohmann::json describe() const override;
  int construction_level() const override { return 0; }

 private:
  int dim_;
  std::vector<double> eta_;
};

/// Two leading labels cross along the first coordinate:
///   eta_0 = base + g(x_1),  eta_1 = base - g(x_1),  eta_y = floor (y >= 2)
/// with g(t) = slope * sign(t - crossing) * |t - crossing|^power and
/// base = (1 - (L-2) floor) / 2. P_X is uniform on [0,1]^d.
///
/// The margin near the crossing behaves like |t - crossing|^power, so the
/// family satisfies the margin condition with exponent 1/power and is
/// (slope * 2^(1-power), power)-Hölder.
class RampSpec final : public DistributionSpec {
 public:
  struct Params {
    int dim = 1;
    int num_labels = 2;
    double crossing = 0.5;
    double slope = 0.5;
    double power = 1.0;
    double floor = 0.0;
  };

  explicit RampSpec(Params p);

  const Params& params() const { return p_; }
  /// Hölder constant for exponent `power`.
  double holder_constant() const;

  std::string id() const override;
  int dim() const override { return p_.dim; }
  int num_labels() const override { return p_.num_labels; }
  void eta(std::span<const double> x, std::span<double> out) const override;
  using DistributionSpec::eta;
  void sample_x(Rng& rng, std::span<double> out) const override;
  bool in_support(std::span<const double> x) const override;
  bool sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const override;
  std::optional<double> region_mass(const Cell& cell) const override;
  std::optional<double> cell_excess_risk(const Cell& cell, Label label) const override;
  std::optional<LabelSet> cell_bayes_labels(const Cell& cell) const override;
  std::optional<std::vector<double>> cell_mean_eta(const Cell& cell) const override;
  nlohmann::json describe() const override;

 private:
  double g(double t) const;
  /// Integral of |t - crossing|^power over [a, b].
  double abs_power_integral(double a, double b) const;
  /// Integral of g over [a, b] restricted to g >= 0 (sign = +1) or g <= 0.
  double signed_part_integral(double a, double b, int sign) const;

  Params p_;
  double base_;
};

/// Piecewise-constant family: disjoint axis-aligned boxes, each with its own
/// probability mass (spread uniformly) and constant eta. Points outside every
/// box carry no mass and get the tie vector (1/L, ..., 1/L).
class RegionSpec final : public DistributionSpec {
 public:
  struct Region {
    std::string name;
    std::vector<double> lo;
    std::vector<double> hi;
    double mass = 0.0;
    std::vector<double> eta;
  };

  RegionSpec(int dim, int num_labels, std::vector<Region> regions, std::string name = "regions");

  const std::vector<Region>& regions() const { return regions_; }

  std::string id() const override { return name_; }
  int dim() const override { return dim_; }
  int num_labels() const override { return num_labels_; }
  void eta(std::span<const double> x, std::span<double> out) const override;
  using DistributionSpec::eta;
  void sample_x(Rng& rng, std::span<double> out) const override;
  bool in_support(std::span<const double> x) const override;
  bool sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const override;
  std::optional<double> region_mass(const Cell& cell) const override;
  std::optional<double> cell_excess_risk(const Cell& cell, Label label) const override;
  std::optional<LabelSet> cell_bayes_labels(const Cell& cell) const override;
  std::optional<std::vector<double>> cell_mean_eta(const Cell& cell) const override;
  nlohmann::json describe() const override;

  /// Mass of the regions whose eta has a non-unique Bayes label.
  double non_unique_bayes_mass() const;

 private:
  int find_region(std::span<const double> x) const;

  int dim_;
  int num_labels_;
  std::vector<Region> regions_;
  std::vector<double> cumulative_mass_;
  std::string name_;
};

/// Three-region, three-label layout on [0,1]: a region where every label
/// ties, a region where labels 1 and 2 tie above label 0, and a region with
/// separated labels ranked 2 > 1 > 0. Region masses and levels are
/// configuration.
struct Figure1Params {
  double all_tie_mass = 0.2;
  double top_two_tie_mass = 0.3;
  double separated_mass = 0.5;
  double tie_level = 0.4;           // shared value of the two tied labels
  double separated_top = 0.5;       // largest eta in the separated region
  double separated_second = 0.3;    // second largest eta there
  double spacing = 0.05;            // empty gap between consecutive regions
};
std::shared_ptr<RegionSpec> make_figure1_spec(const Figure1Params& p);

// ---------------------------------------------------------------------------
// Lower-bound construction

struct LowerBoundParams {
  std::int64_t budget = 0;
  double alpha = 1.0;
  double lambda = 1.0;
  double beta = 1.0;
  int dim = 1;
  int level = 1;  // r = 2^-level

  double r() const { return side_length(level); }
  double c_eta() const { return lambda / 8.0; }
  /// Half-gap of the bump: c_eta r^alpha.
  double bump_height() const;
  /// P(z_C = 1) = r^(alpha beta).
  double z_probability() const;
};

/// r = (64 / (lambda^2 n))^(1/(2 alpha + d)) rounded down to a dyadic value.
LowerBoundParams make_lower_bound_params(std::int64_t n, double alpha, double beta,
                                         double lambda, int dim);

struct ZSigmaAssignment {
  int level = 0;
  int dim = 1;
  std::vector<std::uint8_t> z;     // per cell, partition order
  std::vector<std::int8_t> sigma;  // per cell, +1 / -1
};

ZSigmaAssignment sample_zsigma(const LowerBoundParams& params, Rng& rng);

/// r^d * #{C : z_C = 1} <= C_beta r^(alpha beta)
bool check_theta_beta(const ZSigmaAssignment& zs, const LowerBoundParams& params, double c_beta);

/// 4^d on the sup-norm ball of radius r/8 around each barycenter, else 0.
double lb_density(const LowerBoundParams& params, std::span<const double> x);

/// min{(2 r^a - 8 r^(a-1) ||x - x_C||)_+, r^a} for the cell C containing x.
double lb_bump(const LowerBoundParams& params, std::span<const double> x);

/// P(Y = 1 | X = x) = 1/2 + c_eta z_C sigma_C bump(x).
double lb_eta(const LowerBoundParams& params, const ZSigmaAssignment& zs,
              std::span<const double> x);

/// Binary spec built from one coin draw. eta vector is (P(Y=0), P(Y=1)).
class LowerBoundSpec final : public DistributionSpec {
 public:
  LowerBoundSpec(LowerBoundParams params, ZSigmaAssignment zs);

  const LowerBoundParams& params() const { return params_; }
  const ZSigmaAssignment& coins() const { return zs_; }

  /// Bayes label (1 + sigma)/2 of a construction cell; meaningful when z = 1.
  Label cell_sign_label(std::uint64_t cell_index) const;

  std::string id() const override;
  int dim() const override { return params_.dim; }
  int num_labels() const override { return 2; }
  void eta(std::span<const double> x, std::span<double> out) const override;
  using DistributionSpec::eta;
  void sample_x(Rng& rng, std::span<double> out) const override;
  bool in_support(std::span<const double> x) const override;
  bool sample_in_cell(const Cell& cell, Rng& rng, std::span<double> out) const override;
  std::optional<double> region_mass(const Cell& cell) const override;
  std::optional<double> cell_excess_risk(const Cell& cell, Label label) const override;
  std::optional<LabelSet> cell_bayes_labels(const Cell& cell) const override;
  std::optional<std::vector<double>> cell_mean_eta(const Cell& cell) const override;
  nlohmann::json describe() const override;
  int construction_level() const override { return params_.level; }

  /// Support box [lo, hi) of the bump in construction cell `index`.
  void bump_box(std::uint64_t index, std::span<double> lo, std::span<double> hi) const;

 private:
  /// Calls f(index, overlap_mass) for each construction cell whose bump
  /// meets `cell`.
  template <typename F>
  void for_each_bump_in(const Cell& cell, F&& f) const;

  LowerBoundParams params_;
  ZSigmaAssignment zs_;
  DyadicPartition partition_;
};

// ---------------------------------------------------------------------------
// Config

/// Builds a spec from its JSON description. For the lower-bound family the
/// coins are either given explicitly ("z", "sigma") or drawn from "seed".
SpecPtr spec_from_json(const nlohmann::json& j);

}  // namespace margin_active
