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
#include "margin_active/dyadic.hpp"
#include "margin_active/labels.hpp"
#include "margin_active/rng.hpp"

namespace margin_active {

/// Classifier that is constant on each cell of one dyadic level.
class CellwiseClassifier {
 public:
  CellwiseClassifier(int level, int dim, std::vector<Label> labels);
  /// Same label everywhere.
  static CellwiseClassifier constant(int dim, Label y);

  int level() const { return partition_.level(); }
  int dim() const { return partition_.dim(); }
  const DyadicPartition& partition() const { return partition_; }
  const std::vector<Label>& labels() const { return labels_; }

  Label operator()(std::span<const double> x) const {
    return labels_[partition_.index_of_point(x)];
  }
  Label at_index(std::uint64_t i) const { return labels_[i]; }

 private:
  DyadicPartition partition_;
  std::vector<Label> labels_;
};

/// Per-cell surviving label sets over one dyadic level.
class CandidateLabelMap {
 public:
  CandidateLabelMap(int level, int dim, int num_labels);

  int level() const { return partition_.level(); }
  int dim() const { return partition_.dim(); }
  int num_labels() const { return num_labels_; }
  const DyadicPartition& partition() const { return partition_; }

  std::uint64_t size() const { return sets_.size(); }
  LabelSet& operator[](std::uint64_t i) { return sets_[i]; }
  LabelSet operator[](std::uint64_t i) const { return sets_[i]; }
  LabelSet set_at(std::span<const double> x) const { return sets_[partition_.index_of_point(x)]; }
  const std::vector<LabelSet>& sets() const { return sets_; }

  /// Writes `s` into every cell of this map that lies inside `coarse`.
  void assign(const Cell& coarse, LabelSet s);

  bool all_nonempty() const;

  /// h(x) = min L_C for the cell containing x.
  Label classify(std::span<const double> x) const { return set_at(x).min(); }
  CellwiseClassifier to_classifier() const;

  /// "cell,labels" rows with the label-set bitmask in decimal.
  std::string to_csv() const;

 private:
  DyadicPartition partition_;
  int num_labels_;
  std::vector<LabelSet> sets_;
};

/// Query counter with a hard limit.
class BudgetMeter {
 public:
  explicit BudgetMeter(std::int64_t limit);

  std::int64_t limit() const { return limit_; }
  std::int64_t used() const { return used_; }
  std::int64_t remaining() const { return limit_ - used_; }

  /// Takes one query from the budget; throws BudgetError when exhausted.
  void charge();

 private:
  std::int64_t limit_;
  std::int64_t used_ = 0;
};

/// Label oracle: answers Y ~ eta(x) for support points and charges a meter.
class Oracle {
 public:
  Oracle(const DistributionSpec& spec, BudgetMeter& meter) : spec_(spec), meter_(meter) {}

  const DistributionSpec& spec() const { return spec_; }
  BudgetMeter& meter() { return meter_; }

  /// Throws std::domain_error for points outside the support and
  /// BudgetError when the budget is spent.
  Label query(std::span<const double> x, Rng& rng);

 private:
  const DistributionSpec& spec_;
  BudgetMeter& meter_;
  std::vector<double> eta_buf_;
};

/// Draws one label from the probability vector eta.
Label draw_label(std::span<const double> eta, Rng& rng);

/// ceil(2 ln(2L / (delta0 r^(d+1))) / (lambda r^alpha)^2)
std::int64_t n_queries(double r, double alpha, double lambda, double delta0, int num_labels, int dim);

/// Label frequencies of one cell's query outcomes.
std::vector<double> estimate_eta(std::span<const Label> labels, int num_labels);

/// Drops every candidate y with max(eta_hat) - eta_hat[y] >= tau.
LabelSet eliminate(LabelSet candidates, std::span<const double> eta_hat, double tau);

struct NonAdaptiveParams {
  std::int64_t budget = 0;  // n0
  double delta0 = 0.05;
  double alpha = 1.0;
  double lambda = 1.0;
  int min_level = 1;        // r0 = 2^-min_level, the output resolution
};

struct LevelStats {
  int level = 0;
  std::int64_t active_cells = 0;
  std::int64_t queries_per_cell = 0;
  std::int64_t queries = 0;
  std::int64_t support_empty_cells = 0;
};

struct NonAdaptiveTrace {
  int r_min_level = 0;  // finest level sampled; 0 when nothing was sampled
  std::vector<LevelStats> levels;
  std::int64_t queries_used = 0;
  CandidateLabelMap labels;

  double r_min() const { return side_length(r_min_level); }
};

nlohmann::json to_json(const NonAdaptiveTrace& t);

/// Called once per sampled cell with its estimate and the surviving set.
using CellObserver =
    std::function<void(const Cell& cell, std::span<const double> eta_hat, LabelSet survivors)>;

/// Level-wise label elimination with a fixed smoothness guess.
NonAdaptiveTrace run_nonadaptive(Oracle& oracle, const NonAdaptiveParams& params, Rng& rng,
                                 const CellObserver& observer = {});

struct MetaParams {
  double delta = 0.05;
  double lambda = 1.0;
  int max_rounds = 1000;
};

struct MetaResult {
  CandidateLabelMap labels;
  int rounds = 0;          // rounds actually run
  int rounds_nominal = 0;  // floor(ln n)^3 before the cap
  int accepted_rounds = 0;
  std::int64_t per_round_budget = 0;
  double delta0 = 0.0;
  int finest_level = 0;    // deepest r_min level over all rounds
  std::int64_t queries_used = 0;
};

/// Smoothness-adaptive aggregation over the grid alpha_i = i / R.
MetaResult run_meta(Oracle& oracle, std::int64_t n, const MetaParams& params, Rng& rng);

/// Number of meta rounds: min(floor(ln n)^3, max_rounds).
int meta_rounds(std::int64_t n, int max_rounds);

/// ceil(log2(n0) / d): the output level for a per-round budget n0.
int meta_min_level(double n0, int dim);

/// n i.i.d. pairs (X, Y) from the spec.
std::vector<std::pair<Point, Label>> draw_passive_sample(const DistributionSpec& spec,
                                                         std::int64_t n, Rng& rng);

/// round(log2(n) / (2 alpha + d)), at least 0.
int passive_default_level(std::int64_t n, double alpha, int dim);

/// Majority label per level-k cell; ties and empty cells go to label 0.
CandidateLabelMap passive_plugin(std::span<const std::pair<Point, Label>> sample, int level,
                                 int num_labels);

/// passive_plugin on n fresh i.i.d. pairs, counting as it draws.
CandidateLabelMap passive_plugin_streaming(const DistributionSpec& spec, std::int64_t n, int level,
                                           Rng& rng);

/// Conditional Neyman-Pearson label for one cell of the binary construction.
/// Outcomes are 0/1; returns 1 unless zeros strictly outnumber ones.
Label np_label(std::span<const int> outcomes, double q);

}  // namespace margin_active
