#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "margin_active/dist.hpp"
#include "margin_active/learner.hpp"
#include "margin_active/rng.hpp"

namespace margin_active {

/// How an active learner spends its budget on the construction: a query
/// count per construction cell and the point queried there.
class SamplingRule {
 public:
  virtual ~SamplingRule() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::int64_t> allocation(const LowerBoundSpec& spec, std::int64_t n) const = 0;
  virtual void query_point(const LowerBoundSpec& spec, std::uint64_t cell, Rng& rng,
                           std::span<double> out) const = 0;
};

/// floor(r^d n / 2) queries per cell, all at the barycenter.
class UniformAllocation final : public SamplingRule {
 public:
  std::string name() const override { return "uniform"; }
  std::vector<std::int64_t> allocation(const LowerBoundSpec& spec, std::int64_t n) const override;
  void query_point(const LowerBoundSpec& spec, std::uint64_t cell, Rng& rng,
                   std::span<double> out) const override;
};

/// Turns one cell's 0/1 query outcomes into a label.
class LabelingRule {
 public:
  virtual ~LabelingRule() = default;
  virtual std::string name() const = 0;
  virtual Label label(std::span<const int> outcomes, const LowerBoundSpec& spec, std::uint64_t cell,
                      Rng& rng) const = 0;
};

std::unique_ptr<LabelingRule> make_np_labeling();
std::unique_ptr<LabelingRule> make_majority_labeling();  // ties to 1
std::unique_ptr<LabelingRule> make_minority_labeling();  // ties to 0
std::unique_ptr<LabelingRule> make_constant_labeling(Label y);
std::unique_ptr<LabelingRule> make_random_labeling();
std::unique_ptr<LabelingRule> make_bayes_cheater();      // reads sigma

/// Labels by name: np, majority, minority, always1, always0, random, cheater.
std::unique_ptr<LabelingRule> make_labeling(const std::string& name);

/// Queries each construction cell as the sampling rule dictates and labels
/// it with `labeling`. The result is constant on construction cells.
CellwiseClassifier np_strategy(Oracle& oracle, const LowerBoundSpec& spec, std::int64_t n,
                               const SamplingRule& sampling, const LabelingRule& labeling, Rng& rng);

/// Per-construction-cell excess risk of h, computed from bump geometry
/// directly (overlap of h's cells with each bump times the gap).
std::vector<double> lb_cell_risks(const LowerBoundSpec& spec, const CellwiseClassifier& h);

/// A learner entered in the ensemble study.
struct EnsembleLearner {
  std::string id;
  /// Returns the classifier; `queries` receives the number of labels used.
  std::function<CellwiseClassifier(const LowerBoundSpec& spec, std::int64_t n, Rng& rng,
                                   std::int64_t& queries)>
      run;
};

struct EnsembleResult {
  std::int64_t n = 0;
  LowerBoundParams params;
  int draws = 0;
  std::vector<std::string> learner_ids;
  std::vector<std::vector<double>> risks;  // [learner][draw]
  std::vector<std::vector<std::int64_t>> queries;
  std::vector<double> mean;
  std::vector<double> se;
  int theta_ok_draws = 0;  // draws passing check_theta_beta with C_beta = 2
};

nlohmann::json to_json(const EnsembleResult& r);
/// "draw,learner,n,risk" rows.
std::string to_csv(const EnsembleResult& r, bool header = true);

/// Draws `draws` coin assignments, runs every learner with budget n on each
/// and records the exact excess risks. Draws run on up to `jobs` threads;
/// draw i uses seed derive_seed(master_seed, i) and all learners in a draw
/// share that stream, so rules with the same sampling see the same labels.
EnsembleResult run_ensemble(std::int64_t n, double alpha, double beta, double lambda, int dim,
                            const std::vector<EnsembleLearner>& learners, int draws,
                            std::uint64_t master_seed, int jobs = 1);

struct LikelihoodRatioReport {
  int n_max = 0;
  double q = 0.0;
  double bound = 0.0;  // 16 e^2
  double max_ratio = 0.0;
  int argmax_length = 0;
  std::uint32_t argmax_sequence = 0;  // bit i = Y_i
  std::uint64_t sequences = 0;
  bool pass = false;
};

nlohmann::json to_json(const LikelihoodRatioReport& r);

/// Enumerates all 0/1 sequences of length <= n_max and compares (1/2)^len
/// with c4 times the sigma-averaged likelihood.
LikelihoodRatioReport likelihood_ratio_bound_check(int n_max, double q);

/// Ratio for a single sequence.
double likelihood_ratio(std::span<const int> outcomes, double q);

struct TailReport {
  std::string name;
  nlohmann::json parameters;
  std::uint64_t trials = 0;
  double frequency = 0.0;
  double se = 0.0;
  double reference = 0.0;  // exact binomial probability
  double bound = 0.0;      // analytic bound, or the implied constant
  bool pass = false;
};

nlohmann::json to_json(const TailReport& r);

/// Frequency of mean(Y) < 1/2 for m draws of Ber(1/2 + gap). Requires
/// m <= gap^-2 / 2. `bound` is the implied c3 lower bound (frequency - 3 se).
TailReport anticoncentration_check(double gap, int m, std::uint64_t trials, Rng& rng);

/// Frequency of mean(Y) >= (1 + eps) p against exp(-m eps^2 p / 3).
TailReport chernoff_check(double p, int m, double eps, std::uint64_t trials, Rng& rng);

/// P(Bin(m, p) <= k) and P(Bin(m, p) >= k).
double binomial_cdf(int m, double p, int k);
double binomial_upper_tail(int m, double p, int k);

}  // namespace margin_active
