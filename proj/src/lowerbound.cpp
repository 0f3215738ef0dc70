#include "margin_active/lowerbound.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/binomial.hpp>

#include "margin_active/risk.hpp"
#include "margin_active/stats.hpp"

namespace margin_active {

namespace {

int count_ones(std::span<const int> outcomes) {
  return static_cast<int>(std::count(outcomes.begin(), outcomes.end(), 1));
}

class NpLabeling final : public LabelingRule {
 public:
  std::string name() const override { return "np"; }
  Label label(std::span<const int> outcomes, const LowerBoundSpec& spec, std::uint64_t,
              Rng&) const override {
    return np_label(outcomes, spec.params().bump_height());
  }
};

class MajorityLabeling final : public LabelingRule {
 public:
  std::string name() const override { return "majority"; }
  Label label(std::span<const int> outcomes, const LowerBoundSpec&, std::uint64_t, Rng&) const override {
    const int ones = count_ones(outcomes);
    return 2 * ones >= static_cast<int>(outcomes.size()) ? 1 : 0;
  }
};

class MinorityLabeling final : public LabelingRule {
 public:
  std::string name() const override { return "minority"; }
  Label label(std::span<const int> outcomes, const LowerBoundSpec&, std::uint64_t, Rng&) const override {
    const int ones = count_ones(outcomes);
    return 2 * ones < static_cast<int>(outcomes.size()) ? 1 : 0;
  }
};

class ConstantLabeling final : public LabelingRule {
 public:
  explicit ConstantLabeling(Label y) : y_(y) {}
  std::string name() const override { return "always" + std::to_string(y_); }
  Label label(std::span<const int>, const LowerBoundSpec&, std::uint64_t, Rng&) const override { return y_; }

 private:
  Label y_;
};

class RandomLabeling final : public LabelingRule {
 public:
  std::string name() const override { return "random"; }
  Label label(std::span<const int>, const LowerBoundSpec&, std::uint64_t, Rng& rng) const override {
    return rng.bernoulli(0.5) ? 1 : 0;
  }
};

class BayesCheater final : public LabelingRule {
 public:
  std::string name() const override { return "cheater"; }
  Label label(std::span<const int>, const LowerBoundSpec& spec, std::uint64_t cell, Rng&) const override {
    return spec.cell_sign_label(cell);
  }
};

}  // namespace

std::vector<std::int64_t> UniformAllocation::allocation(const LowerBoundSpec& spec, std::int64_t n) const {
  const auto& p = spec.params();
  const DyadicPartition part(p.level, p.dim);
  const double per = std::floor(std::pow(p.r(), p.dim) * static_cast<double>(n) / 2.0);
  return std::vector<std::int64_t>(part.size(), static_cast<std::int64_t>(per));
}

void UniformAllocation::query_point(const LowerBoundSpec& spec, std::uint64_t cell, Rng&,
                                    std::span<double> out) const {
  const auto& p = spec.params();
  const auto bc = barycenter(DyadicPartition(p.level, p.dim).cell(cell));
  std::copy(bc.begin(), bc.end(), out.begin());
}

std::unique_ptr<LabelingRule> make_np_labeling() { return std::make_unique<NpLabeling>(); }
std::unique_ptr<LabelingRule> make_majority_labeling() { return std::make_unique<MajorityLabeling>(); }
std::unique_ptr<LabelingRule> make_minority_labeling() { return std::make_unique<MinorityLabeling>(); }
std::unique_ptr<LabelingRule> make_constant_labeling(Label y) { return std::make_unique<ConstantLabeling>(y); }
std::unique_ptr<LabelingRule> make_random_labeling() { return std::make_unique<RandomLabeling>(); }
std::unique_ptr<LabelingRule> make_bayes_cheater() { return std::make_unique<BayesCheater>(); }

std::unique_ptr<LabelingRule> make_labeling(const std::string& name) {
  if (name == "np") return make_np_labeling();
  if (name == "majority") return make_majority_labeling();
  if (name == "minority") return make_minority_labeling();
  if (name == "always1") return make_constant_labeling(1);
  if (name == "always0") return make_constant_labeling(0);
  if (name == "random") return make_random_labeling();
  if (name == "cheater") return make_bayes_cheater();
  throw std::invalid_argument("unknown labeling rule '" + name + "'");
}

CellwiseClassifier np_strategy(Oracle& oracle, const LowerBoundSpec& spec, std::int64_t n,
                               const SamplingRule& sampling, const LabelingRule& labeling, Rng& rng) {
  const auto& p = spec.params();
  const auto alloc = sampling.allocation(spec, n);
  std::vector<Label> labels(alloc.size());
  Point x(p.dim);
  std::vector<int> outcomes;
  for (std::uint64_t c = 0; c < alloc.size(); ++c) {
    outcomes.clear();
    for (std::int64_t j = 0; j < alloc[c]; ++j) {
      sampling.query_point(spec, c, rng, x);
      outcomes.push_back(oracle.query(x, rng));
    }
    labels[c] = labeling.label(outcomes, spec, c, rng);
  }
  return CellwiseClassifier(p.level, p.dim, std::move(labels));
}

std::vector<double> lb_cell_risks(const LowerBoundSpec& spec, const CellwiseClassifier& h) {
  const auto& p = spec.params();
  if (h.dim() != p.dim) throw std::domain_error("lb_cell_risks: dimension mismatch");
  const DyadicPartition part(p.level, p.dim);
  const double density = std::pow(4.0, p.dim);
  const double gap = 2.0 * p.bump_height();
  std::vector<double> out(part.size(), 0.0);
  std::vector<double> lo(p.dim), hi(p.dim);
  for (std::uint64_t c = 0; c < part.size(); ++c) {
    if (spec.coins().z[c] == 0) continue;
    const Label bayes = spec.cell_sign_label(c);
    const Cell cell = part.cell(c);
    spec.bump_box(c, lo, hi);
    if (h.level() <= p.level) {
      const Label y = h.at_index(h.partition().index_of(ancestor(cell, h.level())));
      if (y != bayes) out[c] = std::pow(p.r(), p.dim) * gap;
      continue;
    }
    double wrong_volume = 0.0;
    for (auto i : h.partition().descendants_of(cell)) {
      if (h.at_index(i) != bayes) wrong_volume += overlap_volume(h.partition().cell(i), lo, hi);
    }
    out[c] = density * wrong_volume * gap;
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const EnsembleResult& r) {
  nlohmann::json learners = nlohmann::json::array();
  for (std::size_t i = 0; i < r.learner_ids.size(); ++i) {
    learners.push_back({{"id", r.learner_ids[i]},
                        {"mean", r.mean[i]},
                        {"se", r.se[i]},
                        {"risks", r.risks[i]},
                        {"queries", r.queries[i]}});
  }
  return {{"n", r.n},
          {"alpha", r.params.alpha},
          {"beta", r.params.beta},
          {"lambda", r.params.lambda},
          {"dim", r.params.dim},
          {"level", r.params.level},
          {"r", r.params.r()},
          {"draws", r.draws},
          {"theta_ok_draws", r.theta_ok_draws},
          {"learners", learners}};
}

std::string to_csv(const EnsembleResult& r, bool header) {
  std::string out = header ? "draw,learner,n,risk\n" : "";
  char buf[64];
  for (int d = 0; d < r.draws; ++d) {
    for (std::size_t i = 0; i < r.learner_ids.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.risks[i][d]);
      out += std::to_string(d) + "," + r.learner_ids[i] + "," + std::to_string(r.n) + "," + buf + "\n";
    }
  }
  return out;
}

EnsembleResult run_ensemble(std::int64_t n, double alpha, double beta, double lambda, int dim,
                            const std::vector<EnsembleLearner>& learners, int draws,
                            std::uint64_t master_seed, int jobs) {
  if (draws < 1) throw std::domain_error("run_ensemble: draws must be positive");
  for (std::size_t i = 0; i < learners.size(); ++i) {
    for (std::size_t j = i + 1; j < learners.size(); ++j) {
      if (learners[i].id == learners[j].id) throw std::invalid_argument("run_ensemble: duplicate learner id");
    }
  }
  const auto params = make_lower_bound_params(n, alpha, beta, lambda, dim);

  EnsembleResult res;
  res.n = n;
  res.params = params;
  res.draws = draws;
  const std::size_t k = learners.size();
  for (const auto& l : learners) res.learner_ids.push_back(l.id);
  res.risks.assign(k, std::vector<double>(draws, 0.0));
  res.queries.assign(k, std::vector<std::int64_t>(draws, 0));
  std::vector<std::uint8_t> theta_ok(draws, 0);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int d = next++; d < draws && !failed; d = next++) {
      try {
        Rng coin_rng(derive_seed(master_seed, static_cast<std::uint64_t>(d)));
        auto zs = sample_zsigma(params, coin_rng);
        const LowerBoundSpec spec(params, std::move(zs));
        theta_ok[d] = check_theta_beta(spec.coins(), params, 2.0) ? 1 : 0;
        const std::uint64_t learner_seed = coin_rng.next_u64();
        for (std::size_t i = 0; i < k; ++i) {
          Rng rng(learner_seed);
          std::int64_t used = 0;
          const auto h = learners[i].run(spec, n, rng, used);
          if (used > n) throw BudgetError("learner '" + learners[i].id + "' exceeded its budget");
          res.risks[i][d] = excess_risk_exact(h, spec).value;
          res.queries[i][d] = used;
        }
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, draws));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  res.theta_ok_draws = static_cast<int>(std::count(theta_ok.begin(), theta_ok.end(), 1));
  for (std::size_t i = 0; i < k; ++i) {
    const auto ms = mean_se(res.risks[i]);
    res.mean.push_back(ms.mean);
    res.se.push_back(ms.se);
  }
  return res;
}

// ---------------------------------------------------------------------------

double likelihood_ratio(std::span<const int> outcomes, double q) {
  double plus = 1.0, minus = 1.0, half = 1.0;
  for (int y : outcomes) {
    const double s = y == 1 ? q : -q;
    plus *= 0.5 + s;
    minus *= 0.5 - s;
    half *= 0.5;
  }
  return half / (0.5 * (plus + minus));
}

nlohmann::json to_json(const LikelihoodRatioReport& r) {
  return {{"n_max", r.n_max},         {"q", r.q},
          {"bound", r.bound},         {"max_ratio", r.max_ratio},
          {"argmax_length", r.argmax_length}, {"argmax_sequence", r.argmax_sequence},
          {"sequences", r.sequences}, {"pass", r.pass}};
}

LikelihoodRatioReport likelihood_ratio_bound_check(int n_max, double q) {
  if (!(q > 0.0 && q < 0.5)) throw std::domain_error("likelihood_ratio_bound_check: q must be in (0, 1/2)");
  if (n_max < 0 || n_max > 20) throw std::domain_error("likelihood_ratio_bound_check: n_max must be in [0, 20]");
  if (static_cast<double>(n_max) > 0.5 / (q * q) * (1.0 + 1e-12)) {
    throw std::domain_error("likelihood_ratio_bound_check: n_max exceeds q^-2 / 2");
  }
  LikelihoodRatioReport rep;
  rep.n_max = n_max;
  rep.q = q;
  rep.bound = 16.0 * std::exp(2.0);
  std::vector<int> seq;
  for (int len = 0; len <= n_max; ++len) {
    seq.assign(len, 0);
    const std::uint32_t count = std::uint32_t{1} << len;
    for (std::uint32_t bits = 0; bits < count; ++bits) {
      for (int i = 0; i < len; ++i) seq[i] = (bits >> i) & 1U;
      const double ratio = likelihood_ratio(seq, q);
      ++rep.sequences;
      if (ratio > rep.max_ratio) {
        rep.max_ratio = ratio;
        rep.argmax_length = len;
        rep.argmax_sequence = bits;
      }
    }
  }
  rep.pass = rep.max_ratio <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------

double binomial_cdf(int m, double p, int k) {
  if (k < 0) return 0.0;
  if (k >= m) return 1.0;
  return boost::math::cdf(boost::math::binomial_distribution<double>(m, p), k);
}

double binomial_upper_tail(int m, double p, int k) {
  if (k <= 0) return 1.0;
  if (k > m) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::binomial_distribution<double>(m, p), k - 1));
}

nlohmann::json to_json(const TailReport& r) {
  return {{"name", r.name},           {"parameters", r.parameters}, {"trials", r.trials},
          {"frequency", r.frequency}, {"se", r.se},                 {"reference", r.reference},
          {"bound", r.bound},         {"pass", r.pass}};
}

namespace {

std::uint64_t count_ones_bernoulli(int m, double p, Rng& rng) {
  std::uint64_t s = 0;
  for (int j = 0; j < m; ++j) s += rng.bernoulli(p);
  return s;
}

}  // namespace

TailReport anticoncentration_check(double gap, int m, std::uint64_t trials, Rng& rng) {
  if (!(gap > 0.0 && gap < 0.5)) throw std::domain_error("anticoncentration_check: gap must be in (0, 1/2)");
  if (m < 1) throw std::domain_error("anticoncentration_check: m must be positive");
  if (static_cast<double>(m) > 0.5 / (gap * gap) * (1.0 + 1e-12)) {
    throw std::domain_error("anticoncentration_check: m exceeds gap^-2 / 2");
  }
  if (trials == 0) throw std::domain_error("anticoncentration_check: trials must be positive");
  const double p = 0.5 + gap;
  std::uint64_t below = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    if (2 * count_ones_bernoulli(m, p, rng) < static_cast<std::uint64_t>(m)) ++below;
  }
  TailReport rep;
  rep.name = "anticoncentration";
  rep.parameters = {{"gap", gap}, {"m", m}};
  rep.trials = trials;
  rep.frequency = static_cast<double>(below) / static_cast<double>(trials);
  rep.se = std::sqrt(rep.frequency * (1.0 - rep.frequency) / static_cast<double>(trials));
  // mean < 1/2  <=>  S <= ceil(m/2) - 1
  rep.reference = binomial_cdf(m, p, (m + 1) / 2 - 1);
  rep.bound = rep.frequency - 3.0 * rep.se;
  rep.pass = rep.bound > 0.0;
  return rep;
}

TailReport chernoff_check(double p, int m, double eps, std::uint64_t trials, Rng& rng) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chernoff_check: p must be in (0,1)");
  if (!(eps > 0.0)) throw std::domain_error("chernoff_check: eps must be positive");
  if (m < 1) throw std::domain_error("chernoff_check: m must be positive");
  if (trials == 0) throw std::domain_error("chernoff_check: trials must be positive");
  const double threshold = (1.0 + eps) * p * m;  // on the sum
  std::uint64_t hits = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    if (static_cast<double>(count_ones_bernoulli(m, p, rng)) >= threshold - 1e-9) ++hits;
  }
  TailReport rep;
  rep.name = "chernoff";
  rep.parameters = {{"p", p}, {"m", m}, {"eps", eps}};
  rep.trials = trials;
  rep.frequency = static_cast<double>(hits) / static_cast<double>(trials);
  rep.se = std::sqrt(rep.frequency * (1.0 - rep.frequency) / static_cast<double>(trials));
  rep.reference = binomial_upper_tail(m, p, static_cast<int>(std::ceil(threshold - 1e-9)));
  rep.bound = std::exp(-m * eps * eps * p / 3.0);
  rep.pass = rep.frequency <= rep.bound + 3.0 * rep.se;
  return rep;
}

}  // namespace margin_active
