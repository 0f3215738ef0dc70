#include "margin_active/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace margin_active {

namespace {

constexpr std::int64_t kQueryCap = std::int64_t{1} << 60;

std::int64_t saturating_add(std::int64_t a, std::int64_t b) {
  return (a > kQueryCap - b) ? kQueryCap : a + b;
}

std::int64_t saturating_mul(std::int64_t a, std::int64_t b) {
  if (a == 0 || b == 0) return 0;
  return (a > kQueryCap / b) ? kQueryCap : a * b;
}

struct ActiveCell {
  Cell cell;
  LabelSet set;
};

}  // namespace

// ---------------------------------------------------------------------------

CellwiseClassifier::CellwiseClassifier(int level, int dim, std::vector<Label> labels)
    : partition_(level, dim), labels_(std::move(labels)) {
  if (labels_.size() != partition_.size()) {
    throw std::invalid_argument("CellwiseClassifier: one label per cell required");
  }
}

CellwiseClassifier CellwiseClassifier::constant(int dim, Label y) {
  return CellwiseClassifier(0, dim, {y});
}

CandidateLabelMap::CandidateLabelMap(int level, int dim, int num_labels)
    : partition_(level, dim),
      num_labels_(num_labels),
      sets_(partition_.size(), LabelSet::all(num_labels)) {}

void CandidateLabelMap::assign(const Cell& coarse, LabelSet s) {
  if (coarse.level > level()) {
    sets_[partition_.index_of(ancestor(coarse, level()))] = s;
    return;
  }
  for (auto i : partition_.descendants_of(coarse)) sets_[i] = s;
}

bool CandidateLabelMap::all_nonempty() const {
  return std::none_of(sets_.begin(), sets_.end(), [](LabelSet s) { return s.empty(); });
}

CellwiseClassifier CandidateLabelMap::to_classifier() const {
  std::vector<Label> labels(sets_.size());
  for (std::size_t i = 0; i < sets_.size(); ++i) labels[i] = sets_[i].empty() ? 0 : sets_[i].min();
  return CellwiseClassifier(level(), dim(), std::move(labels));
}

std::string CandidateLabelMap::to_csv() const {
  std::ostringstream os;
  os << "cell,labels\n";
  for (std::uint64_t i = 0; i < sets_.size(); ++i) {
    os << '"' << to_string(partition_.cell(i)) << "\"," << sets_[i].bits() << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

BudgetMeter::BudgetMeter(std::int64_t limit) : limit_(limit) {
  if (limit < 0) throw std::domain_error("BudgetMeter: negative limit");
}

void BudgetMeter::charge() {
  if (used_ >= limit_) throw BudgetError("query budget of " + std::to_string(limit_) + " exhausted");
  ++used_;
}

Label draw_label(std::span<const double> eta, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t y = 0; y + 1 < eta.size(); ++y) {
    acc += eta[y];
    if (u < acc) return static_cast<Label>(y);
  }
  return static_cast<Label>(eta.size() - 1);
}

Label Oracle::query(std::span<const double> x, Rng& rng) {
  if (!spec_.in_support(x)) throw std::domain_error("query point outside the support");
  meter_.charge();
  eta_buf_.resize(spec_.num_labels());
  spec_.eta(x, eta_buf_);
  return draw_label(eta_buf_, rng);
}

// ---------------------------------------------------------------------------

std::int64_t n_queries(double r, double alpha, double lambda, double delta0, int num_labels, int dim) {
  if (!(r > 0.0)) throw std::domain_error("n_queries: r must be positive");
  if (!(lambda > 0.0)) throw std::domain_error("n_queries: lambda must be positive");
  if (!(delta0 > 0.0 && delta0 < 1.0)) throw std::domain_error("n_queries: delta0 must lie in (0,1)");
  if (num_labels < 2) throw std::domain_error("n_queries: need at least two labels");
  if (!(alpha > 0.0)) throw std::domain_error("n_queries: alpha must be positive");
  const double width = lambda * std::pow(r, alpha);
  const double log_term = std::log(2.0 * num_labels / delta0) - (dim + 1) * std::log(r);
  const double v = std::ceil(2.0 * log_term / (width * width));
  if (!(v < static_cast<double>(kQueryCap))) return kQueryCap;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(v));
}

std::vector<double> estimate_eta(std::span<const Label> labels, int num_labels) {
  if (labels.empty()) throw std::domain_error("estimate_eta: no labels");
  std::vector<double> out(num_labels, 0.0);
  for (Label y : labels) {
    if (y < 0 || y >= num_labels) throw std::domain_error("estimate_eta: label out of range");
    out[y] += 1.0;
  }
  for (auto& v : out) v /= static_cast<double>(labels.size());
  return out;
}

LabelSet eliminate(LabelSet candidates, std::span<const double> eta_hat, double tau) {
  const double top = *std::max_element(eta_hat.begin(), eta_hat.end());
  LabelSet out = candidates;
  for (Label y : candidates.members()) {
    if (top - eta_hat[y] >= tau) out.erase(y);
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const NonAdaptiveTrace& t) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& s : t.levels) {
    levels.push_back({{"level", s.level},
                      {"active_cells", s.active_cells},
                      {"queries_per_cell", s.queries_per_cell},
                      {"queries", s.queries},
                      {"support_empty_cells", s.support_empty_cells}});
  }
  std::vector<std::uint16_t> bits;
  bits.reserve(t.labels.size());
  for (auto s : t.labels.sets()) bits.push_back(s.bits());
  return {{"r_min_level", t.r_min_level},
          {"r_min", t.r_min()},
          {"queries_used", t.queries_used},
          {"levels", levels},
          {"output_level", t.labels.level()},
          {"label_sets", bits}};
}

NonAdaptiveTrace run_nonadaptive(Oracle& oracle, const NonAdaptiveParams& params, Rng& rng,
                                 const CellObserver& observer) {
  const auto& spec = oracle.spec();
  const int d = spec.dim();
  const int L = spec.num_labels();
  if (params.budget < 1) throw std::domain_error("run_nonadaptive: budget must be at least 1");
  if (params.min_level < 0) throw std::domain_error("run_nonadaptive: negative output level");

  NonAdaptiveTrace trace{0, {}, 0, CandidateLabelMap(params.min_level, d, L)};
  std::vector<ActiveCell> finished;
  std::vector<ActiveCell> active;
  for (auto& c : refine(Cell{0, std::vector<std::int64_t>(d, 0)})) {
    active.push_back({std::move(c), LabelSet::all(L)});
  }

  auto per_cell = [&](int level) {
    return n_queries(side_length(level), params.alpha, params.lambda, params.delta0, L, d);
  };

  int level = 1;
  std::int64_t n_r = per_cell(level);
  std::int64_t charged = saturating_mul(static_cast<std::int64_t>(active.size()), n_r);
  Point x(d);
  std::vector<Label> outcomes;

  while (charged <= params.budget && !active.empty() && level <= params.min_level) {
    const double tau = 6.0 * params.lambda * std::pow(side_length(level), params.alpha);
    LevelStats stats{level, static_cast<std::int64_t>(active.size()), n_r, 0, 0};
    std::vector<ActiveCell> next;
    for (auto& a : active) {
      outcomes.clear();
      bool empty_support = false;
      for (std::int64_t j = 0; j < n_r; ++j) {
        if (!spec.sample_in_cell(a.cell, rng, x)) {
          empty_support = true;
          break;
        }
        outcomes.push_back(oracle.query(x, rng));
      }
      stats.queries += static_cast<std::int64_t>(outcomes.size());
      if (empty_support) {
        ++stats.support_empty_cells;
        finished.push_back(std::move(a));
        continue;
      }
      const auto eta_hat = estimate_eta(outcomes, L);
      a.set = eliminate(a.set, eta_hat, tau);
      if (observer) observer(a.cell, eta_hat, a.set);
      if (a.set.size() >= 2) {
        for (auto& child : refine(a.cell)) next.push_back({std::move(child), a.set});
      } else {
        finished.push_back(std::move(a));
      }
    }
    trace.queries_used += stats.queries;
    trace.levels.push_back(stats);
    trace.r_min_level = level;
    active = std::move(next);
    ++level;
    n_r = per_cell(level);
    charged = saturating_add(charged, saturating_mul(static_cast<std::int64_t>(active.size()), n_r));
  }

  for (const auto& a : finished) trace.labels.assign(a.cell, a.set);
  for (const auto& a : active) trace.labels.assign(a.cell, a.set);
  return trace;
}

// ---------------------------------------------------------------------------

int meta_rounds(std::int64_t n, int max_rounds) {
  const double lg = std::floor(std::log(static_cast<double>(n)));
  const double full = lg * lg * lg;
  return static_cast<int>(std::min<double>(full, max_rounds));
}

int meta_min_level(double n0, int dim) {
  if (n0 <= 1.0) return 0;
  return std::max(0, static_cast<int>(std::ceil(std::log2(n0) / dim - 1e-12)));
}

MetaResult run_meta(Oracle& oracle, std::int64_t n, const MetaParams& params, Rng& rng) {
  if (static_cast<double>(n) < std::exp(3.0)) throw std::domain_error("run_meta: budget below e^3");
  if (!(params.delta > 0.0 && params.delta < 1.0)) throw std::domain_error("run_meta: delta must lie in (0,1)");
  if (params.max_rounds < 1) throw std::domain_error("run_meta: max_rounds must be positive");
  const auto& spec = oracle.spec();
  const int d = spec.dim();
  const int L = spec.num_labels();

  const double lg = std::floor(std::log(static_cast<double>(n)));
  const int R = meta_rounds(n, params.max_rounds);
  const double n0 = static_cast<double>(n) / R;
  const int k0 = meta_min_level(n0, d);

  MetaResult res{CandidateLabelMap(k0, d, L)};
  res.rounds_nominal = static_cast<int>(lg * lg * lg);
  res.rounds = R;
  res.per_round_budget = n / R;
  res.delta0 = params.delta / R;
  const std::int64_t start = oracle.meter().used();

  for (int i = 1; i <= R; ++i) {
    if (res.per_round_budget < 1) break;
    NonAdaptiveParams p{res.per_round_budget, res.delta0, static_cast<double>(i) / R, params.lambda, k0};
    auto trace = run_nonadaptive(oracle, p, rng);
    res.finest_level = std::max(res.finest_level, trace.r_min_level);
    std::vector<LabelSet> merged(res.labels.size());
    bool ok = true;
    for (std::uint64_t c = 0; c < merged.size(); ++c) {
      merged[c] = res.labels[c] & trace.labels[c];
      if (merged[c].empty()) {
        ok = false;
        break;
      }
    }
    if (ok) {
      for (std::uint64_t c = 0; c < merged.size(); ++c) res.labels[c] = merged[c];
      ++res.accepted_rounds;
    }
  }
  res.queries_used = oracle.meter().used() - start;
  return res;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<Point, Label>> draw_passive_sample(const DistributionSpec& spec, std::int64_t n,
                                                         Rng& rng) {
  std::vector<std::pair<Point, Label>> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> eta(spec.num_labels());
  for (std::int64_t i = 0; i < n; ++i) {
    Point x(spec.dim());
    spec.sample_x(rng, x);
    spec.eta(x, eta);
    const Label y = draw_label(eta, rng);
    out.emplace_back(std::move(x), y);
  }
  return out;
}

int passive_default_level(std::int64_t n, double alpha, int dim) {
  if (n < 1) return 0;
  return std::max(0, static_cast<int>(std::lround(std::log2(static_cast<double>(n)) / (2.0 * alpha + dim))));
}

namespace {

void majority_from_counts(CandidateLabelMap& map, const std::vector<std::uint32_t>& counts) {
  const int num_labels = map.num_labels();
  for (std::uint64_t c = 0; c < map.size(); ++c) {
    const auto* row = counts.data() + c * num_labels;
    const auto best = std::max_element(row, row + num_labels) - row;  // first maximum
    map[c] = LabelSet::single(static_cast<Label>(best));
  }
}

}  // namespace

CandidateLabelMap passive_plugin(std::span<const std::pair<Point, Label>> sample, int level,
                                 int num_labels) {
  if (sample.empty()) throw std::domain_error("passive_plugin: empty sample");
  const int d = static_cast<int>(sample.front().first.size());
  CandidateLabelMap map(level, d, num_labels);
  std::vector<std::uint32_t> counts(map.size() * num_labels, 0);
  for (const auto& [x, y] : sample) {
    if (y < 0 || y >= num_labels) throw std::domain_error("passive_plugin: label out of range");
    ++counts[map.partition().index_of_point(x) * num_labels + y];
  }
  majority_from_counts(map, counts);
  return map;
}

CandidateLabelMap passive_plugin_streaming(const DistributionSpec& spec, std::int64_t n, int level,
                                           Rng& rng) {
  if (n < 1) throw std::domain_error("passive_plugin: empty sample");
  const int L = spec.num_labels();
  CandidateLabelMap map(level, spec.dim(), L);
  std::vector<std::uint32_t> counts(map.size() * L, 0);
  Point x(spec.dim());
  std::vector<double> eta(L);
  for (std::int64_t i = 0; i < n; ++i) {
    spec.sample_x(rng, x);
    spec.eta(x, eta);
    ++counts[map.partition().index_of_point(x) * L + draw_label(eta, rng)];
  }
  majority_from_counts(map, counts);
  return map;
}

Label np_label(std::span<const int> outcomes, double q) {
  if (!(q > 0.0 && q < 0.5)) throw std::domain_error("np_label: q must lie in (0, 1/2)");
  std::int64_t ones = 0;
  for (int y : outcomes) ones += (y == 1);
  const auto zeros = static_cast<std::int64_t>(outcomes.size()) - ones;
  // log-likelihood ratio of sigma=+1 against sigma=-1 is (ones - zeros) log((1/2+q)/(1/2-q))
  return ones >= zeros ? 1 : 0;
}

}  // namespace margin_active
