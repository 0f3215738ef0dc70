// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "margin_active/conditions.hpp"
#include "margin_active/experiment.hpp"
#include "margin_active/learner.hpp"
#include "margin_active/lowerbound.hpp"
#include "margin_active/risk.hpp"
#include "margin_active/runner.hpp"
#include "margin_active/stats.hpp"

using namespace margin_active;

namespace {

struct Ledger {
  int failed = 0;
  std::int64_t budget_runs = 0;
  std::int64_t budget_violations = 0;
  std::vector<std::pair<int, std::string>> lines;

  void report(int id, bool pass, const std::string& name, const std::string& detail, double seconds) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, "criterion %2d %s  %-28s %s [%.1fs]", id, pass ? "PASS" : "FAIL", name.c_str(),
                  detail.c_str(), seconds);
    std::fprintf(stderr, "%s\n", buf);
    lines.emplace_back(id, buf);
    if (!pass) ++failed;
  }

  void print() {
    std::sort(lines.begin(), lines.end());
    for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
    std::printf("%d of %zu criteria failed\n", failed, lines.size());
  }

  void charge(std::int64_t used, std::int64_t n) {
    ++budget_runs;
    if (used > n) ++budget_violations;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

LearnerConfig learner(const std::string& type, double lambda = 1.0) {
  LearnerConfig c;
  c.id = type;
  c.type = type;
  c.lambda = lambda;
  return c;
}

// ---------------------------------------------------------------------------

void never_eliminate_bayes(Ledger& ledger) {
  Stopwatch clock;
  struct Case {
    std::string name;
    SpecPtr spec;
    double lambda;
  };
  const std::vector<Case> cases{
      {"ramp3", std::make_shared<RampSpec>(RampSpec::Params{1, 3, 0.4, 0.6, 1.0, 0.1}), 0.6},
      {"figure1", make_figure1_spec({}), 1.0},
      {"lowerbound", spec_from_json({{"family", "lowerbound"}, {"n", 16384}, {"seed", 5}}), 1.0},
  };
  const int runs = 200;
  const std::int64_t n0 = 1 << 16;
  const double delta0 = 0.05;
  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    int misses = 0;
    for (int s = 0; s < runs; ++s) {
      BudgetMeter meter(n0);
      Oracle oracle(*c.spec, meter);
      Rng rng(derive_seed(0xacce55, static_cast<std::uint64_t>(s)));
      const NonAdaptiveParams params{n0, delta0, 1.0, c.lambda, meta_min_level(static_cast<double>(n0), 1)};
      const auto trace = run_nonadaptive(oracle, params, rng);
      ledger.charge(meter.used(), n0);
      const auto& map = trace.labels;
      bool lost = false;
      for (std::uint64_t i = 0; i < map.size() && !lost; ++i) {
        const auto bayes = *c.spec->cell_bayes_labels(map.partition().cell(i));
        lost = !bayes.subset_of(map[i]);
      }
      misses += lost ? 1 : 0;
    }
    const double freq = static_cast<double>(misses) / runs;
    const double limit = delta0 + 3.0 * std::sqrt(delta0 * (1.0 - delta0) / runs);
    pass = pass && freq <= limit;
    detail += fmt("%s=%.3f ", c.name.c_str(), freq);
    if (&c == &cases.back()) detail += fmt("(limit %.3f)", limit);
  }
  const double t = clock.seconds();
  ledger.report(1, pass && t <= 300.0, "never eliminate Bayes", detail, t);
}

void risk_decomposition(Ledger& ledger) {
  Stopwatch clock;
  Rng rng(31337);
  double worst = 0.0;
  int checked = 0;
  const std::int64_t n = 1 << 12;
  for (int draw = 0; draw < 20; ++draw) {
    const auto p = make_lower_bound_params(n, 1.0, 1.0, 1.0, 1);
    const LowerBoundSpec spec(p, sample_zsigma(p, rng));
    const int fine = p.level + 3;
    const DyadicPartition part(fine, 1);

    std::vector<CellwiseClassifier> hs{CellwiseClassifier::constant(1, 0), CellwiseClassifier::constant(1, 1)};
    {
      BudgetMeter meter(n);
      Oracle oracle(spec, meter);
      hs.push_back(np_strategy(oracle, spec, n, UniformAllocation{}, *make_np_labeling(), rng));
      ledger.charge(meter.used(), n);
    }
    hs.push_back(passive_plugin_streaming(spec, n, fine, rng).to_classifier());
    std::vector<Label> random(part.size());
    for (auto& y : random) y = static_cast<Label>(rng.uniform_index(2));
    hs.emplace_back(fine, 1, random);

    for (const auto& h : hs) {
      const double exact = excess_risk_exact(h, spec).value;
      double bumps = 0.0, cells = 0.0;
      for (double v : lb_cell_risks(spec, h)) bumps += v;
      for (double v : risk_by_cell(h, spec, p.level)) cells += v;
      worst = std::max({worst, std::abs(exact - bumps), std::abs(exact - cells)});
      ++checked;
    }
  }
  ledger.report(3, worst <= 1e-12, "risk decomposition", fmt("%d pairs, max |diff| = %.2e (tol 1e-12)", checked, worst),
                clock.seconds());
}

void no_gain_trend(Ledger& ledger) {
  Stopwatch clock;
  const std::vector<EnsembleLearner> learners{make_ensemble_learner(learner("meta")),
                                              make_ensemble_learner(learner("passive"))};
  std::vector<std::pair<double, double>> meta_pts, passive_pts;
  for (int e = 10; e <= 16; ++e) {
    const std::int64_t n = std::int64_t{1} << e;
    const auto res = run_ensemble(n, 1.0, 1.0, 1.0, 1, learners, 50, 12345, worker_count());
    for (std::size_t l = 0; l < learners.size(); ++l) {
      for (const auto& q : res.queries[l]) ledger.charge(q, n);
    }
    meta_pts.emplace_back(static_cast<double>(n), res.mean[0]);
    passive_pts.emplace_back(static_cast<double>(n), res.mean[1]);
  }
  const double meta = fit_rate(meta_pts).slope;
  const double passive = fit_rate(passive_pts).slope;
  const double target = -2.0 / 3.0;
  const bool pass = std::abs(meta - target) <= 0.15 && meta >= passive - 0.1;
  const double t = clock.seconds();
  ledger.report(4, pass && t <= 1800.0, "no-gain trend",
                fmt("meta slope %.3f (target %.3f +- 0.15), passive slope %.3f", meta, target, passive), t);
}

void gain_trend(Ledger& ledger) {
  Stopwatch clock;
  // Same setup as configs/gain_ramp.json.
  nlohmann::json cfg{
      {"name", "gain under a unique Bayes label"},
      {"seed", 2024},
      {"specs", {{{"family", "ramp"}, {"dim", 1}, {"labels", 2}, {"crossing", 1.0 / 3.0}, {"slope", 0.75}}}},
      {"learners",
       {{{"id", "active"}, {"type", "nonadaptive"}, {"lambda", 0.75}, {"alpha", 1.0}, {"delta", 0.05}, {"level", 12}},
        {{"id", "passive"}, {"type", "passive"}, {"alpha", 1.0}}}},
      {"seeds", 16},
      {"evaluation", {{"method", "exact"}}}};
  std::vector<std::int64_t> budgets;
  for (int e = 34; e <= 50; ++e) budgets.push_back(std::llround(std::pow(2.0, e / 2.0)));
  cfg["budgets"] = budgets;
  auto config = experiment_from_json(cfg);
  config.master_seed = 2024;
  config.jobs = worker_count();
  const auto result = run_experiment(config);
  for (const auto& r : result.records) ledger.charge(r.queries_used, r.n);
  double active = 0.0, passive = 0.0;
  bool fitted = true;
  for (const auto& f : result.fits) {
    if (!f.fit) {
      fitted = false;
      continue;
    }
    (f.learner == "active" ? active : passive) = f.fit->slope;
  }
  const bool pass = fitted && active <= -0.85 && passive >= -0.8;
  ledger.report(5, pass, "gain trend (unique Bayes)",
                fmt("active slope %.3f (<= -0.85), passive slope %.3f (>= -0.80)", active, passive),
                clock.seconds());
}

void np_optimality(Ledger& ledger) {
  Stopwatch clock;
  const std::vector<std::string> rules{"np", "always1", "random", "minority", "majority"};
  std::vector<EnsembleLearner> learners;
  for (const auto& r : rules) learners.push_back(make_ensemble_learner(learner(r)));
  const std::int64_t n = 1 << 14;
  const auto res = run_ensemble(n, 1.0, 1.0, 1.0, 1, learners, 200, 777, worker_count());
  for (std::size_t l = 0; l < learners.size(); ++l) {
    for (const auto& q : res.queries[l]) ledger.charge(q, n);
  }
  // paired differences over draws
  bool pass = true;
  std::string detail = fmt("np=%.3e", res.mean[0]);
  for (std::size_t l = 1; l < rules.size(); ++l) {
    std::vector<double> diff(res.draws);
    for (int d = 0; d < res.draws; ++d) diff[d] = res.risks[0][d] - res.risks[l][d];
    const auto ms = mean_se(diff);
    const bool ok = rules[l] == "majority" ? std::abs(ms.mean) <= 2.0 * ms.se + 1e-15 : ms.mean <= -2.0 * ms.se;
    pass = pass && ok;
    detail += fmt(" %s: diff %.2e se %.1e", rules[l].c_str(), ms.mean, ms.se);
  }
  ledger.report(6, pass, "NP labeling optimality", detail, clock.seconds());
}

void likelihood_ratio(Ledger& ledger) {
  Stopwatch clock;
  bool pass = true;
  std::string detail;
  for (const auto& [n_max, q] : std::vector<std::pair<int, double>>{{20, 0.05}, {20, 0.1}, {12, 0.2}}) {
    const auto rep = likelihood_ratio_bound_check(n_max, q);
    pass = pass && rep.pass && rep.max_ratio <= 16.0 * std::exp(2.0);
    detail += fmt("q=%.2f n<=%d max %.3f; ", q, n_max, rep.max_ratio);
  }
  detail += fmt("bound %.4f", 16.0 * std::exp(2.0));
  ledger.report(7, pass, "likelihood-ratio bound", detail, clock.seconds());
}

void tail_checks(Ledger& ledger) {
  Stopwatch clock;
  Rng rng(8080);
  const auto anti = anticoncentration_check(0.05, 200, 100000, rng);
  const bool anti_ok = anti.pass && std::abs(anti.frequency - anti.reference) <= 3.0 * anti.se;
  bool sweep_ok = true;
  for (double gap : {0.01, 0.02, 0.05, 0.1, 0.2, 0.3}) {
    for (int m : {1, 2, 5, 10, 50, 200, 1000}) {
      if (m > 0.5 / (gap * gap) * (1.0 + 1e-12)) continue;
      sweep_ok = sweep_ok && anticoncentration_check(gap, m, 20000, rng).frequency >= 0.01;
    }
  }
  const auto chern = chernoff_check(0.5, 100, 0.2, 100000, rng);
  const bool chern_ok = chern.pass && chern.frequency <= chern.bound &&
                        std::abs(chern.frequency - chern.reference) <= 3.0 * chern.se;
  ledger.report(8, anti_ok && sweep_ok && chern_ok, "anti-concentration, Chernoff",
                fmt("anti freq %.4f vs exact %.4f (+-%.4f), sweep min>=0.01 %s; chernoff tail %.4f vs exact %.4f, "
                    "bound %.3f",
                    anti.frequency, anti.reference, 3.0 * anti.se, sweep_ok ? "yes" : "no", chern.frequency,
                    chern.reference, chern.bound),
                clock.seconds());
}

void condition_checkers(Ledger& ledger) {
  Stopwatch clock;
  const RampSpec ramp({1, 2, 1.0 / 3.0, 0.75, 1.0, 0.0});
  const auto fig = make_figure1_spec({});
  const auto lb_p = make_lower_bound_params(1 << 14, 1.0, 1.0, 1.0, 1);
  const DyadicPartition lb_part(lb_p.level, 1);
  const LowerBoundSpec lb(lb_p, {lb_p.level, 1, std::vector<std::uint8_t>(lb_part.size(), 1),
                                 std::vector<std::int8_t>(lb_part.size(), 1)});
  const RegionSpec skewed(1, 2, {{"heavy", {0.0}, {0.5}, 0.99, {0.3, 0.7}}, {"light", {0.5}, {1.0}, 0.01, {0.3, 0.7}}},
                          "skewed");
  const std::vector<double> taus{0.01, 0.02, 0.05, 0.1, 0.2};

  struct Expect {
    std::string name;
    std::function<ConditionReport()> run;
    bool should_pass;
  };
  const std::vector<Expect> cases{
      {"ramp holder", [&] { return check_holder(ramp, 0.75, 1.0, 256, 1); }, true},
      {"ramp tmc", [&] { return check_tmc(ramp, 1.0, 1.5, taus, 100000, 2); }, true},
      {"ramp density", [&] { return check_strong_density(ramp, 1.0, 8, 0, 3); }, true},
      {"figure1 rmc", [&] { return check_rmc(*fig, 0.5, 1.0, 1.0, 5.0, taus, 100000, 4); }, true},
      {"lb holder", [&] { return check_holder(lb, 1.0, 1.0, 512, 5); }, true},
      {"lb density", [&] { return check_strong_density(lb, 1.0, lb_p.level, 0, 6); }, true},
      {"ramp holder lambda/2", [&] { return check_holder(ramp, 0.375, 1.0, 256, 7); }, false},
      {"figure1 rmc eps=0", [&] { return check_rmc(*fig, 0.0, 1.0, 1.0, 5.0, taus, 100000, 8); }, false},
      {"skewed density", [&] { return check_strong_density(skewed, 0.5, 4, 0, 9); }, false},
  };
  bool pass = true;
  int pos = 0, neg = 0;
  std::string wrong;
  for (const auto& c : cases) {
    const auto rep = c.run();
    const bool ok = c.should_pass ? rep.pass : (!rep.pass && !rep.witnesses.empty());
    (c.should_pass ? pos : neg) += ok ? 1 : 0;
    if (!ok) wrong += " " + c.name;
    pass = pass && ok;
  }
  ledger.report(9, pass, "condition checkers",
                fmt("%d/6 positive, %d/3 negative with witnesses%s", pos, neg, wrong.empty() ? "" : (";" + wrong).c_str()),
                clock.seconds());
}

void determinism(Ledger& ledger) {
  Stopwatch clock;
  const auto cfg = nlohmann::json::parse(R"({
    "name": "determinism",
    "seed": 99,
    "specs": [
      {"family": "ramp", "labels": 3, "crossing": 0.4, "slope": 0.6, "floor": 0.1},
      {"family": "figure1"},
      {"family": "lowerbound", "n": 4096, "seed": 2}
    ],
    "learners": [
      {"id": "meta", "type": "meta", "lambda": 0.6, "max_rounds": 6},
      {"id": "passive", "type": "passive"}
    ],
    "budgets": [2048, 8192],
    "seeds": 3,
    "evaluation": {"method": "monte-carlo", "mc_points": 20000}
  })");
  auto config = experiment_from_json(cfg);
  const auto first = run_experiment(config);
  for (const auto& r : first.records) ledger.charge(r.queries_used, r.n);
  const auto a = records_to_csv(first.records);
  const auto b = records_to_csv(run_experiment(config).records);
  config.jobs = 3;
  const auto c = records_to_csv(run_experiment(config).records);
  ledger.report(10, a == b && a == c, "determinism",
                fmt("%zu bytes; rerun %s, 3 workers %s", a.size(), a == b ? "identical" : "DIFFERS",
                    a == c ? "identical" : "DIFFERS"),
                clock.seconds());
}

}  // namespace

int main() {
  Ledger ledger;
  never_eliminate_bayes(ledger);
  risk_decomposition(ledger);
  no_gain_trend(ledger);
  gain_trend(ledger);
  np_optimality(ledger);
  likelihood_ratio(ledger);
  tail_checks(ledger);
  condition_checkers(ledger);
  determinism(ledger);
  ledger.report(2, ledger.budget_violations == 0, "budget safety",
                fmt("%lld runs, %lld over budget", static_cast<long long>(ledger.budget_runs),
                    static_cast<long long>(ledger.budget_violations)),
                0.0);
  ledger.print();
  return ledger.failed == 0 ? 0 : 1;
}
