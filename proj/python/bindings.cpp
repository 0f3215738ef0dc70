#include <string>
#include <vector>

#include "pybind11/pybind11.h"
#include "pybind11/stl.h"

#include "margin_active/config_error.hpp"
#include "margin_active/experiment.hpp"
#include "margin_active/learner.hpp"
#include "margin_active/lowerbound.hpp"
#include "margin_active/risk.hpp"
#include "margin_active/runner.hpp"

namespace py = pybind11;
using namespace margin_active;

namespace {

nlohmann::json parse(const std::string& text) { return nlohmann::json::parse(text); }

std::vector<int> set_members(LabelSet s) { return s.members(); }

LabelSet to_set(const std::vector<int>& labels) {
  LabelSet s;
  for (int y : labels) {
    if (y < 0 || y >= kMaxLabels) throw py::value_error("label out of range");
    s.insert(y);
  }
  return s;
}

/// One learner run on one spec; returns the outcome as a JSON string.
std::string run_once(const std::string& learner_json, const std::string& spec_json, std::int64_t n,
                     std::uint64_t seed) {
  const auto cfg = learner_from_json(parse(learner_json), "learner");
  const auto spec = spec_from_json(parse(spec_json));
  Rng rng(seed);
  const auto out = run_learner(cfg, *spec, n, rng);
  nlohmann::json j{{"risk", excess_risk_exact(out.classifier, *spec).value},
                   {"queries_used", out.queries_used},
                   {"level", out.classifier.level()},
                   {"labels", out.classifier.labels()}};
  if (out.r_min) j["r_min"] = *out.r_min;
  return j.dump();
}

std::string simulate(const std::string& config_json, std::uint64_t seed, int jobs) {
  auto cfg = experiment_from_json(parse(config_json));
  cfg.master_seed = seed;
  cfg.jobs = jobs;
  const auto result = run_experiment(cfg);
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : result.fits) fits.push_back(to_json(f));
  return nlohmann::json{{"csv", records_to_csv(result.records)}, {"fits", fits}}.dump();
}

std::string verify(const std::string& config_json, std::uint64_t seed) {
  return to_json(verify_dist(parse(config_json), seed)).dump();
}

std::string describe(const std::string& spec_json) { return spec_from_json(parse(spec_json))->describe().dump(); }

std::vector<double> eta_at(const std::string& spec_json, const std::vector<double>& x) {
  return spec_from_json(parse(spec_json))->eta(x);
}

py::tuple cell_of(const std::vector<double>& x, int level) {
  const auto c = cell_at(x, level);
  return py::make_tuple(c.level, c.coords);
}

py::tuple fit(const std::vector<double>& n, const std::vector<double>& risk) {
  if (n.size() != risk.size()) throw py::value_error("n and risk differ in length");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < n.size(); ++i) pts.emplace_back(n[i], risk[i]);
  const auto f = fit_rate(pts);
  return py::make_tuple(f.slope, f.intercept, f.residual_se);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Label-elimination active learning under margin conditions";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedSpecError>(m, "UnsupportedSpecError", PyExc_RuntimeError);
  py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);

  m.def("cell_at", &cell_of, py::arg("x"), py::arg("level"));
  m.def(
      "soft_margin", [](const std::vector<double>& eta) { return soft_margin(std::span<const double>(eta)); },
      py::arg("eta"));
  m.def(
      "sharp_margin", [](const std::vector<double>& eta) { return sharp_margin(std::span<const double>(eta)); },
      py::arg("eta"));
  m.def("n_queries", &n_queries, py::arg("r"), py::arg("alpha"), py::arg("lam"), py::arg("delta0"),
        py::arg("num_labels"), py::arg("dim"));
  m.def(
      "estimate_eta", [](const std::vector<int>& labels, int num_labels) { return estimate_eta(labels, num_labels); },
      py::arg("labels"), py::arg("num_labels"));
  m.def(
      "eliminate",
      [](const std::vector<int>& candidates, const std::vector<double>& eta_hat, double tau) {
        return set_members(eliminate(to_set(candidates), eta_hat, tau));
      },
      py::arg("candidates"), py::arg("eta_hat"), py::arg("tau"));
  m.def(
      "np_label", [](const std::vector<int>& outcomes, double q) { return np_label(outcomes, q); },
      py::arg("outcomes"), py::arg("q"));
  m.def(
      "likelihood_ratio", [](const std::vector<int>& outcomes, double q) { return likelihood_ratio(outcomes, q); },
      py::arg("outcomes"), py::arg("q"));
  m.def(
      "theoretical_exponents",
      [](double alpha, double beta, double beta_sharp, int dim) {
        return to_json(theoretical_exponents(alpha, beta, beta_sharp, dim)).dump();
      },
      py::arg("alpha"), py::arg("beta"), py::arg("beta_sharp"), py::arg("dim"));
  m.def("fit_rate", &fit, py::arg("n"), py::arg("risk"));

  m.def("describe_spec", &describe, py::arg("spec_json"));
  m.def("eta", &eta_at, py::arg("spec_json"), py::arg("x"));
  m.def("run_learner", &run_once, py::arg("learner_json"), py::arg("spec_json"), py::arg("n"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("simulate", &simulate, py::arg("config_json"), py::arg("seed"), py::arg("jobs") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("verify_dist", &verify, py::arg("config_json"), py::arg("seed"), py::call_guard<py::gil_scoped_release>());
}
