#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "margin_active/conditions.hpp"
#include "margin_active/dist.hpp"
#include "margin_active/lowerbound.hpp"
#include "margin_active/risk.hpp"
#include "margin_active/runner.hpp"

namespace margin_active {

inline constexpr const char* kRunCsvHeader =
    "learner,spec,n,seed,risk,risk_se,queries_used,r_min,wall_ms";

struct Evaluation {
  std::string method = "exact";  // exact | monte-carlo
  std::uint64_t mc_points = 100000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t master_seed = 0;
  std::vector<nlohmann::json> specs;
  std::vector<LearnerConfig> learners;
  std::vector<std::int64_t> budgets;
  std::vector<std::uint64_t> seeds;
  Evaluation evaluation;
  std::filesystem::path output_dir = "out";
  int jobs = 1;
  bool record_timing = false;
  nlohmann::json raw;  // the parsed document, for hashing
};

/// Parses and validates; errors are ConfigError with the field path.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

struct RunRecord {
  std::string config_hash;
  std::string learner;
  std::string spec;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  double risk = 0.0;
  std::optional<double> risk_se;
  std::int64_t queries_used = 0;
  std::optional<double> r_min;
  double wall_ms = 0.0;
};

struct SeriesFit {
  std::string learner;
  std::string spec;
  std::vector<std::pair<double, double>> mean_points;  // (n, mean risk)
  std::optional<RateFit> fit;
  std::string error;  // why no fit, when fit is empty
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // sorted by (learner, spec, n, seed)
  std::vector<SeriesFit> fits;
};

/// Runs every (learner, spec, n, seed) combination. Run (spec s, n, seed)
/// draws from Rng(derive_seed(master, seed)), so learners and budgets share
/// common random numbers; the result does not depend on `jobs`.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean risk per n for each (learner, spec), with a power-law fit.
std::vector<SeriesFit> fit_series(const std::vector<RunRecord>& records);

std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv(const std::string& text);
nlohmann::json to_json(const RunRecord& r);
nlohmann::json to_json(const SeriesFit& f);

/// Writes runs.csv, fits.json and rates.svg under the output directory.
void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result);

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (n, risk), risk > 0 plotted
  std::optional<RateFit> fit;
};

/// Standalone log-log SVG: one polyline per series, dashed fitted lines with
/// slope labels, legend, ticks at powers of two on the n axis.
std::string render_plot_svg(const std::vector<PlotSeries>& series, const std::string& title);
void emit_plot(const std::vector<PlotSeries>& series, const std::filesystem::path& path,
               const std::string& title = "excess risk vs budget");
std::vector<PlotSeries> plot_series_from(const std::vector<SeriesFit>& fits);

struct VerifyBundle {
  nlohmann::json spec;
  std::vector<ConditionReport> reports;
  bool pass = true;
};

nlohmann::json to_json(const VerifyBundle& b);

/// Runs the condition checks named under "checks" in the config.
VerifyBundle verify_dist(const nlohmann::json& config, std::uint64_t seed, std::uint64_t mc_override = 0);

struct LowerBoundStudy {
  std::vector<EnsembleResult> ensembles;  // one per budget
  std::vector<SeriesFit> fits;
  nlohmann::json checks;
  bool checks_pass = true;
};

/// Ensemble study over a budget grid plus the supporting-lemma checks
/// named in the config.
LowerBoundStudy run_lowerbound_study(const nlohmann::json& config, std::uint64_t seed, int jobs);
void write_lowerbound_outputs(const LowerBoundStudy& study, const std::filesystem::path& dir);

/// Reads a JSON file; parse failures become ConfigError at path "".
nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace margin_active
