#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "margin_active/config_error.hpp"
#include "margin_active/experiment.hpp"

namespace fs = std::filesystem;
using namespace margin_active;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;
  std::uint64_t mc_points = 0;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed; overrides MARGIN_ACTIVE_SEED and the config");
  cmd->add_option("--out", f.out, "output directory; overrides the config");
  cmd->add_option("--jobs", f.jobs, "parallel workers")->check(CLI::PositiveNumber);
  cmd->add_option("--mc-points", f.mc_points, "Monte-Carlo points for risk or condition checks")
      ->check(CLI::PositiveNumber);
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("MARGIN_ACTIVE_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw ConfigError("MARGIN_ACTIVE_SEED", "not an unsigned integer");
  }
}

std::uint64_t resolve_seed(const CommonFlags& f, const nlohmann::json& cfg) {
  if (f.seed) return *f.seed;
  if (auto s = env_seed()) return *s;
  return field_or<std::uint64_t>(cfg, "seed", 0, "");
}

fs::path resolve_out(const CommonFlags& f, const nlohmann::json& cfg) {
  if (!f.out.empty()) return f.out;
  return field_or<std::string>(cfg, "output_dir", "out", "");
}

int resolve_jobs(const CommonFlags& f, const nlohmann::json& cfg) {
  if (f.jobs > 0) return f.jobs;
  return field_or<int>(cfg, "jobs", 1, "");
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int cmd_simulate(const CommonFlags& f) {
  auto raw = load_json_file(f.config);
  auto cfg = experiment_from_json(raw);
  cfg.master_seed = resolve_seed(f, raw);
  cfg.output_dir = resolve_out(f, raw);
  cfg.jobs = resolve_jobs(f, raw);
  if (f.mc_points) cfg.evaluation.mc_points = f.mc_points;
  if (f.timing) cfg.record_timing = true;
  const auto result = run_experiment(cfg);
  write_experiment_outputs(cfg, result);
  std::cout << "wrote " << result.records.size() << " runs to " << (cfg.output_dir / "runs.csv").string() << "\n";
  for (const auto& fit : result.fits) {
    std::cout << "  " << fit.learner << " on " << fit.spec << ": ";
    if (fit.fit) {
      std::cout << "slope " << fit.fit->slope << " (residual se " << fit.fit->residual_se << ")\n";
    } else {
      std::cout << "no fit (" << fit.error << ")\n";
    }
  }
  return 0;
}

int cmd_lowerbound(const CommonFlags& f) {
  const auto raw = load_json_file(f.config);
  const auto study = run_lowerbound_study(raw, resolve_seed(f, raw), resolve_jobs(f, raw));
  const auto out = resolve_out(f, raw);
  write_lowerbound_outputs(study, out);
  for (const auto& e : study.ensembles) {
    std::cout << "n=" << e.n << " (r=" << e.params.r() << ")";
    for (std::size_t i = 0; i < e.learner_ids.size(); ++i) {
      std::cout << "  " << e.learner_ids[i] << "=" << e.mean[i] << "±" << e.se[i];
    }
    std::cout << "\n";
  }
  for (const auto& fit : study.fits) {
    if (fit.fit) std::cout << "  " << fit.learner << ": slope " << fit.fit->slope << "\n";
  }
  std::cout << "supporting checks: " << (study.checks_pass ? "pass" : "FAIL") << "\n";
  return study.checks_pass ? 0 : 1;
}

int cmd_verify(const CommonFlags& f) {
  const auto raw = load_json_file(f.config);
  const auto bundle = verify_dist(raw, resolve_seed(f, raw), f.mc_points);
  const auto out = resolve_out(f, raw);
  write_file(out / "verify.json", to_json(bundle).dump(2) + "\n");
  for (const auto& r : bundle.reports) {
    std::cout << r.condition << ": " << (r.pass ? "pass" : "FAIL") << " (measured constant " << r.measured_constant
              << ")\n";
  }
  return bundle.pass ? 0 : 1;
}

int cmd_plot(const std::string& csv_path, const std::string& svg_path, const std::string& title) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot read " + csv_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto records = records_from_csv(ss.str());
  emit_plot(plot_series_from(fit_series(records)), svg_path, title);
  std::cout << "wrote " << svg_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for label-elimination active learning under margin conditions"};
  app.require_subcommand(1);

  CommonFlags sim_flags, lb_flags, verify_flags;
  auto* sim = app.add_subcommand("simulate", "rate experiments over a budget grid");
  add_common(sim, sim_flags);
  sim->add_flag("--timing", sim_flags.timing, "record wall-clock times in the CSV");

  auto* lb = app.add_subcommand("lowerbound", "coin-ensemble study and supporting checks");
  add_common(lb, lb_flags);

  auto* verify = app.add_subcommand("verify-dist", "check a spec against its stated conditions");
  add_common(verify, verify_flags);

  std::string csv_path, svg_path, title = "excess risk vs budget";
  auto* plot = app.add_subcommand("plot", "draw a rate chart from a runs CSV");
  plot->add_option("--table", csv_path, "runs CSV written by simulate")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_path, "SVG file to write")->required();
  plot->add_option("--title", title, "chart title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_flags);
    if (lb->parsed()) return cmd_lowerbound(lb_flags);
    if (verify->parsed()) return cmd_verify(verify_flags);
    if (plot->parsed()) return cmd_plot(csv_path, svg_path, title);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << (e.path().empty() ? "<root>" : e.path()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
