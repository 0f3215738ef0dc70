#include "margin_active/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "margin_active/config_error.hpp"
#include "margin_active/stats.hpp"

namespace margin_active {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

// Rebases a ConfigError raised by spec_from_json ("spec...") onto `where`.
[[noreturn]] void rethrow_spec_error(const ConfigError& e, const std::string& where) {
  std::string p = e.path();
  if (p.rfind("spec", 0) == 0) p = where + p.substr(4);
  std::string msg = e.what();
  const auto colon = msg.find(": ");
  if (colon != std::string::npos) msg = msg.substr(colon + 2);
  throw ConfigError(p, msg);
}

SpecPtr build_spec(const nlohmann::json& j, const std::string& where) {
  try {
    return spec_from_json(j);
  } catch (const ConfigError& e) {
    rethrow_spec_error(e, where);
  } catch (const std::exception& e) {
    throw ConfigError(where, e.what());
  }
}

template <typename F>
void parallel_for(std::size_t count, int jobs, F&& body) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int threads = static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

constexpr std::uint64_t kEvalSalt = 0x6a09e667f3bcc909ULL;

}  // namespace

nlohmann::json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
}

std::string config_hash(const nlohmann::json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be an object");
  ExperimentConfig c;
  c.raw = j;
  c.name = field_or<std::string>(j, "name", c.name, "");
  c.master_seed = field_or<std::uint64_t>(j, "seed", 0, "");

  if (j.contains("specs")) {
    if (!j["specs"].is_array() || j["specs"].empty()) throw ConfigError("specs", "expected a nonempty array");
    for (std::size_t i = 0; i < j["specs"].size(); ++i) c.specs.push_back(j["specs"][i]);
  } else if (j.contains("spec")) {
    c.specs.push_back(j["spec"]);
  } else {
    throw ConfigError("spec", "missing required field");
  }
  std::set<std::string> spec_ids;
  for (std::size_t i = 0; i < c.specs.size(); ++i) {
    const auto where = j.contains("specs") ? index_path("specs", i) : std::string("spec");
    const auto spec = build_spec(c.specs[i], where);
    if (!spec_ids.insert(spec->id()).second) throw ConfigError(where, "duplicate spec id '" + spec->id() + "'");
  }

  if (!j.contains("learners") || !j["learners"].is_array() || j["learners"].empty()) {
    throw ConfigError("learners", "expected a nonempty array");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j["learners"].size(); ++i) {
    const auto path = index_path("learners", i);
    auto l = learner_from_json(j["learners"][i], path);
    if (!ids.insert(l.id).second) throw ConfigError(join_path(path, "id"), "duplicate learner id '" + l.id + "'");
    c.learners.push_back(std::move(l));
  }

  c.budgets = require_field<std::vector<std::int64_t>>(j, "budgets", "");
  if (c.budgets.empty()) throw ConfigError("budgets", "expected a nonempty array");
  for (std::size_t i = 0; i < c.budgets.size(); ++i) {
    if (c.budgets[i] < 1) throw ConfigError(index_path("budgets", i), "budget must be positive");
    if (i > 0 && c.budgets[i] <= c.budgets[i - 1]) {
      throw ConfigError(index_path("budgets", i), "budget grid must be strictly increasing");
    }
  }

  if (!j.contains("seeds")) throw ConfigError("seeds", "missing required field");
  if (j["seeds"].is_number_integer()) {
    const auto k = j["seeds"].get<std::int64_t>();
    if (k < 1) throw ConfigError("seeds", "seed count must be positive");
    for (std::int64_t s = 0; s < k; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    c.seeds = require_field<std::vector<std::uint64_t>>(j, "seeds", "");
    if (c.seeds.empty()) throw ConfigError("seeds", "expected a nonempty array");
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
      if (!seen.insert(c.seeds[i]).second) throw ConfigError(index_path("seeds", i), "seeds must be distinct");
    }
  }

  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    c.evaluation.method = field_or<std::string>(e, "method", c.evaluation.method, "evaluation");
    c.evaluation.mc_points = field_or<std::uint64_t>(e, "mc_points", c.evaluation.mc_points, "evaluation");
    if (c.evaluation.method != "exact" && c.evaluation.method != "monte-carlo") {
      throw ConfigError("evaluation.method", "expected 'exact' or 'monte-carlo'");
    }
    if (c.evaluation.mc_points == 0) throw ConfigError("evaluation.mc_points", "must be positive");
  }
  c.output_dir = field_or<std::string>(j, "output_dir", "out", "");
  c.jobs = field_or<int>(j, "jobs", 1, "");
  if (c.jobs < 1) throw ConfigError("jobs", "must be positive");
  c.record_timing = field_or<bool>(j, "record_timing", false, "");
  return c;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::vector<SpecPtr> specs;
  for (std::size_t i = 0; i < config.specs.size(); ++i) {
    specs.push_back(build_spec(config.specs[i], index_path("specs", i)));
  }
  const auto hash = config_hash(config.raw);

  struct Task {
    std::size_t learner, spec, budget, seed;
  };
  std::vector<Task> tasks;
  for (std::size_t l = 0; l < config.learners.size(); ++l) {
    for (std::size_t s = 0; s < specs.size(); ++s) {
      for (std::size_t b = 0; b < config.budgets.size(); ++b) {
        for (std::size_t k = 0; k < config.seeds.size(); ++k) tasks.push_back({l, s, b, k});
      }
    }
  }

  ExperimentResult result;
  result.records.resize(tasks.size());
  parallel_for(tasks.size(), config.jobs, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& spec = *specs[task.spec];
    const auto& learner = config.learners[task.learner];
    const auto n = config.budgets[task.budget];
    const auto seed = config.seeds[task.seed];
    const auto stream = derive_seed(config.master_seed, seed);

    const auto start = std::chrono::steady_clock::now();
    Rng rng(stream);
    const auto out = run_learner(learner, spec, n, rng);
    const auto stop = std::chrono::steady_clock::now();
    if (out.queries_used > n) throw BudgetError("learner '" + learner.id + "' exceeded its budget");

    RunRecord rec;
    rec.config_hash = hash;
    rec.learner = learner.id;
    rec.spec = spec.id();
    rec.n = n;
    rec.seed = seed;
    rec.queries_used = out.queries_used;
    rec.r_min = out.r_min;
    if (config.evaluation.method == "exact") {
      rec.risk = excess_risk_exact(out.classifier, spec).value;
    } else {
      Rng eval(stream ^ kEvalSalt);
      const auto est = excess_risk_mc(out.classifier, spec, config.evaluation.mc_points, eval);
      rec.risk = est.value;
      rec.risk_se = est.standard_error;
    }
    if (config.record_timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    }
    result.records[t] = std::move(rec);
  });

  std::sort(result.records.begin(), result.records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.learner, a.spec, a.n, a.seed) < std::tie(b.learner, b.spec, b.n, b.seed);
  });
  result.fits = fit_series(result.records);
  return result;
}

std::vector<SeriesFit> fit_series(const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::map<std::int64_t, std::vector<double>>> groups;
  for (const auto& r : records) groups[{r.learner, r.spec}][r.n].push_back(r.risk);
  std::vector<SeriesFit> fits;
  for (const auto& [key, by_n] : groups) {
    SeriesFit f;
    f.learner = key.first;
    f.spec = key.second;
    for (const auto& [n, risks] : by_n) f.mean_points.emplace_back(static_cast<double>(n), mean_se(risks).mean);
    try {
      f.fit = fit_rate(f.mean_points);
    } catch (const std::domain_error& e) {
      f.error = e.what();
    }
    fits.push_back(std::move(f));
  }
  return fits;
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out = std::string(kRunCsvHeader) + "\n";
  for (const auto& r : records) {
    out += r.learner + "," + r.spec + "," + std::to_string(r.n) + "," + std::to_string(r.seed) + "," +
           format_double(r.risk) + "," + (r.risk_se ? format_double(*r.risk_se) : "") + "," +
           std::to_string(r.queries_used) + "," + (r.r_min ? format_double(*r.r_min) : "") + "," +
           format_fixed(r.wall_ms, 3) + "\n";
  }
  return out;
}

std::vector<RunRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) {
    throw std::invalid_argument("runs CSV: unexpected header");
  }
  std::vector<RunRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw std::invalid_argument("runs CSV: row " + std::to_string(row) + " has wrong arity");
    try {
      RunRecord r;
      r.learner = f[0];
      r.spec = f[1];
      r.n = std::stoll(f[2]);
      r.seed = std::stoull(f[3]);
      r.risk = std::stod(f[4]);
      if (!f[5].empty()) r.risk_se = std::stod(f[5]);
      r.queries_used = std::stoll(f[6]);
      if (!f[7].empty()) r.r_min = std::stod(f[7]);
      r.wall_ms = std::stod(f[8]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("runs CSV: row " + std::to_string(row) + " is malformed");
    }
  }
  return out;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j{{"config_hash", r.config_hash}, {"learner", r.learner}, {"spec", r.spec},
                   {"n", r.n},                     {"seed", r.seed},       {"risk", r.risk},
                   {"queries_used", r.queries_used}, {"wall_ms", r.wall_ms}};
  j["risk_se"] = r.risk_se ? nlohmann::json(*r.risk_se) : nlohmann::json();
  j["r_min"] = r.r_min ? nlohmann::json(*r.r_min) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const SeriesFit& f) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [n, r] : f.mean_points) pts.push_back({n, r});
  nlohmann::json j{{"learner", f.learner}, {"spec", f.spec}, {"mean_points", pts}};
  if (f.fit) {
    j["fit"] = to_json(*f.fit);
  } else {
    j["fit"] = nullptr;
    j["error"] = f.error;
  }
  return j;
}

std::vector<PlotSeries> plot_series_from(const std::vector<SeriesFit>& fits) {
  std::set<std::string> specs;
  for (const auto& f : fits) specs.insert(f.spec);
  std::vector<PlotSeries> out;
  for (const auto& f : fits) {
    const auto label = specs.size() > 1 ? f.learner + " / " + f.spec : f.learner;
    out.push_back({label, f.mean_points, f.fit});
  }
  return out;
}

void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  ensure_dir(config.output_dir);
  write_text(config.output_dir / "runs.csv", records_to_csv(result.records));
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : result.fits) fits.push_back(to_json(f));
  const nlohmann::json doc{{"name", config.name},
                           {"config_hash", config_hash(config.raw)},
                           {"master_seed", config.master_seed},
                           {"runs", result.records.size()},
                           {"fits", fits}};
  write_text(config.output_dir / "fits.json", doc.dump(2) + "\n");
  emit_plot(plot_series_from(result.fits), config.output_dir / "rates.svg", config.name);
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string render_plot_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  if (series.empty()) throw std::domain_error("emit_plot: empty table");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [n, r] : s.points) {
      if (!(n > 0.0)) continue;
      xmin = std::min(xmin, std::log2(n));
      xmax = std::max(xmax, std::log2(n));
      if (r > 0.0) {
        ymin = std::min(ymin, std::log10(r));
        ymax = std::max(ymax, std::log10(r));
      }
    }
  }
  if (!std::isfinite(xmin)) throw std::domain_error("emit_plot: no positive budgets");
  if (!std::isfinite(ymin)) {
    ymin = -1.0;
    ymax = 0.0;
  }
  xmin = std::floor(xmin);
  xmax = std::ceil(xmax);
  if (xmax <= xmin) xmax = xmin + 1.0;
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (ymax <= ymin) ymax = ymin + 1.0;

  const double width = 760, height = 480, left = 80, right = 220, top = 50, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](double lg2n) { return left + (lg2n - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double lg10r) { return top + (ymax - lg10r) / (ymax - ymin) * ph; };
  auto f2 = [](double v) { return format_fixed(v, 2); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << f2(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";
  svg << "<g class=\"axes\" stroke=\"#333\" fill=\"none\">\n";
  svg << "<rect x=\"" << f2(left) << "\" y=\"" << f2(top) << "\" width=\"" << f2(pw) << "\" height=\"" << f2(ph)
      << "\"/>\n</g>\n";

  const int xstep = (xmax - xmin) > 12 ? 2 : 1;
  svg << "<g class=\"xticks\">\n";
  for (int e = static_cast<int>(xmin); e <= static_cast<int>(xmax); e += xstep) {
    const double x = sx(e);
    svg << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(top + ph) << "\" x2=\"" << f2(x) << "\" y2=\""
        << f2(top + ph + 5) << "\" stroke=\"#333\"/>";
    svg << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(top) << "\" x2=\"" << f2(x) << "\" y2=\"" << f2(top + ph)
        << "\" stroke=\"#eee\"/>";
    svg << "<text x=\"" << f2(x) << "\" y=\"" << f2(top + ph + 18) << "\" text-anchor=\"middle\">2<tspan dy=\"-5\" font-size=\"9\">"
        << e << "</tspan></text>\n";
  }
  svg << "</g>\n<g class=\"yticks\">\n";
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
    const double y = sy(e);
    svg << "<line x1=\"" << f2(left - 5) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(left) << "\" y2=\"" << f2(y)
        << "\" stroke=\"#333\"/>";
    svg << "<line x1=\"" << f2(left) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(left + pw) << "\" y2=\"" << f2(y)
        << "\" stroke=\"#eee\"/>";
    svg << "<text x=\"" << f2(left - 8) << "\" y=\"" << f2(y + 4) << "\" text-anchor=\"end\">10<tspan dy=\"-5\" font-size=\"9\">"
        << e << "</tspan></text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << f2(left + pw / 2) << "\" y=\"" << f2(height - 15)
      << "\" text-anchor=\"middle\">budget n (log scale)</text>\n";
  svg << "<text transform=\"translate(20," << f2(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">excess risk (log scale)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    std::vector<std::pair<double, double>> pts;
    for (const auto& [n, r] : s.points) {
      if (n > 0.0 && r > 0.0) pts.emplace_back(sx(std::log2(n)), sy(std::log10(r)));
    }
    svg << "<g class=\"series\" data-label=\"" << xml_escape(s.label) << "\">\n";
    if (!pts.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < pts.size(); ++k) svg << (k ? " " : "") << f2(pts[k].first) << "," << f2(pts[k].second);
      svg << "\"/>\n";
      for (const auto& [x, y] : pts) {
        svg << "<circle cx=\"" << f2(x) << "\" cy=\"" << f2(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    if (s.fit && !s.fit->points.empty()) {
      const double n0 = s.fit->points.front().first, n1 = s.fit->points.back().first;
      auto fitted = [&](double n) { return (s.fit->intercept + s.fit->slope * std::log(n)) / std::log(10.0); };
      svg << "<line class=\"fit\" x1=\"" << f2(sx(std::log2(n0))) << "\" y1=\"" << f2(sy(fitted(n0))) << "\" x2=\""
          << f2(sx(std::log2(n1))) << "\" y2=\"" << f2(sy(fitted(n1))) << "\" stroke=\"" << color
          << "\" stroke-dasharray=\"6,4\"/>\n";
      svg << "<text class=\"slope\" x=\"" << f2(sx(std::log2(n1)) + 4) << "\" y=\"" << f2(sy(fitted(n1)))
          << "\" fill=\"" << color << "\">slope " << format_fixed(s.fit->slope, 3) << "</text>\n";
    }
    svg << "</g>\n";
  }

  svg << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    const double y = top + 10 + 20.0 * static_cast<double>(i);
    const double x = left + pw + 60;
    svg << "<rect x=\"" << f2(x) << "\" y=\"" << f2(y - 8) << "\" width=\"14\" height=\"10\" fill=\"" << color
        << "\"/><text x=\"" << f2(x + 20) << "\" y=\"" << f2(y + 1) << "\">" << xml_escape(series[i].label)
        << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<PlotSeries>& series, const fs::path& path, const std::string& title) {
  const auto text = render_plot_svg(series, title);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// verify-dist

nlohmann::json to_json(const VerifyBundle& b) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : b.reports) reports.push_back(to_json(r));
  return {{"spec", b.spec}, {"reports", reports}, {"pass", b.pass}};
}

VerifyBundle verify_dist(const nlohmann::json& config, std::uint64_t seed, std::uint64_t mc_override) {
  if (!config.contains("spec")) throw ConfigError("spec", "missing required field");
  const auto spec = build_spec(config["spec"], "spec");
  if (!config.contains("checks") || !config["checks"].is_object() || config["checks"].empty()) {
    throw ConfigError("checks", "expected a nonempty object");
  }
  const auto& checks = config["checks"];
  for (const auto& [name, _] : checks.items()) {
    if (name != "holder" && name != "tmc" && name != "rmc" && name != "strong_density") {
      throw ConfigError("checks." + name, "unknown check");
    }
  }
  VerifyBundle b;
  b.spec = spec->describe();
  auto mc = [&](const nlohmann::json& c, const std::string& path) {
    return mc_override ? mc_override : field_or<std::uint64_t>(c, "mc_n", 100000, path);
  };
  auto taus = [&](const nlohmann::json& c, const std::string& path) {
    return field_or<std::vector<double>>(c, "taus", {0.01, 0.02, 0.05, 0.1, 0.2}, path);
  };
  try {
    if (checks.contains("holder")) {
      const auto& c = checks["holder"];
      const std::string p = "checks.holder";
      b.reports.push_back(check_holder(*spec, require_field<double>(c, "lambda", p),
                                       require_field<double>(c, "alpha", p), field_or<int>(c, "grid_n", 64, p),
                                       derive_seed(seed, 1)));
    }
    if (checks.contains("tmc")) {
      const auto& c = checks["tmc"];
      const std::string p = "checks.tmc";
      b.reports.push_back(check_tmc(*spec, require_field<double>(c, "beta", p), require_field<double>(c, "c_beta", p),
                                    taus(c, p), mc(c, p), derive_seed(seed, 2)));
    }
    if (checks.contains("rmc")) {
      const auto& c = checks["rmc"];
      const std::string p = "checks.rmc";
      b.reports.push_back(check_rmc(*spec, require_field<double>(c, "eps", p), require_field<double>(c, "beta", p),
                                    require_field<double>(c, "beta_sharp", p), require_field<double>(c, "c_beta", p),
                                    taus(c, p), mc(c, p), derive_seed(seed, 3)));
    }
    if (checks.contains("strong_density")) {
      const auto& c = checks["strong_density"];
      const std::string p = "checks.strong_density";
      b.reports.push_back(check_strong_density(*spec, require_field<double>(c, "c_d", p),
                                               field_or<int>(c, "max_level", 6, p), mc(c, p), derive_seed(seed, 4)));
    }
  } catch (const std::domain_error& e) {
    throw ConfigError("checks", e.what());
  }
  for (const auto& r : b.reports) b.pass = b.pass && r.pass;
  return b;
}

// ---------------------------------------------------------------------------
// lower-bound study

LowerBoundStudy run_lowerbound_study(const nlohmann::json& config, std::uint64_t seed, int jobs) {
  LowerBoundStudy study;
  study.checks = nlohmann::json::object();
  if (config.contains("ensemble")) {
    const auto& e = config["ensemble"];
    const std::string p = "ensemble";
    const double alpha = field_or<double>(e, "alpha", 1.0, p);
    const double beta = field_or<double>(e, "beta", 1.0, p);
    const double lambda = field_or<double>(e, "lambda", 1.0, p);
    const int dim = field_or<int>(e, "dim", 1, p);
    const int draws = field_or<int>(e, "draws", 50, p);
    if (draws < 1) throw ConfigError(join_path(p, "draws"), "must be positive");
    const auto budgets = require_field<std::vector<std::int64_t>>(e, "budgets", p);
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (budgets[i] < 1 || (i > 0 && budgets[i] <= budgets[i - 1])) {
        throw ConfigError(index_path(join_path(p, "budgets"), i), "budgets must be positive and increasing");
      }
    }
    if (!e.contains("learners") || !e["learners"].is_array() || e["learners"].empty()) {
      throw ConfigError(join_path(p, "learners"), "expected a nonempty array");
    }
    std::vector<EnsembleLearner> learners;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < e["learners"].size(); ++i) {
      const auto lp = index_path(join_path(p, "learners"), i);
      auto l = learner_from_json(e["learners"][i], lp);
      if (!ids.insert(l.id).second) throw ConfigError(join_path(lp, "id"), "duplicate learner id");
      learners.push_back(make_ensemble_learner(l));
    }
    std::vector<RunRecord> records;
    for (auto n : budgets) {
      try {
        study.ensembles.push_back(run_ensemble(n, alpha, beta, lambda, dim, learners, draws, seed, jobs));
      } catch (const std::domain_error& err) {
        throw ConfigError(p, err.what());
      }
      const auto& res = study.ensembles.back();
      for (std::size_t i = 0; i < res.learner_ids.size(); ++i) {
        RunRecord r;
        r.learner = res.learner_ids[i];
        r.spec = "lowerbound";
        r.n = n;
        r.risk = res.mean[i];
        records.push_back(r);
      }
    }
    study.fits = fit_series(records);
  }

  if (config.contains("checks")) {
    const auto& c = config["checks"];
    std::uint64_t stream = 1000;
    if (c.contains("likelihood_ratio")) {
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < c["likelihood_ratio"].size(); ++i) {
        const auto& x = c["likelihood_ratio"][i];
        const auto path = index_path("checks.likelihood_ratio", i);
        try {
          const auto rep = likelihood_ratio_bound_check(require_field<int>(x, "n_max", path),
                                                        require_field<double>(x, "q", path));
          study.checks_pass = study.checks_pass && rep.pass;
          out.push_back(to_json(rep));
        } catch (const std::domain_error& err) {
          throw ConfigError(path, err.what());
        }
      }
      study.checks["likelihood_ratio"] = out;
    }
    if (c.contains("anticoncentration")) {
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < c["anticoncentration"].size(); ++i) {
        const auto& x = c["anticoncentration"][i];
        const auto path = index_path("checks.anticoncentration", i);
        Rng rng(derive_seed(seed, stream++));
        try {
          const auto rep = anticoncentration_check(require_field<double>(x, "gap", path),
                                                   require_field<int>(x, "m", path),
                                                   field_or<std::uint64_t>(x, "trials", 100000, path), rng);
          study.checks_pass = study.checks_pass && rep.pass;
          out.push_back(to_json(rep));
        } catch (const std::domain_error& err) {
          throw ConfigError(path, err.what());
        }
      }
      study.checks["anticoncentration"] = out;
    }
    if (c.contains("chernoff")) {
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < c["chernoff"].size(); ++i) {
        const auto& x = c["chernoff"][i];
        const auto path = index_path("checks.chernoff", i);
        Rng rng(derive_seed(seed, stream++));
        try {
          const auto rep = chernoff_check(require_field<double>(x, "p", path), require_field<int>(x, "m", path),
                                          require_field<double>(x, "eps", path),
                                          field_or<std::uint64_t>(x, "trials", 100000, path), rng);
          study.checks_pass = study.checks_pass && rep.pass;
          out.push_back(to_json(rep));
        } catch (const std::domain_error& err) {
          throw ConfigError(path, err.what());
        }
      }
      study.checks["chernoff"] = out;
    }
  }
  return study;
}

void write_lowerbound_outputs(const LowerBoundStudy& study, const fs::path& dir) {
  ensure_dir(dir);
  if (!study.ensembles.empty()) {
    nlohmann::json ens = nlohmann::json::array();
    std::string csv;
    bool header = true;
    for (const auto& e : study.ensembles) {
      ens.push_back(to_json(e));
      csv += to_csv(e, header);
      header = false;
    }
    write_text(dir / "ensemble.json", ens.dump(2) + "\n");
    write_text(dir / "ensemble.csv", csv);
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : study.fits) fits.push_back(to_json(f));
    write_text(dir / "fits.json", fits.dump(2) + "\n");
    emit_plot(plot_series_from(study.fits), dir / "ensemble.svg", "ensemble excess risk vs budget");
  }
  write_text(dir / "checks.json", nlohmann::json{{"checks", study.checks}, {"pass", study.checks_pass}}.dump(2) + "\n");
}

}  // namespace margin_active
