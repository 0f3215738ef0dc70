#include "margin_active/runner.hpp"

#include <array>
#include <algorithm>

#include "margin_active/config_error.hpp"

namespace margin_active {

namespace {

constexpr std::array<const char*, 10> kTypes = {"meta",    "nonadaptive", "passive", "np",     "majority",
                                                "minority", "always0",     "always1", "random", "cheater"};

bool is_construction_rule(const std::string& type) {
  return type != "meta" && type != "nonadaptive" && type != "passive";
}

}  // namespace

LearnerConfig learner_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "learner entry must be an object");
  LearnerConfig c;
  c.type = require_field<std::string>(j, "type", path);
  if (std::find(kTypes.begin(), kTypes.end(), c.type) == kTypes.end()) {
    throw ConfigError(join_path(path, "type"), "unknown learner type '" + c.type + "'");
  }
  c.id = field_or<std::string>(j, "id", c.type, path);
  c.lambda = field_or<double>(j, "lambda", c.lambda, path);
  c.delta = field_or<double>(j, "delta", c.delta, path);
  c.alpha = field_or<double>(j, "alpha", c.alpha, path);
  c.max_rounds = field_or<int>(j, "max_rounds", c.max_rounds, path);
  if (j.contains("level")) c.level = require_field<int>(j, "level", path);
  if (!(c.lambda > 0.0)) throw ConfigError(join_path(path, "lambda"), "must be positive");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError(join_path(path, "delta"), "must lie in (0,1)");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ConfigError(join_path(path, "alpha"), "must lie in (0,1]");
  if (c.max_rounds < 1) throw ConfigError(join_path(path, "max_rounds"), "must be positive");
  if (c.level && *c.level < 0) throw ConfigError(join_path(path, "level"), "must be nonnegative");
  return c;
}

nlohmann::json to_json(const LearnerConfig& c) {
  nlohmann::json j{{"id", c.id},       {"type", c.type},   {"lambda", c.lambda},
                   {"delta", c.delta}, {"alpha", c.alpha}, {"max_rounds", c.max_rounds}};
  if (c.level) j["level"] = *c.level;
  return j;
}

LearnerOutcome run_learner(const LearnerConfig& cfg, const DistributionSpec& spec, std::int64_t n, Rng& rng) {
  BudgetMeter meter(n);
  Oracle oracle(spec, meter);

  if (cfg.type == "meta") {
    auto res = run_meta(oracle, n, MetaParams{cfg.delta, cfg.lambda, cfg.max_rounds}, rng);
    return {res.labels.to_classifier(), meter.used(), side_length(res.finest_level)};
  }
  if (cfg.type == "nonadaptive") {
    const int k0 = cfg.level.value_or(meta_min_level(static_cast<double>(n), spec.dim()));
    auto trace = run_nonadaptive(oracle, NonAdaptiveParams{n, cfg.delta, cfg.alpha, cfg.lambda, k0}, rng);
    return {trace.labels.to_classifier(), meter.used(), trace.r_min()};
  }
  if (cfg.type == "passive") {
    const int k = cfg.level.value_or(passive_default_level(n, cfg.alpha, spec.dim()));
    return {passive_plugin_streaming(spec, n, k, rng).to_classifier(), n, std::nullopt};
  }
  if (is_construction_rule(cfg.type)) {
    const auto* lb = dynamic_cast<const LowerBoundSpec*>(&spec);
    if (lb == nullptr) {
      throw UnsupportedSpecError("learner type '" + cfg.type + "' needs the lower-bound construction");
    }
    const auto labeling = make_labeling(cfg.type);
    auto h = np_strategy(oracle, *lb, n, UniformAllocation{}, *labeling, rng);
    return {std::move(h), meter.used(), std::nullopt};
  }
  throw std::invalid_argument("unknown learner type '" + cfg.type + "'");
}

EnsembleLearner make_ensemble_learner(const LearnerConfig& cfg) {
  return {cfg.id, [cfg](const LowerBoundSpec& spec, std::int64_t n, Rng& rng, std::int64_t& queries) {
            auto out = run_learner(cfg, spec, n, rng);
            queries = out.queries_used;
            return std::move(out.classifier);
          }};
}

}  // namespace margin_active
