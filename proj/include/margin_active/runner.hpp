#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "margin_active/dist.hpp"
#include "margin_active/learner.hpp"
#include "margin_active/lowerbound.hpp"

namespace margin_active {

/// A learner as named in experiment configs.
///
/// Types:
///   meta         adaptive elimination over the alpha grid
///   nonadaptive  elimination with a fixed alpha and the whole budget
///   passive      histogram plug-in on n i.i.d. pairs
///   np, majority, minority, always0, always1, random, cheater
///                uniform allocation on the lower-bound construction with the
///                named labeling rule (lower-bound specs only)
struct LearnerConfig {
  std::string id;
  std::string type;
  double lambda = 1.0;
  double delta = 0.05;
  double alpha = 1.0;
  int max_rounds = 1000;
  std::optional<int> level;
};

LearnerConfig learner_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const LearnerConfig& c);

struct LearnerOutcome {
  CellwiseClassifier classifier;
  std::int64_t queries_used = 0;
  std::optional<double> r_min;
};

/// Runs one learner with budget n. The label oracle enforces the budget.
LearnerOutcome run_learner(const LearnerConfig& cfg, const DistributionSpec& spec, std::int64_t n,
                           Rng& rng);

EnsembleLearner make_ensemble_learner(const LearnerConfig& cfg);

}  // namespace margin_active
