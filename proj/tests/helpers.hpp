#pragma once

#include <cstdint>
#include <memory>

#include "margin_active/dist.hpp"

namespace margin_active::testing {

inline LowerBoundParams lb_params(int level, double alpha = 1.0, double beta = 1.0, double lambda = 1.0,
                                  int dim = 1) {
  LowerBoundParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.lambda = lambda;
  p.dim = dim;
  p.level = level;
  return p;
}

/// Construction with every coin fixed.
inline std::shared_ptr<LowerBoundSpec> lb_fixed(const LowerBoundParams& p, int z, int sigma) {
  const DyadicPartition part(p.level, p.dim);
  ZSigmaAssignment zs{p.level, p.dim, {}, {}};
  zs.z.assign(part.size(), static_cast<std::uint8_t>(z));
  zs.sigma.assign(part.size(), static_cast<std::int8_t>(sigma));
  return std::make_shared<LowerBoundSpec>(p, zs);
}

}  // namespace margin_active::testing
