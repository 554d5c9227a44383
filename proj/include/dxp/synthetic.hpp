#pragma once

// Synthetic linear problems with a known unique CXp, used for benchmarking.

#include <cmath>
#include <memory>
#include <vector>

#include "dxp/models.hpp"
#include "dxp/problem.hpp"

namespace dxp {

struct SyntheticLinear {
  ExplanationProblem problem;
  FeatureSet cxp;  // the only CXp under LInf with epsilon = 1
};

// m unbounded real features, `heavy` of them (evenly spaced) with weight 10,
// the rest 0.01. The instance is the origin with a class-0 margin of
// 10 * heavy - 0.5, so under LInf / epsilon = 1 the prediction flips iff every
// heavy feature is free (given 0.01 * (m - heavy) < 9.5).
inline SyntheticLinear synthetic_linear(std::size_t m, std::size_t heavy = 8) {
  if (heavy == 0 || heavy > m)
    throw UsageError("synthetic problem: need 1 <= heavy <= m");
  if (0.01 * static_cast<double>(m - heavy) >= 9.5)
    throw UsageError("synthetic problem: too many light features for a unique CXp");
  std::vector<double> w(m, 0.01);
  std::vector<std::size_t> picked;
  for (std::size_t j = 0; j < heavy; ++j) {
    const std::size_t i = j * m / heavy;  // 0-based
    w[i] = 10.0;
    picked.push_back(i + 1);
  }
  Matrix weights{w, std::vector<double>(m, 0.0)};
  const double bias = 10.0 * static_cast<double>(heavy) - 0.5;
  auto model = std::make_shared<const Model>(LinearModel(weights, {bias, 0.0}));
  ExplanationProblem problem(model, FeatureSpace::reals(m), Instance{Point(m, 0.0), 0});
  return {std::move(problem), FeatureSet(std::move(picked))};
}

}  // namespace dxp
