#pragma once

// Cardinality-minimum CXp by implicit hitting sets: minimum hitting sets of a
// growing collection of AXps are checked with the oracle until one of them
// admits an adversarial example.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dxp/core.hpp"
#include "dxp/explain.hpp"
#include "dxp/predicates.hpp"

namespace dxp {

struct HittingInstance {
  std::size_t universe = 0;             // elements 1..universe
  std::vector<FeatureSet> sets;
  std::vector<double> weights;          // per element (index 0 unused); empty = all 1
};

class InfeasibleError : public Error {
public:
  using Error::Error;
};

namespace detail {

class HittingSetSolver {
public:
  explicit HittingSetSolver(const HittingInstance& inst) : inst_(inst) {
    for (const auto& s : inst_.sets) {
      if (s.empty())
        throw InfeasibleError("min_hitting_set: the empty set cannot be hit");
      s.validate(inst_.universe);
    }
    if (!inst_.weights.empty() && inst_.weights.size() != inst_.universe + 1)
      throw UsageError("min_hitting_set: expected one weight per element (index 0 unused)");
  }

  FeatureSet solve() {
    best_ = greedy();
    best_cost_ = cost(best_);
    std::vector<char> excluded(inst_.universe + 1, 0);
    branch(FeatureSet{}, 0.0, excluded);
    // second pass: the lexicographically smallest set of optimal cost
    std::optional<FeatureSet> lex;
    lex_search(FeatureSet{}, 0.0, 1, excluded, lex);
    return lex ? *lex : best_;
  }

private:
  double weight(std::size_t e) const { return inst_.weights.empty() ? 1.0 : inst_.weights[e]; }

  double cost(const FeatureSet& s) const {
    double c = 0.0;
    for (auto e : s)
      c += weight(e);
    return c;
  }

  // Repeatedly takes the element hitting the most unhit sets per unit weight.
  FeatureSet greedy() const {
    FeatureSet chosen;
    for (;;) {
      std::vector<double> degree(inst_.universe + 1, 0.0);
      bool any = false;
      for (const auto& s : inst_.sets)
        if (!s.intersects(chosen)) {
          any = true;
          for (auto e : s)
            degree[e] += 1.0;
        }
      if (!any)
        return chosen;
      std::size_t pick = 0;
      for (std::size_t e = 1; e <= inst_.universe; ++e)
        if (degree[e] > 0 && (pick == 0 || degree[e] / weight(e) > degree[pick] / weight(pick)))
          pick = e;
      chosen = chosen.with(pick);
    }
  }

  void branch(const FeatureSet& chosen, double cost_so_far, std::vector<char>& excluded) {
    std::vector<const FeatureSet*> open;
    for (const auto& s : inst_.sets)
      if (!s.intersects(chosen))
        open.push_back(&s);
    if (open.empty()) {
      if (cost_so_far < best_cost_) {
        best_cost_ = cost_so_far;
        best_ = chosen;
      }
      return;
    }

    // Lower bound: greedily packed pairwise-disjoint open sets each need
    // at least their cheapest admissible element.
    double bound = cost_so_far;
    FeatureSet used;
    for (const auto* s : open) {
      double cheapest = std::numeric_limits<double>::infinity();
      for (auto e : *s)
        if (!excluded[e])
          cheapest = std::min(cheapest, weight(e));
      if (std::isinf(cheapest))
        return;  // an open set has no admissible element left
      if (!s->intersects(used)) {
        bound += cheapest;
        used = used | *s;
      }
    }
    if (bound >= best_cost_)
      return;

    // Branch on the admissible element of highest degree (lowest index on ties).
    std::vector<std::size_t> degree(inst_.universe + 1, 0);
    for (const auto* s : open)
      for (auto e : *s)
        if (!excluded[e])
          ++degree[e];
    std::size_t pick = 0;
    for (std::size_t e = 1; e <= inst_.universe; ++e)
      if (degree[e] > (pick ? degree[pick] : 0))
        pick = e;

    branch(chosen.with(pick), cost_so_far + weight(pick), excluded);
    excluded[pick] = 1;
    branch(chosen, cost_so_far, excluded);
    excluded[pick] = 0;
  }

  // false when `chosen` cannot be completed within the optimal cost
  bool feasible_bound(const FeatureSet& chosen, double cost_so_far, const std::vector<char>& excluded,
                      bool& done) const {
    double bound = cost_so_far;
    FeatureSet used;
    done = true;
    for (const auto& s : inst_.sets) {
      if (s.intersects(chosen))
        continue;
      done = false;
      double cheapest = std::numeric_limits<double>::infinity();
      for (auto e : s)
        if (!excluded[e])
          cheapest = std::min(cheapest, weight(e));
      if (std::isinf(cheapest))
        return false;
      if (!s.intersects(used)) {
        bound += cheapest;
        used = used | s;
      }
    }
    return bound <= best_cost_ + kCostSlack;
  }

  // Elements in index order, include before exclude: the first optimal set
  // reached is the lexicographically smallest one.
  bool lex_search(const FeatureSet& chosen, double cost_so_far, std::size_t next, std::vector<char>& excluded,
                  std::optional<FeatureSet>& found) {
    bool done = false;
    if (!feasible_bound(chosen, cost_so_far, excluded, done))
      return false;
    if (done) {
      found = chosen;
      return true;
    }
    for (std::size_t e = next; e <= inst_.universe; ++e) {
      if (excluded[e])
        continue;
      bool useful = false;
      for (const auto& s : inst_.sets)
        if (!s.intersects(chosen) && s.contains(e)) {
          useful = true;
          break;
        }
      if (!useful)
        continue;
      if (lex_search(chosen.with(e), cost_so_far + weight(e), e + 1, excluded, found))
        return true;
      excluded[e] = 1;
      const bool ok = lex_search(chosen, cost_so_far, e + 1, excluded, found);
      excluded[e] = 0;
      return ok;
    }
    return false;
  }

  static constexpr double kCostSlack = 1e-9;

  const HittingInstance& inst_;
  FeatureSet best_;
  double best_cost_ = std::numeric_limits<double>::infinity();
};

}  // namespace detail

// Exact minimum-weight hitting set by branch and bound (greedy incumbent,
// disjoint-packing bound, max-degree branching). Among optimal sets the
// lexicographically smallest is returned.
inline FeatureSet min_hitting_set(const HittingInstance& instance) {
  return detail::HittingSetSolver(instance).solve();
}

struct SmallestCxpResult {
  CxpResult result;
  std::size_t iterations = 0;               // refinement rounds (hitting-set solves)
  std::vector<std::size_t> bound_history;   // |min hitting set| per round
  std::vector<FeatureSet> axps;             // the AXps collected in H

  // |result| is optimal: every CXp hits every AXp in H, and no smaller set does.
  std::size_t lower_bound() const { return bound_history.empty() ? 0 : bound_history.back(); }
};

inline SmallestCxpResult smallest_cxp(const ExplanationProblem& problem, OracleSession& oracle, double epsilon,
                                      Norm norm) {
  Stopwatch clock;
  Checker check(problem, oracle, epsilon, norm);
  const std::size_t m = problem.num_features();
  const auto order = natural_order(m);
  SmallestCxpResult out;

  auto stats = [&](CallStats& st, std::size_t extra) {
    st.oracle_calls = check.calls() + extra;
    st.wall_time = clock.elapsed();
  };

  if (!check.wcxp(problem.all_features()).holds) {
    NoAdvExample none{epsilon, norm, {}};
    stats(none.stats, 0);
    out.result = none;
    return out;
  }

  HittingInstance h{m, {}, {}};
  std::size_t axp_calls = 0;
  for (;;) {
    ++out.iterations;
    const auto y = min_hitting_set(h);
    out.bound_history.push_back(y.size());
    if (check.wcxp(y).holds) {
      Explanation e{ExplanationKind::CXp, y, epsilon, norm, {}};
      stats(e.stats, axp_calls);
      out.result = e;
      return out;
    }
    // F \ Y keeps the prediction; its AXp is disjoint from Y.
    auto axp = extract_axp(problem, oracle, y.complement(m), order, epsilon, norm);
    axp_calls += axp.stats.oracle_calls;
    h.sets.push_back(axp.features);
    out.axps.push_back(axp.features);
  }
}

}  // namespace dxp
