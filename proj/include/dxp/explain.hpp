#pragma once

// Single-explanation algorithms: deletion (linear search), dichotomic search,
// the parallel chunked variant with feature-disjunction batching, AXp
// extraction, the witness-mask seed and feature orderings.
//
// Orders are drop priorities: the first feature of an order is the first one
// the algorithms try to leave out of the explanation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dxp/core.hpp"
#include "dxp/oracle.hpp"
#include "dxp/predicates.hpp"
#include "dxp/probe_pool.hpp"

namespace dxp {

using FeatureOrder = std::vector<std::size_t>;  // permutation of 1..m

// One oracle answer that influenced the search, in decision order.
struct ProbeRecord {
  FeatureSet free;
  bool found = false;
  bool operator==(const ProbeRecord&) const = default;
};
using ProbeTrace = std::vector<ProbeRecord>;

inline FeatureOrder natural_order(std::size_t m) {
  FeatureOrder o(m);
  for (std::size_t i = 0; i < m; ++i)
    o[i] = i + 1;
  return o;
}

inline void validate_order(const FeatureOrder& order, std::size_t m) {
  if (order.size() != m)
    throw UsageError("feature order has " + std::to_string(order.size()) + " entries, expected " + std::to_string(m));
  std::vector<bool> seen(m + 1, false);
  for (auto i : order) {
    if (i < 1 || i > m || seen[i])
      throw UsageError("feature order is not a permutation of 1.." + std::to_string(m));
    seen[i] = true;
  }
}

// ---------------------------------------------------------------------------
// Orderings

enum class OrderStrategy { Natural, Sensitivity, File };

struct OrderResult {
  FeatureOrder order;
  std::optional<std::string> warning;
};

namespace detail {

// Values feature i can take inside the ball with every other feature at v.
inline std::vector<double> reachable_extremes(const Domain& d, double vi, double epsilon, Norm norm) {
  if (epsilon <= 0.0)
    return {vi};
  const double inf = std::numeric_limits<double>::infinity();
  // L0 lets a single feature move anywhere in its domain.
  const double reach = norm == Norm::L0 ? inf : epsilon;
  if (const auto* fs = std::get_if<FiniteSet>(&d)) {
    double lo = vi, hi = vi;
    for (double u : fs->values)
      if (std::fabs(u - vi) <= reach) {
        lo = std::min(lo, u);
        hi = std::max(hi, u);
      }
    return {lo, hi};
  }
  const auto& ri = std::get<RealInterval>(d);
  // An unbounded L0 move has no natural scale; probe one unit each way.
  const double step = std::isinf(reach) ? 1.0 : reach;
  double lo = vi - step, hi = vi + step;
  if (ri.lower)
    lo = std::max(lo, *ri.lower);
  if (ri.upper)
    hi = std::min(hi, *ri.upper);
  return {lo, hi};
}

}  // namespace detail

// Sensitivity of feature i: the largest change of the class-c score obtained
// by moving x_i alone to an extreme reachable value. Ascending: low-impact
// features come first and are dropped early. Ties keep index order.
inline std::vector<double> sensitivity_scores(const ExplanationProblem& problem, double epsilon, Norm norm) {
  const auto& v = problem.point();
  const auto c = problem.label();
  const double base = score(problem.model(), v, c);
  std::vector<double> s(problem.num_features(), 0.0);
  for (std::size_t f = 1; f <= problem.num_features(); ++f) {
    Point x = v;
    for (double u : detail::reachable_extremes(problem.space().domain(f), v[f - 1], epsilon, norm)) {
      x[f - 1] = u;
      s[f - 1] = std::max(s[f - 1], std::fabs(score(problem.model(), x, c) - base));
    }
  }
  return s;
}

inline OrderResult order_features(const ExplanationProblem& problem, OrderStrategy strategy, double epsilon, Norm norm,
                                  const FeatureOrder& file_order = {}) {
  const auto m = problem.num_features();
  switch (strategy) {
  case OrderStrategy::Natural:
    return {natural_order(m), std::nullopt};
  case OrderStrategy::File:
    validate_order(file_order, m);
    return {file_order, std::nullopt};
  case OrderStrategy::Sensitivity:
    break;
  }
  if (!has_scores(problem.model()))
    return {natural_order(m), "sensitivity order needs a scored model; using natural order"};
  const auto s = sensitivity_scores(problem, epsilon, norm);
  auto order = natural_order(m);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a - 1] < s[b - 1]; });
  return {order, std::nullopt};
}

// ---------------------------------------------------------------------------
// Seeds

namespace detail {

// Search sequence W for the dichotomic algorithms: the seed's features in
// reverse drop priority, so that discarded tails hold the features to drop first.
inline std::vector<std::size_t> search_sequence(const FeatureOrder& order, const FeatureSet& seed) {
  std::vector<std::size_t> w;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (seed.contains(*it))
      w.push_back(*it);
  return w;
}

inline FeatureSet prefix_set(const FeatureSet& s, const std::vector<std::size_t>& w, std::size_t len) {
  return s | FeatureSet(std::vector<std::size_t>(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(len)));
}

// W from the guard answer: the features the witness moved, or F without one.
inline FeatureSet seed_from(const OracleAnswer& guard, const ExplanationProblem& problem) {
  if (guard.witness)
    return changed_features(*guard.witness, problem.point());
  return problem.all_features();
}

}  // namespace detail

// Guard call check_wcxp(F). On success returns a weak CXp: the features the
// witness moved, or F when the oracle gives no witness. nullopt means there
// is no adversarial example in the ball.
inline std::optional<FeatureSet> seed_weak_cxp(const ExplanationProblem& problem, OracleSession& oracle, double epsilon,
                                               Norm norm) {
  validate_radius(epsilon, norm);
  const auto guard = query_free(problem, oracle, problem.all_features(), epsilon, norm);
  if (!guard.found())
    return std::nullopt;
  return detail::seed_from(guard, problem);
}

// ---------------------------------------------------------------------------
// Deletion (linear search)

// Frees every feature, then walks the order and fixes feature i whenever the
// rest still admits an adversarial example. m oracle calls after the guard.
inline CxpResult deletion_cxp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureOrder& order,
                              double epsilon, Norm norm, ProbeTrace* trace = nullptr) {
  Stopwatch clock;
  Checker check(problem, oracle, epsilon, norm);
  validate_order(order, problem.num_features());

  auto record = [&](const FeatureSet& free, bool found) {
    if (trace)
      trace->push_back({free, found});
    return found;
  };

  FeatureSet y = problem.all_features();
  if (!record(y, check.wcxp(y).holds)) {
    NoAdvExample none{epsilon, norm, {}};
    none.stats.oracle_calls = check.calls();
    none.stats.wall_time = clock.elapsed();
    return none;
  }
  for (auto i : order) {
    const auto candidate = y.without(i);
    if (record(candidate, check.wcxp(candidate).holds))
      y = candidate;
  }
  Explanation e{ExplanationKind::CXp, y, epsilon, norm, {}};
  e.stats.oracle_calls = check.calls();
  e.stats.wall_time = clock.elapsed();
  return e;
}

// ---------------------------------------------------------------------------
// Dichotomic search

// Each round finds the shortest prefix W_1..j with d-WCXp(S u W_1..j) by
// binary search (after first checking S alone); W_j is a transition feature,
// joins S, and everything after it is discarded.
inline CxpResult dichotomic_cxp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureOrder& order,
                                double epsilon, Norm norm, ProbeTrace* trace = nullptr) {
  Stopwatch clock;
  Checker check(problem, oracle, epsilon, norm);
  validate_order(order, problem.num_features());

  auto probe = [&](const FeatureSet& free) {
    const bool found = check.wcxp(free).holds;
    if (trace)
      trace->push_back({free, found});
    return found;
  };

  const auto all = problem.all_features();
  const auto guard = check.wcxp(all);
  if (trace)
    trace->push_back({all, guard.holds});
  if (!guard.holds) {
    NoAdvExample none{epsilon, norm, {}};
    none.stats.oracle_calls = check.calls();
    none.stats.wall_time = clock.elapsed();
    return none;
  }
  auto w = detail::search_sequence(order, guard.witness ? changed_features(*guard.witness, problem.point()) : all);

  FeatureSet s;
  while (!w.empty()) {
    if (!s.empty() && probe(s))
      break;
    // smallest hi in (lo, n] with d-WCXp(S u W_1..hi); hi = n is known to hold
    std::size_t lo = 0, hi = w.size();
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (probe(detail::prefix_set(s, w, mid)))
        hi = mid;
      else
        lo = mid;
    }
    s = s.with(w[hi - 1]);
    w.resize(hi - 1);
  }

  Explanation e{ExplanationKind::CXp, s, epsilon, norm, {}};
  e.stats.oracle_calls = check.calls();
  e.stats.wall_time = clock.elapsed();
  return e;
}

// ---------------------------------------------------------------------------
// Parallel chunked search with feature-disjunction batching

struct SearchState {
  FeatureSet s;                // confirmed transition features
  std::vector<std::size_t> w;  // undecided features, search order
};

struct SwiftOptions {
  std::size_t workers = 1;  // q
  double delta = 0.85;      // feature-disjunction activation threshold in [0,1]
  std::uint64_t seed = 0;   // random picks inside the disjunction check
};

namespace detail {

struct SwiftCounters {
  std::size_t calls = 0;
  std::size_t cancelled = 0;
  std::size_t rounds = 0;
};

inline void count(SwiftCounters& c, const BatchOutcome& out) {
  c.calls += out.issued;
  c.cancelled += out.cancelled;
  ++c.rounds;
}

// Probe indices for one inner iteration. `lo` is the largest prefix length
// known to fail (nullopt while S alone is untested), `hi` the smallest known
// to succeed. Returns at most q strictly increasing indices in (lo, hi).
inline std::vector<std::size_t> splitting_indices(std::optional<std::size_t> lo, std::size_t hi, std::size_t q) {
  std::vector<std::size_t> idx;
  if (!lo) {
    // S alone first, then q-1 evenly spaced cuts of (0, hi)
    idx.push_back(0);
    const std::size_t omega = std::min(q, hi);
    for (std::size_t j = 1; j < omega; ++j)
      idx.push_back(j * hi / omega);
    return idx;
  }
  const std::size_t gap = hi - *lo;
  const std::size_t omega = std::min(q, gap - 1);
  for (std::size_t j = 1; j <= omega; ++j)
    idx.push_back(*lo + j * gap / (omega + 1));
  return idx;
}

}  // namespace detail

// Feature disjunction check over T (the last min(q, |W|) features of W).
// Requires d-WCXp(S u W). If no feature of T can be fixed on its own, all of T
// is necessary and moves to S; otherwise one fixable feature (seeded pick) is
// dropped from W. With probe_s, S alone is probed in the same batch (T shrinks
// by one to keep the batch within q workers); if it suffices W is cleared.
inline SearchState feat_disjunct(SearchState state, ProbePool& pool, std::size_t q, std::mt19937_64& rng,
                                 ProbeTrace* trace = nullptr, detail::SwiftCounters* counters = nullptr,
                                 bool probe_s = false) {
  const std::size_t extra = probe_s ? 1 : 0;
  const std::size_t width = std::min(q > extra ? q - extra : 1, state.w.size());
  if (width == 0)
    return state;
  const std::vector<std::size_t> t(state.w.end() - static_cast<std::ptrdiff_t>(width), state.w.end());
  const auto rest = state.s | FeatureSet(state.w);

  std::vector<FeatureSet> frees;
  if (probe_s)
    frees.push_back(state.s);
  for (auto i : t)
    frees.push_back(rest.without(i));
  const auto out = pool.run_all(frees);
  if (counters)
    detail::count(*counters, out);

  if (probe_s) {
    if (trace)
      trace->push_back({frees[0], out.answers[0].found()});
    if (out.answers[0].found()) {
      state.w.clear();
      return state;
    }
  }
  std::vector<std::size_t> droppable;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (trace)
      trace->push_back({frees[k + extra], out.answers[k + extra].found()});
    if (out.answers[k + extra].found())
      droppable.push_back(t[k]);
  }

  if (droppable.empty()) {
    state.s = state.s | FeatureSet(t);
    state.w.resize(state.w.size() - width);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, droppable.size() - 1);
    const auto drop = droppable[pick(rng)];
    state.w.erase(std::find(state.w.begin(), state.w.end(), drop));
  }
  return state;
}

// Dichotomic search over chunks probed in parallel by up to q oracle
// sessions. Each inner iteration checks the prefixes ending at the splitting
// indices, finds the first chunk whose prefix admits an adversarial example
// and zooms into it; probes past that chunk are cancelled. Once W is small
// (|W| <= max(q, ceil((1 - delta) m))) the feature disjunction check takes
// over for the remaining iterations.
inline CxpResult swift_cxp(const ExplanationProblem& problem, const SessionFactory& factory, const FeatureOrder& order,
                           double epsilon, Norm norm, const SwiftOptions& opts = {}, ProbeTrace* trace = nullptr) {
  Stopwatch clock;
  validate_radius(epsilon, norm);
  validate_order(order, problem.num_features());
  if (opts.workers == 0)
    throw UsageError("swift: at least one worker required");
  if (!(opts.delta >= 0.0 && opts.delta <= 1.0))
    throw UsageError("swift: delta must lie in [0, 1]");

  const std::size_t q = opts.workers;
  const std::size_t m = problem.num_features();
  const auto fd_threshold =
      std::max<std::size_t>(q, static_cast<std::size_t>(std::ceil((1.0 - opts.delta) * static_cast<double>(m))));

  ProbePool pool(problem, factory, q, epsilon, norm);
  std::mt19937_64 rng(opts.seed);
  detail::SwiftCounters counters;

  auto finish = [&](auto result) {
    result.stats.oracle_calls = counters.calls;
    result.stats.cancelled_calls = counters.cancelled;
    result.stats.parallel_rounds = counters.rounds;
    result.stats.wall_time = clock.elapsed();
    return CxpResult(std::move(result));
  };

  const auto all = problem.all_features();
  const auto guard = pool.run_all({all});
  detail::count(counters, guard);
  if (trace)
    trace->push_back({all, guard.answers[0].found()});
  if (!guard.answers[0].found())
    return finish(NoAdvExample{epsilon, norm, {}});

  SearchState st{{}, detail::search_sequence(order, detail::seed_from(guard.answers[0], problem))};
  bool fd_mode = false;
  bool s_untested = true;  // S changed since it was last probed on its own

  while (!st.w.empty()) {
    if (fd_mode || st.w.size() <= fd_threshold) {
      fd_mode = true;
      const bool probe_s = s_untested && !st.s.empty();
      const auto before = st.s.size();
      st = feat_disjunct(std::move(st), pool, q, rng, trace, &counters, probe_s);
      s_untested = st.s.size() != before;
      continue;
    }

    std::optional<std::size_t> lo;
    if (st.s.empty())
      lo = 0;  // no adversarial example moves nothing
    std::size_t hi = st.w.size();
    while (!lo || hi - *lo > 1) {
      const auto idx = detail::splitting_indices(lo, hi, q);
      std::vector<FeatureSet> frees;
      for (auto i : idx)
        frees.push_back(detail::prefix_set(st.s, st.w, i));
      const auto out = pool.run_chain(frees);
      detail::count(counters, out);

      std::optional<std::size_t> t;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (out.answers[k].cancelled())
          throw Error("swift: probe before the boundary was cancelled");
        if (trace)
          trace->push_back({frees[k], out.answers[k].found()});
        if (out.answers[k].found()) {
          t = k;
          break;
        }
      }
      if (!t) {
        lo = idx.back();
      } else {
        hi = idx[*t];
        if (*t > 0)
          lo = idx[*t - 1];
        else if (!lo)
          lo = hi;  // S alone already succeeds; hi == 0
      }
      if (hi == 0)
        break;
    }
    if (hi == 0)
      break;
    st.s = st.s.with(st.w[hi - 1]);
    st.w.resize(hi - 1);
    s_untested = true;
  }

  return finish(Explanation{ExplanationKind::CXp, st.s, epsilon, norm, {}});
}

// ---------------------------------------------------------------------------
// Abductive explanations

// Deletion over a weak AXp: un-fixes feature i whenever the rest still keeps
// the prediction. Throws UsageError if seed_fixed is not a weak AXp.
inline Explanation extract_axp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& seed_fixed,
                               const FeatureOrder& order, double epsilon, Norm norm) {
  Stopwatch clock;
  Checker check(problem, oracle, epsilon, norm);
  validate_order(order, problem.num_features());
  seed_fixed.validate(problem.num_features());
  if (!check.waxp(seed_fixed))
    throw UsageError("extract_axp: seed " + to_string(seed_fixed) + " is not a weak AXp");
  FeatureSet x = seed_fixed;
  for (auto i : order) {
    if (!x.contains(i))
      continue;
    const auto candidate = x.without(i);
    if (check.waxp(candidate))
      x = candidate;
  }
  Explanation e{ExplanationKind::AXp, x, epsilon, norm, {}};
  e.stats.oracle_calls = check.calls();
  e.stats.wall_time = clock.elapsed();
  return e;
}

}  // namespace dxp
