#pragma once

// MARCO-style enumeration of all AXps and CXps, driven by a map formula over
// one selector per feature (p_i true <=> feature i is free), plus the feature
// attribution scores and the hitting-set duality check.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dxp/core.hpp"
#include "dxp/explain.hpp"
#include "dxp/predicates.hpp"

namespace dxp {

// CNF over variables 1..m; a literal is +i or -i.
class MapFormula {
public:
  using Clause = std::vector<int>;

  explicit MapFormula(std::size_t m) : m_(m) {}

  void add_clause(Clause c) {
    for (int lit : c)
      if (lit == 0 || static_cast<std::size_t>(std::abs(lit)) > m_)
        throw UsageError("map formula: literal " + std::to_string(lit) + " out of range");
    clauses_.push_back(std::move(c));
  }

  // Blocks every free set containing `cxp`: (OR_{i in cxp} -p_i).
  void block_superset(const FeatureSet& cxp) {
    Clause c;
    for (auto i : cxp)
      c.push_back(-static_cast<int>(i));
    add_clause(std::move(c));
  }

  // Blocks every free set disjoint from `axp`: (OR_{i in axp} p_i).
  void block_disjoint(const FeatureSet& axp) {
    Clause c;
    for (auto i : axp)
      c.push_back(static_cast<int>(i));
    add_clause(std::move(c));
  }

  std::size_t num_vars() const { return m_; }
  const std::vector<Clause>& clauses() const { return clauses_; }

private:
  std::size_t m_;
  std::vector<Clause> clauses_;
};

namespace detail {

// DPLL: unit propagation, lowest unassigned variable first, preferred phase
// first. assign[v] is -1 (unassigned), 0 or 1.
class MapSolver {
public:
  MapSolver(const MapFormula& f, bool prefer) : f_(f), prefer_(prefer), assign_(f.num_vars() + 1, -1) {}

  std::optional<std::vector<bool>> solve() {
    if (!search())
      return std::nullopt;
    std::vector<bool> model(f_.num_vars() + 1, false);
    for (std::size_t v = 1; v <= f_.num_vars(); ++v)
      model[v] = assign_[v] == 1;
    return model;
  }

private:
  int value(int lit) const {
    const int a = assign_[static_cast<std::size_t>(std::abs(lit))];
    if (a < 0)
      return -1;
    return lit > 0 ? a : 1 - a;
  }

  void set(int lit) {
    assign_[static_cast<std::size_t>(std::abs(lit))] = lit > 0 ? 1 : 0;
    trail_.push_back(std::abs(lit));
  }

  void undo(std::size_t mark) {
    while (trail_.size() > mark) {
      assign_[static_cast<std::size_t>(trail_.back())] = -1;
      trail_.pop_back();
    }
  }

  // false on conflict
  bool propagate() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& c : f_.clauses()) {
        int unassigned = 0, last = 0;
        bool sat = false;
        for (int lit : c) {
          const int v = value(lit);
          if (v == 1) {
            sat = true;
            break;
          }
          if (v < 0) {
            ++unassigned;
            last = lit;
          }
        }
        if (sat)
          continue;
        if (unassigned == 0)
          return false;
        if (unassigned == 1) {
          set(last);
          changed = true;
        }
      }
    }
    return true;
  }

  bool search() {
    const std::size_t mark = trail_.size();
    if (!propagate()) {
      undo(mark);
      return false;
    }
    std::size_t var = 0;
    for (std::size_t v = 1; v <= f_.num_vars(); ++v)
      if (assign_[v] < 0) {
        var = v;
        break;
      }
    if (var == 0)
      return true;
    for (bool phase : {prefer_, !prefer_}) {
      const std::size_t inner = trail_.size();
      set(phase ? static_cast<int>(var) : -static_cast<int>(var));
      if (search())
        return true;
      undo(inner);
    }
    undo(mark);
    return false;
  }

  const MapFormula& f_;
  bool prefer_;
  std::vector<int> assign_;
  std::vector<int> trail_;
};

}  // namespace detail

// A satisfying total assignment (index 1..m; entry 0 unused) or nullopt when
// the formula is unsatisfiable. Deterministic.
inline std::optional<std::vector<bool>> next_model(const MapFormula& map, bool prefer_true = true) {
  return detail::MapSolver(map, prefer_true).solve();
}

struct ExplanationSets {
  std::vector<FeatureSet> axps;
  std::vector<FeatureSet> cxps;
  bool complete = false;
  std::size_t oracle_calls = 0;
  std::optional<std::string> error;  // oracle failure that cut the run short
};

struct EnumerateOptions {
  std::optional<std::size_t> limit;      // total explanations of both kinds
  std::optional<std::size_t> cxp_limit;  // CXps only
};

using ExplanationCallback = std::function<void(const Explanation&)>;

// Alternates seeds from the map formula with shrink steps: a seed whose free
// set admits an adversarial example is shrunk to a CXp (supersets blocked),
// otherwise its fixed set is shrunk to an AXp (disjoint free sets blocked).
// Shrinking follows `order`.
inline ExplanationSets marco_enumerate(const ExplanationProblem& problem, OracleSession& oracle, double epsilon,
                                       Norm norm, const FeatureOrder& order, const EnumerateOptions& opts = {},
                                       const ExplanationCallback& emit = {}) {
  validate_order(order, problem.num_features());
  const std::size_t m = problem.num_features();
  Checker check(problem, oracle, epsilon, norm);
  MapFormula map(m);
  ExplanationSets out;

  auto reached_limit = [&] {
    if (opts.limit && out.axps.size() + out.cxps.size() >= *opts.limit)
      return true;
    return opts.cxp_limit && out.cxps.size() >= *opts.cxp_limit;
  };

  try {
    for (;;) {
      auto model = next_model(map, true);
      if (!model) {
        out.complete = true;
        break;
      }
      if (reached_limit())
        break;

      Stopwatch clock;
      const std::size_t calls_before = check.calls();
      std::vector<std::size_t> free_members;
      for (std::size_t i = 1; i <= m; ++i)
        if ((*model)[i])
          free_members.push_back(i);
      FeatureSet seed(std::move(free_members));

      Explanation e;
      e.epsilon = epsilon;
      e.norm = norm;
      if (check.wcxp(seed).holds) {
        FeatureSet c = seed;
        for (auto i : order) {
          if (!c.contains(i))
            continue;
          const auto candidate = c.without(i);
          if (check.wcxp(candidate).holds)
            c = candidate;
        }
        e.kind = ExplanationKind::CXp;
        e.features = c;
        map.block_superset(c);
        out.cxps.push_back(c);
      } else {
        FeatureSet x = seed.complement(m);
        for (auto i : order) {
          if (!x.contains(i))
            continue;
          const auto candidate = x.without(i);
          if (check.waxp(candidate))
            x = candidate;
        }
        e.kind = ExplanationKind::AXp;
        e.features = x;
        map.block_disjoint(x);
        out.axps.push_back(x);
      }
      e.stats.oracle_calls = check.calls() - calls_before;
      e.stats.wall_time = clock.elapsed();
      if (emit)
        emit(e);
    }
  } catch (const OracleError& err) {
    out.complete = false;
    out.error = err.what();
  }
  out.oracle_calls = check.calls();
  return out;
}

// FFA(i) = |{S in cxps : i in S}| / |cxps| for i = 1..m (index 0 unused).
inline std::vector<double> ffa_scores(const std::vector<FeatureSet>& cxps, std::size_t m) {
  if (cxps.empty())
    throw UsageError("ffa_scores: no contrastive explanations to aggregate");
  std::vector<double> score(m + 1, 0.0);
  for (const auto& s : cxps) {
    s.validate(m);
    for (auto i : s)
      score[i] += 1.0;
  }
  for (auto& v : score)
    v /= static_cast<double>(cxps.size());
  return score;
}

// Features with a positive attribution score.
inline FeatureSet ffa_support(const std::vector<double>& scores) {
  std::vector<std::size_t> members;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > 0.0)
      members.push_back(i);
  return FeatureSet(std::move(members));
}

// hits every member of `family`, and no one-element removal still does
inline bool is_minimal_hitting_set(const FeatureSet& h, const std::vector<FeatureSet>& family) {
  auto hits_all = [&](const FeatureSet& s) {
    return std::all_of(family.begin(), family.end(), [&](const FeatureSet& f) { return s.intersects(f); });
  };
  if (!hits_all(h))
    return false;
  return std::none_of(h.begin(), h.end(), [&](std::size_t i) { return hits_all(h.without(i)); });
}

// Every AXp is a minimal hitting set of the CXps and vice versa.
inline bool check_duality(const ExplanationSets& sets) {
  if (!sets.complete)
    throw UsageError("check_duality: enumeration is incomplete");
  for (const auto& a : sets.axps)
    if (!is_minimal_hitting_set(a, sets.cxps))
      return false;
  for (const auto& c : sets.cxps)
    if (!is_minimal_hitting_set(c, sets.axps))
      return false;
  return true;
}

}  // namespace dxp
