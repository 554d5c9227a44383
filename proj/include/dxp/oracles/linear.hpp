#pragma once

// Closed-form oracle for linear models. For every rival class k the margin
// (w_c - w_k).x + (b_c - b_k) is minimised over the epsilon-ball restricted to
// the free coordinates (and to the box hull of each domain):
//
//   LInf: subtract sum_i |d_i| * min(eps, slack_i)
//   L1:   spend eps greedily on free coordinates in decreasing |d_i|
//   L2:   subtract eps * ||d_free||_2     (unbounded domains only)
//   L0:   move the floor(eps) coordinates with the largest |d_i| * slack_i
//
// An adversarial example for rival k exists when the optimum is below -tau.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "dxp/oracle.hpp"
#include "dxp/oracles/exhaustive.hpp"

namespace dxp {

inline constexpr double kMarginTolerance = 1e-9;

struct MarginOptimum {
  double margin = std::numeric_limits<double>::infinity();
  std::size_t rival = 0;
  Point argmin;  // a point attaining the optimum (finite even when margin is -inf)
};

namespace detail {

// Room to move coordinate i in direction dir (+1 / -1) inside its domain hull.
inline double slack(const Domain& d, double vi, int dir) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (const auto* fs = std::get_if<FiniteSet>(&d))
    return dir > 0 ? fs->max() - vi : vi - fs->min();
  const auto& ri = std::get<RealInterval>(d);
  if (dir > 0)
    return ri.upper ? *ri.upper - vi : inf;
  return ri.lower ? vi - *ri.lower : inf;
}

inline bool bounded(const Domain& d) {
  if (const auto* ri = std::get_if<RealInterval>(&d))
    return ri->bounded();
  return true;
}

}  // namespace detail

// Minimum over the ball of the margin of class c against its strongest rival.
inline MarginOptimum linear_min_margin_detail(const LinearModel& model, const FeatureSpace& space, const Point& v,
                                              std::size_t c, const FeatureSet& free, double epsilon, Norm norm) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = model.num_features();
  if (v.size() != m || space.size() != m)
    throw UsageError("linear_min_margin: arity mismatch");
  validate_radius(epsilon, norm);
  free.validate(m);

  if (norm == Norm::L2)
    for (auto i : free)
      if (detail::bounded(space.domain(i)))
        throw OracleError(OracleError::Kind::Unsupported,
                          "linear oracle: L2 ball with bounded domain on feature " + std::to_string(i));

  const auto& w = model.weights();
  const auto& b = model.biases();
  MarginOptimum best;

  for (std::size_t k = 0; k < model.num_classes(); ++k) {
    if (k == c)
      continue;
    std::vector<double> d(m);
    double base = b[c] - b[k];
    for (std::size_t i = 0; i < m; ++i) {
      d[i] = w[c][i] - w[k][i];
      base += d[i] * v[i];
    }

    struct Move {
      std::size_t idx;  // 0-based
      double gain;      // |d_i|
      int dir;
      double room;
    };
    std::vector<Move> moves;
    for (auto f : free) {
      const std::size_t i = f - 1;
      if (d[i] == 0.0)
        continue;
      const int dir = d[i] > 0 ? -1 : 1;
      moves.push_back({i, std::fabs(d[i]), dir, detail::slack(space.domain(f), v[i], dir)});
    }

    Point x = v;
    double margin = base;
    switch (norm) {
    case Norm::LInf:
      for (const auto& mv : moves) {
        const double t = std::min(epsilon, mv.room);
        margin -= mv.gain * t;
        x[mv.idx] = v[mv.idx] + mv.dir * t;
      }
      break;
    case Norm::L1: {
      std::stable_sort(moves.begin(), moves.end(), [](const Move& a, const Move& b) { return a.gain > b.gain; });
      double budget = epsilon;
      for (const auto& mv : moves) {
        if (budget <= 0.0)
          break;
        const double t = std::min(budget, mv.room);
        margin -= mv.gain * t;
        x[mv.idx] = v[mv.idx] + mv.dir * t;
        budget -= t;
      }
      break;
    }
    case Norm::L2: {
      double norm2 = 0.0;
      for (const auto& mv : moves)
        norm2 += mv.gain * mv.gain;
      norm2 = std::sqrt(norm2);
      if (norm2 > 0.0) {
        margin -= epsilon * norm2;
        for (const auto& mv : moves)
          x[mv.idx] = v[mv.idx] + mv.dir * epsilon * mv.gain / norm2;
      }
      break;
    }
    case Norm::L0: {
      std::stable_sort(moves.begin(), moves.end(),
                       [](const Move& a, const Move& b) { return a.gain * a.room > b.gain * b.room; });
      const auto count = std::min<std::size_t>(moves.size(), static_cast<std::size_t>(epsilon));
      for (std::size_t j = 0; j < count; ++j) {
        const auto& mv = moves[j];
        if (std::isinf(mv.room)) {
          margin = -inf;
          // any finite step past the decision boundary
          x[mv.idx] = v[mv.idx] + mv.dir * (std::max(base, 0.0) + 1.0) / mv.gain;
        } else {
          margin -= mv.gain * mv.room;
          x[mv.idx] = v[mv.idx] + mv.dir * mv.room;
        }
      }
      break;
    }
    }

    if (margin < best.margin || best.argmin.empty()) {
      best.margin = margin;
      best.rival = k;
      best.argmin = std::move(x);
    }
  }
  return best;
}

inline double linear_min_margin(const LinearModel& model, const FeatureSpace& space, const Point& v, std::size_t c,
                                const FeatureSet& free, double epsilon, Norm norm) {
  return linear_min_margin_detail(model, space, v, c, free, epsilon, norm).margin;
}

// Exact for unbounded/box real domains. On finite domains the hull relaxation
// is exact whenever its optimum lands on the grid; otherwise, and inside the
// +-tau band, the query is delegated to the exhaustive oracle.
class LinearOracle : public OracleSession {
public:
  explicit LinearOracle(const ExplanationProblem& problem, ExhaustiveOptions fallback = {})
      : problem_(problem), model_(std::get_if<LinearModel>(&problem.model())), fallback_(fallback) {
    if (!model_)
      throw OracleError(OracleError::Kind::Unsupported, "linear oracle requires a linear model");
  }

  OracleAnswer find_adv_ex(const OracleQuery& query) override {
    if (query.cancel.stop_requested())
      return OracleAnswer::cancelled_answer();
    const auto free = query.fixed.complement(problem_.num_features());
    MarginOptimum opt;
    try {
      opt = linear_min_margin_detail(*model_, problem_.space(), problem_.point(), problem_.label(), free,
                                     query.epsilon, query.norm);
    } catch (const OracleError& e) {
      if (e.kind() == OracleError::Kind::Unsupported && exhaustive_available(free))
        return exhaustive_find(problem_, query, fallback_);
      throw;
    }

    if (opt.margin > kMarginTolerance)
      return OracleAnswer::not_found();
    if (opt.margin >= -kMarginTolerance) {
      if (exhaustive_available(free))
        return exhaustive_find(problem_, query, fallback_);
      return OracleAnswer::not_found();
    }
    if (auto w = finalize_witness(std::move(opt.argmin), query))
      return OracleAnswer::found_at(std::move(w));
    if (exhaustive_available(free))
      return exhaustive_find(problem_, query, fallback_);
    return OracleAnswer::found_at(std::nullopt);
  }

private:
  bool exhaustive_available(const FeatureSet& free) const {
    return std::all_of(free.begin(), free.end(),
                       [&](std::size_t i) { return is_finite_domain(problem_.space().domain(i)); });
  }

  // Pulls the optimiser back towards v by a few ulps if rounding pushed it
  // outside the ball; gives up if it leaves the domain or stops flipping.
  std::optional<Point> finalize_witness(Point x, const OracleQuery& query) const {
    const auto& v = problem_.point();
    if (!problem_.space().contains(x))
      return std::nullopt;
    double shrink = 1.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Point y = x;
      if (shrink != 1.0)
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = v[i] + (x[i] - v[i]) * shrink;
      if (problem_.space().contains(y) && is_adv_example(y, problem_, query.epsilon, query.norm))
        return y;
      shrink *= (1.0 - 1e-12 * std::pow(10.0, attempt));
    }
    return std::nullopt;
  }

  const ExplanationProblem& problem_;
  const LinearModel* model_;
  ExhaustiveOptions fallback_;
};

inline SessionFactory linear_factory(const ExplanationProblem& problem) {
  return [&problem] { return std::make_unique<LinearOracle>(problem); };
}

}  // namespace dxp
