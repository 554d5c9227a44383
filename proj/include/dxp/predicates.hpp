#pragma once

// Weak CXp / weak AXp predicates on top of an oracle session.

#include <optional>
#include <stop_token>

#include "dxp/core.hpp"
#include "dxp/oracle.hpp"
#include "dxp/problem.hpp"

namespace dxp {

struct WcxpCheck {
  bool holds = false;
  std::optional<Point> witness;
};

// Runs one oracle query with fixed = F \ free. A cancelled answer is only
// legal when the caller supplied a stop token and requested the stop.
inline OracleAnswer query_free(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& free,
                               double epsilon, Norm norm, std::stop_token cancel = {}) {
  free.validate(problem.num_features());
  OracleQuery q{epsilon, norm, free.complement(problem.num_features()), std::move(cancel)};
  auto answer = oracle.find_adv_ex(q);
  if (answer.cancelled() && !q.cancel.stop_requested())
    throw OracleError(OracleError::Kind::Protocol, "oracle cancelled a query nobody cancelled");
  validate_answer(problem, q, answer);
  return answer;
}

// d-WCXp(free): some adversarial example moves only features in `free`.
inline WcxpCheck check_wcxp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& free,
                            double epsilon, Norm norm) {
  auto a = query_free(problem, oracle, free, epsilon, norm);
  return {a.found(), std::move(a.witness)};
}

// d-WAXp(fixed): pinning `fixed` to v preserves the prediction everywhere in the ball.
inline bool check_waxp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& fixed,
                       double epsilon, Norm norm) {
  fixed.validate(problem.num_features());
  return !check_wcxp(problem, oracle, fixed.complement(problem.num_features()), epsilon, norm).holds;
}

// Weak CXp whose every one-element removal is no longer a weak CXp.
// Uses |candidate| + 1 oracle calls (fewer if it fails early).
inline bool is_minimal_cxp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& candidate,
                           double epsilon, Norm norm) {
  if (!check_wcxp(problem, oracle, candidate, epsilon, norm).holds)
    return false;
  for (auto i : candidate)
    if (check_wcxp(problem, oracle, candidate.without(i), epsilon, norm).holds)
      return false;
  return true;
}

inline bool is_minimal_axp(const ExplanationProblem& problem, OracleSession& oracle, const FeatureSet& candidate,
                           double epsilon, Norm norm) {
  if (!check_waxp(problem, oracle, candidate, epsilon, norm))
    return false;
  for (auto i : candidate)
    if (check_waxp(problem, oracle, candidate.without(i), epsilon, norm))
      return false;
  return true;
}

// Binds (problem, session, epsilon, norm) and counts the queries it issues.
class Checker {
public:
  Checker(const ExplanationProblem& problem, OracleSession& oracle, double epsilon, Norm norm)
      : problem_(problem), oracle_(oracle), epsilon_(epsilon), norm_(norm) {
    validate_radius(epsilon, norm);
  }

  WcxpCheck wcxp(const FeatureSet& free) {
    ++calls_;
    return check_wcxp(problem_, oracle_, free, epsilon_, norm_);
  }

  bool waxp(const FeatureSet& fixed) {
    ++calls_;
    return check_waxp(problem_, oracle_, fixed, epsilon_, norm_);
  }

  std::size_t calls() const { return calls_; }
  const ExplanationProblem& problem() const { return problem_; }
  double epsilon() const { return epsilon_; }
  Norm norm() const { return norm_; }
  std::size_t m() const { return problem_.num_features(); }

private:
  const ExplanationProblem& problem_;
  OracleSession& oracle_;
  double epsilon_;
  Norm norm_;
  std::size_t calls_ = 0;
};

}  // namespace dxp
