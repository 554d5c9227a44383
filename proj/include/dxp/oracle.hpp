#pragma once

// The FindAdvEx contract: decide whether an adversarial example exists inside
// the epsilon-ball while a given set of features stays pinned to v.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stop_token>

#include "dxp/core.hpp"
#include "dxp/problem.hpp"

namespace dxp {

struct OracleQuery {
  double epsilon = 0.0;
  Norm norm = Norm::L1;
  FeatureSet fixed;
  std::stop_token cancel;
};

enum class Verdict { NotFound, Found, Cancelled };

struct OracleAnswer {
  Verdict verdict = Verdict::NotFound;
  std::optional<Point> witness;  // only when found, and only if the backend supplies one
  std::size_t calls_used = 1;

  bool found() const { return verdict == Verdict::Found; }
  bool cancelled() const { return verdict == Verdict::Cancelled; }

  static OracleAnswer not_found() { return {Verdict::NotFound, std::nullopt}; }
  static OracleAnswer cancelled_answer() { return {Verdict::Cancelled, std::nullopt}; }
  static OracleAnswer found_at(std::optional<Point> w) { return {Verdict::Found, std::move(w)}; }
};

// One oracle session, bound to a single explanation problem. Sessions are not
// required to accept concurrent queries unless documented otherwise.
class OracleSession {
public:
  virtual ~OracleSession() = default;
  virtual OracleAnswer find_adv_ex(const OracleQuery& query) = 0;
};

// Produces independent sessions; distinct sessions may be used from distinct
// threads concurrently.
using SessionFactory = std::function<std::unique_ptr<OracleSession>()>;

// Throws OracleError(Protocol) if a reported witness breaks the contract:
// outside the domains, outside the ball, not misclassified, or moving a fixed feature.
inline void validate_answer(const ExplanationProblem& problem, const OracleQuery& query, const OracleAnswer& answer) {
  if (!answer.witness)
    return;
  if (!answer.found())
    throw OracleError(OracleError::Kind::Protocol, "oracle returned a witness without reporting one found");
  const auto& w = *answer.witness;
  if (w.size() != problem.num_features() || !problem.space().contains(w))
    throw OracleError(OracleError::Kind::Protocol, "oracle witness lies outside the feature space");
  if (!agrees_on(w, problem.point(), query.fixed))
    throw OracleError(OracleError::Kind::Protocol, "oracle witness moves a fixed feature");
  if (!is_adv_example(w, problem, query.epsilon, query.norm))
    throw OracleError(OracleError::Kind::Protocol, "oracle witness is not an adversarial example");
}

}  // namespace dxp
