#pragma once

// Ground-truth oracle for finite domains: depth-first enumeration of the free
// features (ascending index, domain values in file order) with pruning on the
// accumulated distance. The first adversarial leaf is the witness.

#include <cstddef>
#include <limits>
#include <memory>

#include "dxp/oracle.hpp"

namespace dxp {

struct ExhaustiveOptions {
  // Maximum number of model evaluations per query.
  std::size_t max_evaluations = 50'000'000;
};

namespace detail {

class ExhaustiveSearch {
public:
  ExhaustiveSearch(const ExplanationProblem& problem, const OracleQuery& query, const ExhaustiveOptions& opts)
      : problem_(problem), query_(query), opts_(opts), x_(problem.point()) {
    const auto free = query.fixed.complement(problem.num_features());
    for (auto i : free) {
      const auto* fs = std::get_if<FiniteSet>(&problem.space().domain(i));
      if (!fs)
        throw OracleError(OracleError::Kind::Unsupported,
                          "exhaustive oracle: free feature " + std::to_string(i) + " has a real-interval domain");
      free_.push_back({i - 1, fs});
    }
  }

  OracleAnswer run() {
    if (dfs(0, DistanceAccumulator(query_.norm)))
      return OracleAnswer::found_at(x_);
    if (cancelled_)
      return OracleAnswer::cancelled_answer();
    return OracleAnswer::not_found();
  }

private:
  struct FreeFeature {
    std::size_t index;  // 0-based
    const FiniteSet* domain;
  };

  bool dfs(std::size_t depth, DistanceAccumulator acc) {
    if (depth == free_.size()) {
      if (query_.cancel.stop_requested()) {
        cancelled_ = true;
        return false;
      }
      if (++evaluations_ > opts_.max_evaluations)
        throw OracleError(OracleError::Kind::Resource, "exhaustive oracle: enumeration cap exceeded");
      return predict(problem_.model(), x_) != problem_.label();
    }
    const auto& f = free_[depth];
    const double vi = problem_.point()[f.index];
    for (double value : f.domain->values) {
      DistanceAccumulator next = acc;
      next.add(value - vi);
      if (next.value() > query_.epsilon)
        continue;
      x_[f.index] = value;
      if (dfs(depth + 1, next))
        return true;
      if (cancelled_)
        break;
    }
    x_[f.index] = vi;
    return false;
  }

  const ExplanationProblem& problem_;
  const OracleQuery& query_;
  const ExhaustiveOptions& opts_;
  std::vector<FreeFeature> free_;
  Point x_;
  std::size_t evaluations_ = 0;
  bool cancelled_ = false;
};

}  // namespace detail

inline OracleAnswer exhaustive_find(const ExplanationProblem& problem, const OracleQuery& query,
                                    const ExhaustiveOptions& opts = {}) {
  validate_radius(query.epsilon, query.norm);
  query.fixed.validate(problem.num_features());
  return detail::ExhaustiveSearch(problem, query, opts).run();
}

class ExhaustiveOracle : public OracleSession {
public:
  explicit ExhaustiveOracle(const ExplanationProblem& problem, ExhaustiveOptions opts = {})
      : problem_(problem), opts_(opts) {}

  OracleAnswer find_adv_ex(const OracleQuery& query) override { return exhaustive_find(problem_, query, opts_); }

private:
  const ExplanationProblem& problem_;
  ExhaustiveOptions opts_;
};

// The problem must outlive every session the factory produces.
inline SessionFactory exhaustive_factory(const ExplanationProblem& problem, ExhaustiveOptions opts = {}) {
  return [&problem, opts] { return std::make_unique<ExhaustiveOracle>(problem, opts); };
}

}  // namespace dxp
