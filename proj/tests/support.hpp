#pragma once

// Shared fixtures and an independent brute-force reference: every grid point
// is classified once, and weak-CXp membership of a free set is read off the
// change masks of the adversarial points inside the ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dxp/models.hpp"
#include "dxp/problem.hpp"

namespace dxp::test {

inline std::string fixture(const std::string& name) { return std::string(DXP_FIXTURE_DIR) + "/" + name; }

inline ModelRef predicate(std::size_t m, std::vector<std::pair<std::string, std::size_t>> rules, std::size_t otherwise = 0,
                          std::size_t k = 2) {
  std::vector<PredicateModel::Rule> rs;
  for (auto& [text, label] : rules)
    rs.push_back({Expr::parse(text), label});
  return make_model(PredicateModel(m, k, std::move(rs), otherwise));
}

inline const std::vector<double> kRunningGrid{0, 0.5, 1, 1.5, 2, 5};

// kappa(x) = 1 iff 0 < x1 < 2 and 4 x1 >= x2 + x3, at v = (1,1,1)
inline ExplanationProblem running_example() {
  return ExplanationProblem(predicate(3, {{"0 < x1 < 2 && 4 * x1 >= x2 + x3", 1}}),
                            FeatureSpace::grid(3, kRunningGrid), Instance{{1, 1, 1}, 1});
}

// kappa = x1 and x2 over {0,1}^m, at v = (1,1,0,...)
inline ExplanationProblem and_model(std::size_t m = 2) {
  Point v(m, 0.0);
  v[0] = v[1] = 1;
  return ExplanationProblem(predicate(m, {{"x1 == 1 && x2 == 1", 1}}), FeatureSpace::grid(m, {0, 1}),
                            Instance{v, 1});
}

// kappa = x1 or x2 over {0,1}^2, at v = (1,1)
inline ExplanationProblem or_model() {
  return ExplanationProblem(predicate(2, {{"x1 == 1 || x2 == 1", 1}}), FeatureSpace::grid(2, {0, 1}),
                            Instance{{1, 1}, 1});
}

inline ExplanationProblem constant_model(std::size_t m = 2) {
  return ExplanationProblem(predicate(m, {}), FeatureSpace::grid(m, {0, 1}), Instance{Point(m, 1.0), 0});
}

// ---------------------------------------------------------------------------
// Independent reference

inline double ref_distance(const Point& x, const Point& v, Norm norm) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::fabs(x[i] - v[i]);
    switch (norm) {
    case Norm::L0:
      acc += d != 0.0 ? 1.0 : 0.0;
      break;
    case Norm::L1:
      acc += d;
      break;
    case Norm::L2:
      acc += d * d;
      break;
    case Norm::LInf:
      acc = std::max(acc, d);
      break;
    }
  }
  return norm == Norm::L2 ? std::sqrt(acc) : acc;
}

using Mask = std::uint32_t;

inline FeatureSet from_mask(Mask s, std::size_t m) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < m; ++i)
    if (s >> i & 1u)
      v.push_back(i + 1);
  return FeatureSet(std::move(v));
}

inline Mask to_mask(const FeatureSet& s) {
  Mask out = 0;
  for (auto i : s)
    out |= Mask{1} << (i - 1);
  return out;
}

// Weak-CXp table over all 2^m free sets for a FiniteSet problem (m <= 16).
class BruteForce {
public:
  BruteForce(const ExplanationProblem& p, double epsilon, Norm norm) : m_(p.num_features()) {
    const auto full = Mask{1} << m_;
    wcxp_.assign(full, 0);
    std::vector<std::vector<double>> values;
    for (const auto& d : p.space().domains())
      values.push_back(std::get<FiniteSet>(d).values);
    std::vector<std::size_t> idx(m_, 0);
    Point x(m_);
    for (;;) {
      Mask changed = 0;
      for (std::size_t i = 0; i < m_; ++i) {
        x[i] = values[i][idx[i]];
        if (x[i] != p.point()[i])
          changed |= Mask{1} << i;
      }
      if (ref_distance(x, p.point(), norm) <= epsilon && predict(p.model(), x) != p.label())
        wcxp_[changed] = 1;
      std::size_t k = 0;
      while (k < m_ && ++idx[k] == values[k].size())
        idx[k++] = 0;
      if (k == m_)
        break;
    }
    // upward closure: a free set is weak iff it contains some change mask
    for (std::size_t i = 0; i < m_; ++i)
      for (Mask s = 0; s < full; ++s)
        if (s >> i & 1u)
          wcxp_[s] |= wcxp_[s ^ (Mask{1} << i)];
  }

  std::size_t m() const { return m_; }
  bool wcxp(Mask free) const { return wcxp_[free]; }
  bool wcxp(const FeatureSet& free) const { return wcxp_[to_mask(free)]; }
  bool waxp(Mask fixed) const { return !wcxp_[complement(fixed)]; }
  bool waxp(const FeatureSet& fixed) const { return waxp(to_mask(fixed)); }
  Mask complement(Mask s) const { return ((Mask{1} << m_) - 1) & ~s; }

  bool minimal_cxp(const FeatureSet& s) const {
    const Mask b = to_mask(s);
    if (!wcxp(b))
      return false;
    for (std::size_t i = 0; i < m_; ++i)
      if ((b >> i & 1u) && wcxp(b ^ (Mask{1} << i)))
        return false;
    return true;
  }

  bool minimal_axp(const FeatureSet& s) const {
    const Mask b = to_mask(s);
    if (!waxp(b))
      return false;
    for (std::size_t i = 0; i < m_; ++i)
      if ((b >> i & 1u) && waxp(b ^ (Mask{1} << i)))
        return false;
    return true;
  }

  std::vector<FeatureSet> cxps() const {
    std::vector<FeatureSet> out;
    for (Mask s = 0; s < (Mask{1} << m_); ++s)
      if (minimal_cxp(from_mask(s, m_)))
        out.push_back(from_mask(s, m_));
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<FeatureSet> axps() const {
    std::vector<FeatureSet> out;
    for (Mask s = 0; s < (Mask{1} << m_); ++s)
      if (minimal_axp(from_mask(s, m_)))
        out.push_back(from_mask(s, m_));
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  std::size_t m_;
  std::vector<char> wcxp_;
};

inline std::vector<FeatureSet> sorted(std::vector<FeatureSet> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// ---------------------------------------------------------------------------
// Random problems

struct RandomCase {
  std::shared_ptr<ExplanationProblem> problem;
  double epsilon;
  Norm norm;
};

// Small integer grids, a random linear or ReLU network, v drawn from the grid.
inline RandomCase random_finite_case(std::mt19937_64& rng, std::size_t max_m, std::size_t max_domain,
                                     const std::vector<Norm>& norms) {
  std::uniform_int_distribution<std::size_t> pick_m(2, max_m), pick_d(2, max_domain), pick_k(2, 3);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  const auto m = pick_m(rng);
  const auto k = pick_k(rng);

  std::vector<Domain> doms;
  Point v(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> vals;
    const auto n = pick_d(rng);
    for (std::size_t j = 0; j < n; ++j)
      vals.push_back(static_cast<double>(j));
    v[i] = vals[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
    doms.push_back(FiniteSet{vals});
  }

  auto mat = [&](std::size_t rows, std::size_t cols) {
    Matrix a(rows, std::vector<double>(cols));
    for (auto& r : a)
      for (auto& x : r)
        x = w(rng);
    return a;
  };
  auto vec = [&](std::size_t n) {
    std::vector<double> b(n);
    for (auto& x : b)
      x = w(rng);
    return b;
  };

  ModelRef model;
  if (rng() % 2 == 0) {
    model = make_model(LinearModel(mat(k, m), vec(k)));
  } else {
    const std::size_t h = 3 + rng() % 4;
    model = make_model(MlpModel({DenseLayer{mat(h, m), vec(h), Activation::Relu},
                                 DenseLayer{mat(k, h), vec(k), Activation::Identity}}));
  }

  const Norm norm = norms[rng() % norms.size()];
  double eps = 0.0;
  switch (norm) {
  case Norm::L0:
    eps = static_cast<double>(std::uniform_int_distribution<std::size_t>(1, m)(rng));
    break;
  case Norm::LInf:
    eps = static_cast<double>(std::uniform_int_distribution<int>(1, static_cast<int>(max_domain) - 1)(rng));
    break;
  default:
    eps = static_cast<double>(std::uniform_int_distribution<std::size_t>(1, m + 1)(rng));
    break;
  }
  auto problem = std::make_shared<ExplanationProblem>(ExplanationProblem::at(model, FeatureSpace(doms), v));
  return {problem, eps, norm};
}

}  // namespace dxp::test
