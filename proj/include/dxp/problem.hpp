#pragma once

#include <cstddef>
#include <string>

#include "dxp/core.hpp"
#include "dxp/models.hpp"

namespace dxp {

struct Instance {
  Point point;
  std::size_t label = 0;

  bool operator==(const Instance&) const = default;
};

// E = (M, (v, c)). Validated at construction: arities agree, v lies in the
// feature space and the model predicts c at v.
class ExplanationProblem {
public:
  ExplanationProblem(ModelRef model, FeatureSpace space, Instance instance)
      : model_(std::move(model)), space_(std::move(space)), instance_(std::move(instance)) {
    if (!model_)
      throw UsageError("explanation problem: null model");
    const std::size_t m = space_.size();
    if (dxp::num_features(*model_) != m)
      throw UsageError("model expects " + std::to_string(dxp::num_features(*model_)) +
                       " features but the feature space declares " + std::to_string(m));
    if (instance_.point.size() != m)
      throw UsageError("instance has " + std::to_string(instance_.point.size()) + " coordinates, expected " +
                       std::to_string(m));
    if (!space_.contains(instance_.point))
      throw UsageError("instance point lies outside the declared feature domains");
    if (instance_.label >= dxp::num_classes(*model_))
      throw UsageError("instance label out of range");
    const auto predicted = dxp::predict(*model_, instance_.point);
    if (predicted != instance_.label)
      throw UsageError("model predicts class " + std::to_string(predicted) + " at the instance, not " +
                       std::to_string(instance_.label));
  }

  // Builds the problem for the model's own prediction at v.
  static ExplanationProblem at(ModelRef model, FeatureSpace space, Point v) {
    const auto c = dxp::predict(*model, v);
    return ExplanationProblem(std::move(model), std::move(space), Instance{std::move(v), c});
  }

  const Model& model() const { return *model_; }
  const ModelRef& model_ref() const { return model_; }
  const FeatureSpace& space() const { return space_; }
  const Instance& instance() const { return instance_; }
  const Point& point() const { return instance_.point; }
  std::size_t label() const { return instance_.label; }
  std::size_t num_features() const { return space_.size(); }
  std::size_t num_classes() const { return dxp::num_classes(*model_); }
  FeatureSet all_features() const { return FeatureSet::all(space_.size()); }

private:
  ModelRef model_;
  FeatureSpace space_;
  Instance instance_;
};

// x is an adversarial example: inside the closed epsilon-ball around v and
// classified differently from c.
inline bool is_adv_example(const Point& x, const ExplanationProblem& problem, double epsilon, Norm norm) {
  if (!problem.space().contains(x))
    throw UsageError("is_adv_example: point lies outside the feature domains");
  return distance(x, problem.point(), norm) <= epsilon && predict(problem.model(), x) != problem.label();
}

// x agrees with v on every fixed feature.
inline bool agrees_on(const Point& x, const Point& v, const FeatureSet& fixed) {
  for (auto i : fixed)
    if (x.at(i - 1) != v.at(i - 1))
      return false;
  return true;
}

// {i : x_i != v_i}
inline FeatureSet changed_features(const Point& x, const Point& v) {
  std::vector<std::size_t> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != v[i])
      d.push_back(i + 1);
  return FeatureSet(std::move(d));
}

}  // namespace dxp
