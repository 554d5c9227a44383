#pragma once

// Built-in classifiers. Every model is immutable after construction and its
// evaluation is reentrant.

#include <cstddef>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "dxp/core.hpp"
#include "dxp/expr.hpp"

namespace dxp {

using Matrix = std::vector<std::vector<double>>;  // row-major, rows = outputs

namespace detail {

inline std::vector<double> affine(const Matrix& w, const std::vector<double>& b, const std::vector<double>& x) {
  std::vector<double> y(w.size());
  for (std::size_t r = 0; r < w.size(); ++r) {
    double acc = b[r];
    const auto& row = w[r];
    for (std::size_t c = 0; c < row.size(); ++c)
      acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// Lowest index wins ties.
inline std::size_t argmax(const std::vector<double>& s) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.size(); ++k)
    if (s[k] > s[best])
      best = k;
  return best;
}

inline void check_matrix(const Matrix& w, std::size_t cols, const std::string& what) {
  for (std::size_t r = 0; r < w.size(); ++r)
    if (w[r].size() != cols)
      throw UsageError(what + ": row " + std::to_string(r) + " has " + std::to_string(w[r].size()) +
                       " columns, expected " + std::to_string(cols));
}

}  // namespace detail

// K-class linear classifier: predict(x) = argmax_k (w_k . x + b_k).
class LinearModel {
public:
  LinearModel(Matrix weights, std::vector<double> biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    if (weights_.size() < 2)
      throw UsageError("linear model needs at least two classes");
    if (biases_.size() != weights_.size())
      throw UsageError("linear model: bias count differs from class count");
    if (weights_[0].empty())
      throw UsageError("linear model: zero features");
    detail::check_matrix(weights_, weights_[0].size(), "linear model weights");
  }

  std::size_t num_features() const { return weights_[0].size(); }
  std::size_t num_classes() const { return weights_.size(); }
  const Matrix& weights() const { return weights_; }
  const std::vector<double>& biases() const { return biases_; }

  std::vector<double> scores(const Point& x) const { return detail::affine(weights_, biases_, x); }

  bool operator==(const LinearModel&) const = default;

private:
  Matrix weights_;
  std::vector<double> biases_;
};

enum class Activation { Identity, Relu };

struct DenseLayer {
  Matrix weights;
  std::vector<double> biases;
  Activation activation = Activation::Relu;

  bool operator==(const DenseLayer&) const = default;
};

// Feed-forward network of dense layers. The last layer's width is the class
// count and its outputs are the logits.
class MlpModel {
public:
  explicit MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty())
      throw UsageError("mlp: at least one layer required");
    if (layers_[0].weights.empty() || layers_[0].weights[0].empty())
      throw UsageError("mlp: first layer is empty");
    std::size_t in = layers_[0].weights[0].size();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      const std::string what = "mlp layer " + std::to_string(l);
      if (layer.weights.empty())
        throw UsageError(what + ": no outputs");
      detail::check_matrix(layer.weights, in, what);
      if (layer.biases.size() != layer.weights.size())
        throw UsageError(what + ": bias count differs from output width");
      in = layer.weights.size();
    }
    if (in < 2)
      throw UsageError("mlp: final layer must have at least two outputs");
  }

  std::size_t num_features() const { return layers_[0].weights[0].size(); }
  std::size_t num_classes() const { return layers_.back().weights.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<double> scores(const Point& x) const {
    std::vector<double> h = x;
    for (const auto& layer : layers_) {
      h = detail::affine(layer.weights, layer.biases, h);
      if (layer.activation == Activation::Relu)
        for (auto& z : h)
          z = z > 0.0 ? z : 0.0;
    }
    return h;
  }

  bool operator==(const MlpModel&) const = default;

private:
  std::vector<DenseLayer> layers_;
};

// Ordered decision rules: the first rule whose condition holds gives the
// class, otherwise the default class. Has no scores.
class PredicateModel {
public:
  struct Rule {
    Expr condition;
    std::size_t label;
    bool operator==(const Rule&) const = default;
  };

  PredicateModel(std::size_t num_features, std::size_t num_classes, std::vector<Rule> rules, std::size_t otherwise)
      : m_(num_features), k_(num_classes), rules_(std::move(rules)), otherwise_(otherwise) {
    if (m_ == 0)
      throw UsageError("predicate model: zero features");
    if (k_ < 2)
      throw UsageError("predicate model needs at least two classes");
    if (otherwise_ >= k_)
      throw UsageError("predicate model: default class out of range");
    for (const auto& r : rules_) {
      if (!r.condition.is_boolean())
        throw UsageError("predicate model: rule condition is not boolean: " + r.condition.to_string());
      if (r.condition.max_feature() > m_)
        throw UsageError("predicate model: rule references x" + std::to_string(r.condition.max_feature()) +
                         " but model has " + std::to_string(m_) + " features");
      if (r.label >= k_)
        throw UsageError("predicate model: rule class out of range");
    }
  }

  std::size_t num_features() const { return m_; }
  std::size_t num_classes() const { return k_; }
  const std::vector<Rule>& rules() const { return rules_; }
  std::size_t otherwise() const { return otherwise_; }

  std::size_t classify(const Point& x) const {
    for (const auto& r : rules_)
      if (r.condition.holds(x))
        return r.label;
    return otherwise_;
  }

  bool operator==(const PredicateModel&) const = default;

private:
  std::size_t m_;
  std::size_t k_;
  std::vector<Rule> rules_;
  std::size_t otherwise_;
};

using Model = std::variant<LinearModel, MlpModel, PredicateModel>;
using ModelRef = std::shared_ptr<const Model>;

inline std::size_t num_features(const Model& model) {
  return std::visit([](const auto& m) { return m.num_features(); }, model);
}

inline std::size_t num_classes(const Model& model) {
  return std::visit([](const auto& m) { return m.num_classes(); }, model);
}

inline std::string kind_name(const Model& model) {
  switch (model.index()) {
  case 0: return "linear";
  case 1: return "mlp";
  default: return "predicate";
  }
}

inline bool has_scores(const Model& model) { return !std::holds_alternative<PredicateModel>(model); }

inline std::size_t predict(const Model& model, const Point& x) {
  if (x.size() != num_features(model))
    throw UsageError("predict: point has " + std::to_string(x.size()) + " coordinates, model expects " +
                     std::to_string(num_features(model)));
  if (const auto* p = std::get_if<PredicateModel>(&model))
    return p->classify(x);
  if (const auto* l = std::get_if<LinearModel>(&model))
    return detail::argmax(l->scores(x));
  return detail::argmax(std::get<MlpModel>(model).scores(x));
}

// Class-k logit.
inline double score(const Model& model, const Point& x, std::size_t k) {
  if (x.size() != num_features(model))
    throw UsageError("score: arity mismatch");
  if (k >= num_classes(model))
    throw UsageError("score: class index out of range");
  if (const auto* l = std::get_if<LinearModel>(&model))
    return l->scores(x)[k];
  if (const auto* n = std::get_if<MlpModel>(&model))
    return n->scores(x)[k];
  throw UsageError("predicate model has no scores");
}

template <class M>
ModelRef make_model(M m) {
  return std::make_shared<const Model>(std::move(m));
}

}  // namespace dxp
