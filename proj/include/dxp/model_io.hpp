#pragma once

// JSON model and instance files.
//
// Model document:
//   {
//     "kind": "linear" | "mlp" | "predicate",
//     "num_features": m,
//     "num_classes": K,
//     "domains": [ {"type": "real", "lower": null, "upper": 2.5},
//                  {"type": "finite", "values": [0, 0.5, 1]}, ... ],
//     // linear
//     "weights": [[...], ...], "biases": [...],
//     // mlp
//     "layers": [ {"weights": [[...]], "biases": [...], "activation": "relu" | "identity"}, ... ],
//     // predicate
//     "rules": [ {"if": "0 < x1 < 2 && 4*x1 >= x2 + x3", "class": 1} ], "otherwise": 0
//   }
//
// Instance document: {"point": [...], "label": c}

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dxp/core.hpp"
#include "dxp/models.hpp"
#include "dxp/problem.hpp"

namespace dxp {

// Structurally valid document whose pieces disagree (e.g. weights vs declared arity).
class ValidationError : public ParseError {
public:
  using ParseError::ParseError;
};

struct ModelFile {
  ModelRef model;
  FeatureSpace space;
};

namespace io {

using nlohmann::json;

inline const json& field(const json& obj, const std::string& name, const std::string& ctx) {
  if (!obj.is_object())
    throw ParseError(ctx + ": expected an object");
  auto it = obj.find(name);
  if (it == obj.end())
    throw ParseError("missing field '" + (ctx.empty() ? name : ctx + "." + name) + "'");
  return *it;
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ParseError("field '" + path + "' has the wrong type");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number())
    throw ParseError("field '" + path + "' must be a number");
  return j.get<double>();
}

inline std::size_t index(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ParseError("field '" + path + "' must be a nonnegative integer");
  return j.get<std::size_t>();
}

inline std::vector<double> vector(const json& j, const std::string& path) {
  if (!j.is_array())
    throw ParseError("field '" + path + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Matrix matrix(const json& j, const std::string& path) {
  if (!j.is_array())
    throw ParseError("field '" + path + "' must be an array of rows");
  Matrix out;
  for (std::size_t r = 0; r < j.size(); ++r)
    out.push_back(vector(j[r], path + "[" + std::to_string(r) + "]"));
  return out;
}

inline Domain domain(const json& j, const std::string& path) {
  const auto type = get_as<std::string>(field(j, "type", path), path + ".type");
  if (type == "finite") {
    return FiniteSet{vector(field(j, "values", path), path + ".values")};
  }
  if (type == "real") {
    RealInterval ri;
    auto bound = [&](const char* name) -> std::optional<double> {
      auto it = j.find(name);
      if (it == j.end() || it->is_null())
        return std::nullopt;
      return number(*it, path + "." + name);
    };
    ri.lower = bound("lower");
    ri.upper = bound("upper");
    return ri;
  }
  throw ParseError("field '" + path + ".type' must be \"real\" or \"finite\"");
}

inline json to_json(const Domain& d) {
  if (const auto* fs = std::get_if<FiniteSet>(&d))
    return json{{"type", "finite"}, {"values", fs->values}};
  const auto& ri = std::get<RealInterval>(d);
  json j{{"type", "real"}};
  j["lower"] = ri.lower ? json(*ri.lower) : json(nullptr);
  j["upper"] = ri.upper ? json(*ri.upper) : json(nullptr);
  return j;
}

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write '" + path + "'");
  out << text;
}

}  // namespace io

inline nlohmann::json model_to_json(const Model& model, const FeatureSpace& space) {
  using io::json;
  json j;
  j["kind"] = kind_name(model);
  j["num_features"] = num_features(model);
  j["num_classes"] = num_classes(model);
  json doms = json::array();
  for (const auto& d : space.domains())
    doms.push_back(io::to_json(d));
  j["domains"] = doms;
  if (const auto* l = std::get_if<LinearModel>(&model)) {
    j["weights"] = l->weights();
    j["biases"] = l->biases();
  } else if (const auto* n = std::get_if<MlpModel>(&model)) {
    json layers = json::array();
    for (const auto& layer : n->layers())
      layers.push_back(json{{"weights", layer.weights},
                            {"biases", layer.biases},
                            {"activation", layer.activation == Activation::Relu ? "relu" : "identity"}});
    j["layers"] = layers;
  } else {
    const auto& p = std::get<PredicateModel>(model);
    json rules = json::array();
    for (const auto& r : p.rules())
      rules.push_back(json{{"if", r.condition.to_string()}, {"class", r.label}});
    j["rules"] = rules;
    j["otherwise"] = p.otherwise();
  }
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  const auto kind = io::get_as<std::string>(io::field(j, "kind", ""), "kind");
  const auto m = io::index(io::field(j, "num_features", ""), "num_features");
  const auto k = io::index(io::field(j, "num_classes", ""), "num_classes");

  const auto& doms = io::field(j, "domains", "");
  if (!doms.is_array())
    throw ParseError("field 'domains' must be an array");
  std::vector<Domain> domains;
  for (std::size_t i = 0; i < doms.size(); ++i)
    domains.push_back(io::domain(doms[i], "domains[" + std::to_string(i) + "]"));
  if (domains.size() != m)
    throw ValidationError("field 'domains' lists " + std::to_string(domains.size()) + " features, num_features is " +
                          std::to_string(m));

  ModelFile out;
  try {
    out.space = FeatureSpace(std::move(domains));
  } catch (const UsageError& e) {
    throw ValidationError(std::string("field 'domains': ") + e.what());
  }

  try {
    if (kind == "linear") {
      auto w = io::matrix(io::field(j, "weights", ""), "weights");
      auto b = io::vector(io::field(j, "biases", ""), "biases");
      out.model = make_model(LinearModel(std::move(w), std::move(b)));
    } else if (kind == "mlp") {
      const auto& layers = io::field(j, "layers", "");
      if (!layers.is_array())
        throw ParseError("field 'layers' must be an array");
      std::vector<DenseLayer> parsed;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string path = "layers[" + std::to_string(l) + "]";
        DenseLayer layer;
        layer.weights = io::matrix(io::field(layers[l], "weights", path), path + ".weights");
        layer.biases = io::vector(io::field(layers[l], "biases", path), path + ".biases");
        const auto act = io::get_as<std::string>(io::field(layers[l], "activation", path), path + ".activation");
        if (act == "relu")
          layer.activation = Activation::Relu;
        else if (act == "identity")
          layer.activation = Activation::Identity;
        else
          throw ParseError("field '" + path + ".activation' must be \"relu\" or \"identity\"");
        parsed.push_back(std::move(layer));
      }
      out.model = make_model(MlpModel(std::move(parsed)));
    } else if (kind == "predicate") {
      const auto& rules = io::field(j, "rules", "");
      if (!rules.is_array())
        throw ParseError("field 'rules' must be an array");
      std::vector<PredicateModel::Rule> parsed;
      for (std::size_t r = 0; r < rules.size(); ++r) {
        const std::string path = "rules[" + std::to_string(r) + "]";
        const auto text = io::get_as<std::string>(io::field(rules[r], "if", path), path + ".if");
        Expr cond = [&] {
          try {
            return Expr::parse(text);
          } catch (const ParseError& e) {
            throw ParseError("field '" + path + ".if': " + e.what());
          }
        }();
        parsed.push_back({std::move(cond), io::index(io::field(rules[r], "class", path), path + ".class")});
      }
      const auto otherwise = io::index(io::field(j, "otherwise", ""), "otherwise");
      out.model = make_model(PredicateModel(m, k, std::move(parsed), otherwise));
    } else {
      throw ParseError("field 'kind' must be \"linear\", \"mlp\" or \"predicate\", got \"" + kind + "\"");
    }
  } catch (const UsageError& e) {
    throw ValidationError(e.what());
  }

  if (num_features(*out.model) != m)
    throw ValidationError("model arity " + std::to_string(num_features(*out.model)) +
                          " does not match num_features " + std::to_string(m));
  if (num_classes(*out.model) != k)
    throw ValidationError("model has " + std::to_string(num_classes(*out.model)) +
                          " classes but num_classes is " + std::to_string(k));
  return out;
}

inline ModelFile parse_model(const std::string& text) {
  return model_from_json(io::parse_text(text, "model"));
}

inline std::string dump_model(const Model& model, const FeatureSpace& space) {
  return model_to_json(model, space).dump(2) + "\n";
}

inline ModelFile load_model(const std::string& path) {
  try {
    return parse_model(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_model(const Model& model, const FeatureSpace& space, const std::string& path) {
  io::write_file(path, dump_model(model, space));
}

inline Instance parse_instance(const std::string& text) {
  const auto j = io::parse_text(text, "instance");
  Instance inst;
  inst.point = io::vector(io::field(j, "point", ""), "point");
  inst.label = io::index(io::field(j, "label", ""), "label");
  return inst;
}

inline Instance load_instance(const std::string& path) {
  try {
    return parse_instance(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline std::string dump_instance(const Instance& inst) {
  return nlohmann::json{{"point", inst.point}, {"label", inst.label}}.dump() + "\n";
}

}  // namespace dxp
