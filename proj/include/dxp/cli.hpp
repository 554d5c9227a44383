#pragma once

// Command-line front end. run_cli() takes the arguments after the program name
// and returns the exit code: 0 success, 1 error, 2 no adversarial example.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dxp/enumerate.hpp"
#include "dxp/explain.hpp"
#include "dxp/mincxp.hpp"
#include "dxp/model_io.hpp"
#include "dxp/oracles/exhaustive.hpp"
#include "dxp/oracles/external.hpp"
#include "dxp/oracles/latency.hpp"
#include "dxp/oracles/linear.hpp"
#include "dxp/synthetic.hpp"

namespace dxp::cli {

using record = nlohmann::ordered_json;

enum class Algo { Linear, Dicho, Swift };

struct RunConfig {
  std::string model_path;
  std::string instance_path;
  double epsilon = 0.0;
  std::string norm = "l1";
  std::string algo = "dicho";
  std::size_t workers = 1;
  double delta = 0.85;
  std::string order = "natural";
  std::uint64_t seed = 0;
  std::string oracle = "auto";
  long oracle_timeout_ms = 0;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> cxp_limit;
  std::string shape;
  std::string output;
  bool no_verify = false;
  bool no_timing = false;
  long delay_ms = 0;
  std::size_t synthetic = 0;
};

inline Algo parse_algo(const std::string& s) {
  if (s == "linear")
    return Algo::Linear;
  if (s == "dicho")
    return Algo::Dicho;
  if (s == "swift")
    return Algo::Swift;
  throw UsageError("unknown algorithm '" + s + "' (expected linear, dicho or swift)");
}

inline std::string algo_name(Algo a) {
  switch (a) {
  case Algo::Linear:
    return "linear";
  case Algo::Dicho:
    return "dicho";
  case Algo::Swift:
    return "swift";
  }
  return "?";
}

// "HxW"
inline std::pair<std::size_t, std::size_t> parse_shape(const std::string& s) {
  const auto x = s.find_first_of("xX");
  auto num = [&](const std::string& part) -> std::size_t {
    if (part.empty() || !std::all_of(part.begin(), part.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw UsageError("bad --shape '" + s + "' (expected HxW)");
    return std::stoul(part);
  };
  if (x == std::string::npos)
    throw UsageError("bad --shape '" + s + "' (expected HxW)");
  const auto h = num(s.substr(0, x)), w = num(s.substr(x + 1));
  if (h == 0 || w == 0)
    throw UsageError("bad --shape '" + s + "': dimensions must be positive");
  return {h, w};
}

// Plain-text graymap, row-major, pixel = round(255 * score).
inline std::string graymap(const std::vector<double>& scores, std::size_t h, std::size_t w) {
  if (scores.size() != h * w + 1)
    throw UsageError("--shape " + std::to_string(h) + "x" + std::to_string(w) + " does not match " +
                     std::to_string(scores.size() - 1) + " features");
  std::ostringstream os;
  os << "P2\n" << w << ' ' << h << "\n255\n";
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = std::clamp(scores[1 + r * w + c], 0.0, 1.0);
      os << (c ? " " : "") << std::lround(255.0 * v);
    }
    os << '\n';
  }
  return os.str();
}

inline std::string ffa_csv(const std::vector<double>& scores) {
  std::ostringstream os;
  os << "feature,score\n";
  os.precision(17);
  for (std::size_t i = 1; i < scores.size(); ++i)
    os << i << ',' << scores[i] << '\n';
  return os.str();
}

namespace detail {

inline FeatureOrder read_order_file(const std::string& path) {
  const auto j = io::parse_text(io::read_file(path), "order file " + path);
  if (!j.is_array())
    throw ParseError("order file " + path + ": expected an array of feature indices");
  FeatureOrder order;
  for (std::size_t k = 0; k < j.size(); ++k)
    order.push_back(io::index(j[k], "order[" + std::to_string(k) + "]"));
  return order;
}

struct Loaded {
  std::optional<ExplanationProblem> problem;
  std::optional<FeatureSet> expected;  // synthetic problems only
};

inline Loaded load_problem(const RunConfig& cfg) {
  Loaded l;
  if (cfg.synthetic > 0) {
    auto s = synthetic_linear(cfg.synthetic);
    l.problem.emplace(std::move(s.problem));
    l.expected = s.cxp;
    return l;
  }
  if (cfg.model_path.empty() || cfg.instance_path.empty())
    throw UsageError("--model and --instance are required");
  auto mf = load_model(cfg.model_path);
  auto inst = load_instance(cfg.instance_path);
  l.problem.emplace(mf.model, mf.space, std::move(inst));
  return l;
}

inline SessionFactory make_factory(const ExplanationProblem& problem, const RunConfig& cfg) {
  const auto& o = cfg.oracle;
  if (o == "auto") {
    if (std::holds_alternative<LinearModel>(problem.model()))
      return linear_factory(problem);
    if (problem.space().all_finite())
      return exhaustive_factory(problem);
    throw UsageError("--oracle auto: no built-in oracle handles this problem; use --oracle external:<cmd>");
  }
  if (o == "exhaustive")
    return exhaustive_factory(problem);
  if (o == "linear") {
    if (!std::holds_alternative<LinearModel>(problem.model()))
      throw UsageError("--oracle linear requires a linear model");
    return linear_factory(problem);
  }
  if (o.rfind("external:", 0) == 0) {
    ExternalConfig ec{o.substr(9), std::chrono::milliseconds(cfg.oracle_timeout_ms)};
    if (ec.command.empty())
      throw UsageError("--oracle external: needs a command");
    return external_factory(problem, ec);
  }
  throw UsageError("unknown oracle '" + o + "'");
}

inline FeatureOrder make_order(const ExplanationProblem& problem, const RunConfig& cfg, double eps, Norm norm,
                               std::ostream& err) {
  OrderResult r;
  if (cfg.order == "natural")
    r = order_features(problem, OrderStrategy::Natural, eps, norm);
  else if (cfg.order == "sensitivity")
    r = order_features(problem, OrderStrategy::Sensitivity, eps, norm);
  else if (cfg.order.rfind("file=", 0) == 0)
    r = order_features(problem, OrderStrategy::File, eps, norm, read_order_file(cfg.order.substr(5)));
  else
    throw UsageError("unknown --order '" + cfg.order + "'");
  if (r.warning)
    err << "dxp: warning: " << *r.warning << '\n';
  return r.order;
}

// Output sink: --output file or the given stream.
class Sink {
public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_)
        throw Error("cannot open " + path + " for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }
  void line(const record& r) { *os_ << r.dump() << '\n'; }

private:
  std::ofstream file_;
  std::ostream* os_;
};

}  // namespace detail

class Runner {
public:
  Runner(RunConfig cfg, std::ostream& out, std::ostream& err) : cfg_(std::move(cfg)), out_(out), err_(err) {}

  int cxp() {
    setup();
    const auto algo = parse_algo(cfg_.algo);
    const auto r = run_algo(algo);
    detail::Sink sink(cfg_.output, out_);
    if (!has_cxp(r))
      return no_adv(sink, std::get<NoAdvExample>(r).stats);
    const auto& e = cxp_of(r);
    auto rec = explanation_record(e);
    rec["algo"] = algo_name(algo);
    rec["verified"] = verify(e);
    sink.line(rec);
    return 0;
  }

  int axp() {
    setup();
    auto session = factory_();
    const auto e = extract_axp(problem(), *session, problem().all_features(), order_, eps_, norm_);
    detail::Sink sink(cfg_.output, out_);
    auto rec = explanation_record(e);
    rec["verified"] = verify(e);
    sink.line(rec);
    return 0;
  }

  int enumerate() {
    setup();
    detail::Sink sink(cfg_.output, out_);
    auto session = factory_();
    EnumerateOptions opts{cfg_.limit, cfg_.cxp_limit};
    bool verified_all = true;
    const auto sets = marco_enumerate(problem(), *session, eps_, norm_, order_, opts, [&](const Explanation& e) {
      auto rec = explanation_record(e);
      const auto v = verify(e);
      if (v.is_boolean() && !v.get<bool>())
        verified_all = false;
      rec["verified"] = v;
      sink.line(rec);
    });
    record summary;
    summary["summary"] = true;
    summary["axps"] = sets.axps.size();
    summary["cxps"] = sets.cxps.size();
    summary["complete"] = sets.complete;
    summary["oracle_calls"] = sets.oracle_calls;
    if (sets.complete)
      summary["duality"] = check_duality(sets);
    sink.line(summary);
    if (sets.error) {
      err_ << "dxp: enumeration stopped early: " << *sets.error << '\n';
      return 1;
    }
    return verified_all ? 0 : 1;
  }

  int ffa() {
    setup();
    std::optional<std::pair<std::size_t, std::size_t>> shape;
    if (!cfg_.shape.empty()) {
      shape = parse_shape(cfg_.shape);
      if (shape->first * shape->second != problem().num_features())
        throw UsageError("--shape " + cfg_.shape + " has " + std::to_string(shape->first * shape->second) +
                         " pixels but the model has " + std::to_string(problem().num_features()) + " features");
      if (cfg_.output.empty())
        throw UsageError("--shape needs --output for the graymap");
    }
    auto session = factory_();
    const auto sets = marco_enumerate(problem(), *session, eps_, norm_, order_, {cfg_.limit, cfg_.cxp_limit});
    if (sets.error) {
      err_ << "dxp: enumeration stopped early: " << *sets.error << '\n';
      return 1;
    }
    if (sets.cxps.empty()) {
      err_ << NoAdvExample{eps_, norm_, {}}.message() << '\n';
      return 2;
    }
    if (!sets.complete)
      err_ << "dxp: warning: enumeration incomplete; scores cover " << sets.cxps.size() << " CXps\n";
    const auto scores = ffa_scores(sets.cxps, problem().num_features());
    out_ << ffa_csv(scores);
    if (shape)
      io::write_file(cfg_.output, graymap(scores, shape->first, shape->second));
    return 0;
  }

  int min_cxp() {
    setup();
    auto session = factory_();
    const auto r = smallest_cxp(problem(), *session, eps_, norm_);
    detail::Sink sink(cfg_.output, out_);
    if (!has_cxp(r.result))
      return no_adv(sink, std::get<NoAdvExample>(r.result).stats);
    const auto& e = cxp_of(r.result);
    auto rec = explanation_record(e);
    rec["iterations"] = r.iterations;
    rec["lower_bound"] = r.lower_bound();
    rec["verified"] = verify(e);
    sink.line(rec);
    return 0;
  }

  int bench() {
    setup();
    const auto base = factory_;
    if (cfg_.delay_ms > 0)
      factory_ = latency_factory(
          base, DelayDistribution::fixed(std::chrono::milliseconds(cfg_.delay_ms)), cfg_.seed);
    detail::Sink sink(cfg_.output, out_);
    std::vector<std::pair<Algo, CxpResult>> rows;
    for (auto algo : {Algo::Linear, Algo::Dicho, Algo::Swift})
      rows.emplace_back(algo, run_algo(algo));

    auto wall = [](const CxpResult& r) {
      return has_cxp(r) ? cxp_of(r).stats.wall_ms() : std::get<NoAdvExample>(r).stats.wall_ms();
    };
    const double dicho_ms = wall(rows[1].second);
    bool identical = true;
    for (const auto& [algo, r] : rows) {
      record rec;
      rec["algo"] = algo_name(algo);
      if (has_cxp(r)) {
        const auto& e = cxp_of(r);
        rec = explanation_record(e);
        rec["algo"] = algo_name(algo);
        rec["verified"] = verify(e);
        if (expected_)
          rec["expected"] = e.features == *expected_;
        if (!has_cxp(rows[1].second) || cxp_of(rows[1].second).features != e.features)
          identical = false;
      } else {
        rec["kind"] = "none";
        rec["oracle_calls"] = std::get<NoAdvExample>(r).stats.oracle_calls;
        if (has_cxp(rows[1].second))
          identical = false;
      }
      if (!cfg_.no_timing)
        rec["speedup_vs_dicho"] = wall(r) > 0 ? dicho_ms / wall(r) : 0.0;
      sink.line(rec);
    }
    record summary;
    summary["summary"] = true;
    summary["workers"] = cfg_.workers;
    summary["delay_ms"] = cfg_.delay_ms;
    summary["identical"] = identical;
    sink.line(summary);
    return 0;
  }

private:
  const ExplanationProblem& problem() const { return *loaded_.problem; }

  void setup() {
    norm_ = parse_norm(cfg_.norm);
    eps_ = cfg_.epsilon;
    validate_radius(eps_, norm_);
    if (cfg_.workers == 0)
      throw UsageError("--workers must be at least 1");
    if (!(cfg_.delta >= 0.0 && cfg_.delta <= 1.0))
      throw UsageError("--delta must lie in [0,1]");
    loaded_ = detail::load_problem(cfg_);
    expected_ = loaded_.expected;
    factory_ = detail::make_factory(problem(), cfg_);
    order_ = detail::make_order(problem(), cfg_, eps_, norm_, err_);
  }

  CxpResult run_algo(Algo algo) {
    switch (algo) {
    case Algo::Linear: {
      auto s = factory_();
      return deletion_cxp(problem(), *s, order_, eps_, norm_);
    }
    case Algo::Dicho: {
      auto s = factory_();
      return dichotomic_cxp(problem(), *s, order_, eps_, norm_);
    }
    case Algo::Swift:
      return swift_cxp(problem(), factory_, order_, eps_, norm_, SwiftOptions{cfg_.workers, cfg_.delta, cfg_.seed});
    }
    throw UsageError("unknown algorithm");
  }

  record explanation_record(const Explanation& e) const {
    record r;
    r["kind"] = to_string(e.kind);
    r["features"] = e.features.members();
    r["size"] = e.features.size();
    r["epsilon"] = e.epsilon;
    r["norm"] = to_string(e.norm);
    r["oracle_calls"] = e.stats.oracle_calls;
    r["cancelled_calls"] = e.stats.cancelled_calls;
    r["parallel_rounds"] = e.stats.parallel_rounds;
    if (!cfg_.no_timing)
      r["wall_ms"] = e.stats.wall_ms();
    return r;
  }

  int no_adv(detail::Sink& sink, const CallStats& stats) {
    const NoAdvExample none{eps_, norm_, stats};
    record r;
    r["kind"] = "none";
    r["message"] = none.message();
    r["oracle_calls"] = stats.oracle_calls;
    sink.line(r);
    err_ << none.message() << '\n';
    return 2;
  }

  // Re-checks minimality with a fresh exhaustive oracle; null when skipped.
  record verify(const Explanation& e) {
    if (cfg_.no_verify || !problem().space().all_finite())
      return nullptr;
    ExhaustiveOracle independent(problem());
    const bool ok = e.kind == ExplanationKind::CXp ? is_minimal_cxp(problem(), independent, e.features, eps_, norm_)
                                                   : is_minimal_axp(problem(), independent, e.features, eps_, norm_);
    if (!ok)
      throw Error("self-check failed: " + to_string(e.kind) + " " + to_string(e.features) +
                  " is not minimal under an exhaustive oracle");
    return true;
  }

  RunConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
  detail::Loaded loaded_;
  std::optional<FeatureSet> expected_;
  SessionFactory factory_;
  FeatureOrder order_;
  double eps_ = 0.0;
  Norm norm_ = Norm::L1;
};

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distance-restricted formal explanations for classifiers", "dxp"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub, bool needs_files) {
    auto* model = sub->add_option("--model", cfg.model_path, "model file")->check(CLI::ExistingFile);
    auto* inst = sub->add_option("--instance", cfg.instance_path, "instance file")->check(CLI::ExistingFile);
    if (needs_files) {
      model->required();
      inst->required();
    }
    sub->add_option("--epsilon", cfg.epsilon, "ball radius (a positive integer for l0)")->required();
    sub->add_option("--norm", cfg.norm, "l0, l1, l2 or linf")
        ->check(CLI::IsMember({"l0", "l1", "l2", "linf"}, CLI::ignore_case))
        ->transform([](std::string s) {
          std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
          return s;
        });
    sub->add_option("--order", cfg.order, "natural, sensitivity or file=PATH");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--oracle", cfg.oracle, "auto, exhaustive, linear or external:<cmd>");
    sub->add_option("--oracle-timeout-ms", cfg.oracle_timeout_ms, "per-query limit for external oracles (0 = none)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--output", cfg.output, "write records to this file");
    sub->add_flag("--no-verify", cfg.no_verify, "skip the exhaustive self-check");
    sub->add_flag("--no-timing", cfg.no_timing, "omit wall times from records");
  };
  auto algos = [&](CLI::App* sub) {
    sub->add_option("--algo", cfg.algo, "linear, dicho or swift")->check(CLI::IsMember({"linear", "dicho", "swift"}));
    sub->add_option("--workers", cfg.workers, "parallel probes for swift")->check(CLI::PositiveNumber);
    sub->add_option("--delta", cfg.delta, "feature-disjunction threshold for swift")->check(CLI::Range(0.0, 1.0));
  };
  auto limits = [&](CLI::App* sub) {
    sub->add_option("--limit", cfg.limit, "stop after this many explanations");
    sub->add_option("--cxp-limit", cfg.cxp_limit, "stop after this many CXps");
  };

  auto* cxp = app.add_subcommand("cxp", "compute one contrastive explanation");
  common(cxp, true);
  algos(cxp);
  auto* axp = app.add_subcommand("axp", "compute one abductive explanation");
  common(axp, true);
  auto* en = app.add_subcommand("enumerate", "enumerate all AXps and CXps");
  common(en, true);
  limits(en);
  auto* ffa = app.add_subcommand("ffa", "formal feature attribution scores");
  common(ffa, true);
  limits(ffa);
  ffa->add_option("--shape", cfg.shape, "HxW: also write a graymap to --output");
  auto* mc = app.add_subcommand("min-cxp", "compute a minimum-size contrastive explanation");
  common(mc, true);
  auto* bench = app.add_subcommand("bench", "time linear, dicho and swift on one problem");
  common(bench, false);
  algos(bench);
  bench->add_option("--delay-ms", cfg.delay_ms, "artificial oracle latency")->check(CLI::NonNegativeNumber);
  bench->add_option("--synthetic", cfg.synthetic, "use a synthetic linear problem with this many features");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Runner run(cfg, out, err);
    if (*cxp)
      return run.cxp();
    if (*axp)
      return run.axp();
    if (*en)
      return run.enumerate();
    if (*ffa)
      return run.ffa();
    if (*mc)
      return run.min_cxp();
    if (*bench) {
      if (cfg.synthetic == 0 && (cfg.model_path.empty() || cfg.instance_path.empty()))
        throw UsageError("bench needs --model and --instance, or --synthetic N");
      return run.bench();
    }
  } catch (const std::exception& e) {
    err << "dxp: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dxp::cli
