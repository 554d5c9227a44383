#pragma once

// Domain types shared by every module: feature spaces, norms, feature sets,
// explanations and the error hierarchy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dxp {

using Point = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (bad arguments, inconsistent shapes, ...).
class UsageError : public Error {
public:
  using Error::Error;
};

// Malformed model/instance file. Message names the offending field.
class ParseError : public Error {
public:
  using Error::Error;
};

class OracleError : public Error {
public:
  enum class Kind { BackendCrash, Protocol, Timeout, Unsupported, Resource };

  OracleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

// ---------------------------------------------------------------------------
// Feature space

struct RealInterval {
  std::optional<double> lower;
  std::optional<double> upper;

  bool contains(double x) const {
    return (!lower || x >= *lower) && (!upper || x <= *upper);
  }
  bool bounded() const { return lower.has_value() || upper.has_value(); }
  bool operator==(const RealInterval&) const = default;
};

struct FiniteSet {
  std::vector<double> values;  // file order is significant

  bool contains(double x) const {
    return std::find(values.begin(), values.end(), x) != values.end();
  }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max() const { return *std::max_element(values.begin(), values.end()); }
  bool operator==(const FiniteSet&) const = default;
};

using Domain = std::variant<RealInterval, FiniteSet>;

inline bool domain_contains(const Domain& d, double x) {
  return std::visit([x](const auto& dom) { return dom.contains(x); }, d);
}

inline bool is_finite_domain(const Domain& d) { return std::holds_alternative<FiniteSet>(d); }

class FeatureSpace {
public:
  FeatureSpace() = default;

  explicit FeatureSpace(std::vector<Domain> domains) : domains_(std::move(domains)) {
    if (domains_.empty())
      throw UsageError("feature space needs at least one feature");
    for (std::size_t i = 0; i < domains_.size(); ++i) {
      if (const auto* fs = std::get_if<FiniteSet>(&domains_[i])) {
        if (fs->values.empty())
          throw UsageError("feature " + std::to_string(i + 1) + ": empty finite domain");
        auto sorted = fs->values;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          throw UsageError("feature " + std::to_string(i + 1) + ": duplicate domain values");
      } else {
        const auto& ri = std::get<RealInterval>(domains_[i]);
        if (ri.lower && ri.upper && *ri.lower > *ri.upper)
          throw UsageError("feature " + std::to_string(i + 1) + ": lower bound exceeds upper bound");
      }
    }
  }

  // Unbounded real line on every feature.
  static FeatureSpace reals(std::size_t m) {
    return FeatureSpace(std::vector<Domain>(m, RealInterval{}));
  }

  // Same finite grid on every feature.
  static FeatureSpace grid(std::size_t m, std::vector<double> values) {
    return FeatureSpace(std::vector<Domain>(m, FiniteSet{std::move(values)}));
  }

  std::size_t size() const noexcept { return domains_.size(); }
  const Domain& domain(std::size_t feature) const { return domains_.at(feature - 1); }
  const std::vector<Domain>& domains() const noexcept { return domains_; }

  bool all_finite() const {
    return std::all_of(domains_.begin(), domains_.end(), is_finite_domain);
  }

  bool contains(const Point& x) const {
    if (x.size() != domains_.size())
      return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!domain_contains(domains_[i], x[i]))
        return false;
    return true;
  }

  bool operator==(const FeatureSpace&) const = default;

private:
  std::vector<Domain> domains_;
};

// ---------------------------------------------------------------------------
// Norms and distance

enum class Norm { L0, L1, L2, LInf };

inline std::string to_string(Norm n) {
  switch (n) {
  case Norm::L0: return "l0";
  case Norm::L1: return "l1";
  case Norm::L2: return "l2";
  case Norm::LInf: return "linf";
  }
  return "?";
}

inline Norm parse_norm(const std::string& s) {
  if (s == "l0") return Norm::L0;
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  if (s == "linf") return Norm::LInf;
  throw UsageError("unknown norm '" + s + "' (expected l0, l1, l2 or linf)");
}

// L0 radii count changed features and must be integral; fractional values
// are rejected rather than floored.
inline void validate_radius(double epsilon, Norm norm) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw UsageError("epsilon must be a finite nonnegative number");
  if (norm == Norm::L0 && std::floor(epsilon) != epsilon)
    throw UsageError("L0 radius must be an integer count of changed features");
}

// Running accumulator for ||x - v||_p. Coordinates may be fed in any order;
// value() is monotone in the number of coordinates added.
class DistanceAccumulator {
public:
  explicit DistanceAccumulator(Norm norm) : norm_(norm) {}

  void add(double delta) {
    const double a = std::fabs(delta);
    switch (norm_) {
    case Norm::L0: acc_ += (a != 0.0) ? 1.0 : 0.0; break;
    case Norm::L1: acc_ += a; break;
    case Norm::L2: acc_ += a * a; break;
    case Norm::LInf: acc_ = std::max(acc_, a); break;
    }
  }

  double value() const { return norm_ == Norm::L2 ? std::sqrt(acc_) : acc_; }

private:
  Norm norm_;
  double acc_ = 0.0;
};

inline double distance(const Point& x, const Point& v, Norm norm) {
  if (x.size() != v.size())
    throw UsageError("distance: points have different lengths");
  DistanceAccumulator acc(norm);
  for (std::size_t i = 0; i < x.size(); ++i)
    acc.add(x[i] - v[i]);
  return acc.value();
}

// ---------------------------------------------------------------------------
// Feature sets (1-based indices, sorted, duplicate-free)

class FeatureSet {
public:
  using value_type = std::size_t;
  using const_iterator = std::vector<std::size_t>::const_iterator;

  FeatureSet() = default;
  FeatureSet(std::initializer_list<std::size_t> init) : members_(init) { normalize(); }
  explicit FeatureSet(std::vector<std::size_t> members) : members_(std::move(members)) { normalize(); }

  // {1..m}
  static FeatureSet all(std::size_t m) {
    std::vector<std::size_t> v(m);
    for (std::size_t i = 0; i < m; ++i)
      v[i] = i + 1;
    return FeatureSet(std::move(v));
  }

  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  const_iterator begin() const noexcept { return members_.begin(); }
  const_iterator end() const noexcept { return members_.end(); }
  const std::vector<std::size_t>& members() const noexcept { return members_; }

  bool contains(std::size_t i) const {
    return std::binary_search(members_.begin(), members_.end(), i);
  }

  bool subset_of(const FeatureSet& other) const {
    return std::includes(other.members_.begin(), other.members_.end(), members_.begin(), members_.end());
  }

  bool intersects(const FeatureSet& other) const {
    auto a = members_.begin();
    auto b = other.members_.begin();
    while (a != members_.end() && b != other.members_.end()) {
      if (*a == *b) return true;
      if (*a < *b) ++a; else ++b;
    }
    return false;
  }

  FeatureSet with(std::size_t i) const {
    FeatureSet r = *this;
    auto it = std::lower_bound(r.members_.begin(), r.members_.end(), i);
    if (it == r.members_.end() || *it != i)
      r.members_.insert(it, i);
    return r;
  }

  FeatureSet without(std::size_t i) const {
    FeatureSet r = *this;
    auto it = std::lower_bound(r.members_.begin(), r.members_.end(), i);
    if (it != r.members_.end() && *it == i)
      r.members_.erase(it);
    return r;
  }

  FeatureSet operator|(const FeatureSet& o) const {
    FeatureSet r;
    std::set_union(begin(), end(), o.begin(), o.end(), std::back_inserter(r.members_));
    return r;
  }

  FeatureSet operator&(const FeatureSet& o) const {
    FeatureSet r;
    std::set_intersection(begin(), end(), o.begin(), o.end(), std::back_inserter(r.members_));
    return r;
  }

  FeatureSet operator-(const FeatureSet& o) const {
    FeatureSet r;
    std::set_difference(begin(), end(), o.begin(), o.end(), std::back_inserter(r.members_));
    return r;
  }

  // {1..m} \ this
  FeatureSet complement(std::size_t m) const { return all(m) - *this; }

  void validate(std::size_t m) const {
    if (!members_.empty() && (members_.front() < 1 || members_.back() > m))
      throw UsageError("feature index out of range 1.." + std::to_string(m));
  }

  bool operator==(const FeatureSet&) const = default;
  auto operator<=>(const FeatureSet&) const = default;

private:
  void normalize() {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  }

  std::vector<std::size_t> members_;
};

inline std::string to_string(const FeatureSet& s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (auto i : s) {
    os << (first ? "" : ",") << i;
    first = false;
  }
  os << '}';
  return os.str();
}

// ---------------------------------------------------------------------------
// Explanations

enum class ExplanationKind { AXp, CXp };

inline std::string to_string(ExplanationKind k) { return k == ExplanationKind::AXp ? "axp" : "cxp"; }

struct CallStats {
  std::size_t oracle_calls = 0;    // queries issued (including cancelled ones)
  std::size_t cancelled_calls = 0; // queries abandoned through cancellation
  std::size_t parallel_rounds = 0; // batches of concurrent probes
  std::chrono::nanoseconds wall_time{0};

  double wall_ms() const { return std::chrono::duration<double, std::milli>(wall_time).count(); }
};

struct Explanation {
  ExplanationKind kind = ExplanationKind::CXp;
  FeatureSet features;
  double epsilon = 0.0;
  Norm norm = Norm::L1;
  CallStats stats;
};

// No adversarial example exists inside the epsilon-ball: there is no
// contrastive explanation and the unique abductive explanation is empty.
struct NoAdvExample {
  double epsilon = 0.0;
  Norm norm = Norm::L1;
  CallStats stats;

  std::string message() const { return "epsilon too small: no d-CXp; d-AXp = {}"; }
};

using CxpResult = std::variant<Explanation, NoAdvExample>;

inline bool has_cxp(const CxpResult& r) { return std::holds_alternative<Explanation>(r); }

inline const Explanation& cxp_of(const CxpResult& r) {
  if (const auto* e = std::get_if<Explanation>(&r))
    return *e;
  throw UsageError("no contrastive explanation: " + std::get<NoAdvExample>(r).message());
}

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::chrono::nanoseconds elapsed() const { return std::chrono::steady_clock::now() - start_; }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dxp
