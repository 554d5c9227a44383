#pragma once

// Wrapper adding a per-call delay in front of another oracle, to model
// expensive verifier calls in benchmarks. Cancellation cuts the delay short.

#include <chrono>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <random>

#include "dxp/oracle.hpp"

namespace dxp {

struct DelayDistribution {
  std::chrono::microseconds min{0};
  std::chrono::microseconds max{0};  // uniform in [min, max]; fixed when equal

  static DelayDistribution fixed(std::chrono::microseconds d) { return {d, d}; }
  static DelayDistribution uniform(std::chrono::microseconds lo, std::chrono::microseconds hi) { return {lo, hi}; }
};

class LatencyOracle : public OracleSession {
public:
  LatencyOracle(std::unique_ptr<OracleSession> inner, DelayDistribution delay, std::uint64_t seed = 0)
      : inner_(std::move(inner)), delay_(delay), rng_(seed) {}

  OracleAnswer find_adv_ex(const OracleQuery& query) override {
    const auto d = draw();
    if (d.count() > 0) {
      std::mutex mu;
      std::condition_variable_any cv;
      std::unique_lock lock(mu);
      cv.wait_for(lock, query.cancel, d, [] { return false; });
    }
    if (query.cancel.stop_requested())
      return OracleAnswer::cancelled_answer();
    return inner_->find_adv_ex(query);
  }

private:
  std::chrono::microseconds draw() {
    if (delay_.max <= delay_.min)
      return delay_.min;
    std::uniform_int_distribution<long long> dist(delay_.min.count(), delay_.max.count());
    return std::chrono::microseconds(dist(rng_));
  }

  std::unique_ptr<OracleSession> inner_;
  DelayDistribution delay_;
  std::mt19937_64 rng_;
};

// Each produced session gets its own generator, seeded by creation order.
inline SessionFactory latency_factory(SessionFactory inner, DelayDistribution delay, std::uint64_t seed = 0) {
  auto counter = std::make_shared<std::atomic<std::uint64_t>>(seed);
  return [inner = std::move(inner), delay, counter] {
    return std::make_unique<LatencyOracle>(inner(), delay, counter->fetch_add(1));
  };
}

}  // namespace dxp
