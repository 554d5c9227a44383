#pragma once

// Bounded pool of probe executors. Each worker owns one oracle session from
// the factory; results are merged by probe index, never by arrival time.

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <thread>
#include <vector>

#include "dxp/oracle.hpp"
#include "dxp/predicates.hpp"

namespace dxp {

struct BatchOutcome {
  std::vector<OracleAnswer> answers;  // by probe index
  std::size_t issued = 0;             // probes that reached an oracle
  std::size_t cancelled = 0;          // probes answered as cancelled
};

class ProbePool {
public:
  ProbePool(const ExplanationProblem& problem, const SessionFactory& factory, std::size_t workers, double epsilon,
            Norm norm)
      : problem_(problem), epsilon_(epsilon), norm_(norm) {
    if (workers == 0)
      throw UsageError("probe pool needs at least one worker");
    validate_radius(epsilon, norm);
    sessions_.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      sessions_.push_back(factory());
    for (std::size_t w = 0; w < workers; ++w)
      threads_.emplace_back([this, w](std::stop_token st) { work(w, st); });
  }

  ~ProbePool() {
    {
      std::lock_guard lock(mu_);
      shutdown_ = true;
    }
    work_cv_.notify_all();
    threads_.clear();
  }

  ProbePool(const ProbePool&) = delete;
  ProbePool& operator=(const ProbePool&) = delete;

  std::size_t size() const { return sessions_.size(); }

  // Probes check_wcxp(frees[k]) for every k concurrently. The sets must form
  // an increasing chain, so a found answer at k settles every probe after k:
  // those are cancelled as soon as it arrives. Probes before the first found
  // answer always run to completion.
  BatchOutcome run_chain(const std::vector<FeatureSet>& frees) { return run(frees, true); }

  // Probes every set to completion.
  BatchOutcome run_all(const std::vector<FeatureSet>& frees) { return run(frees, false); }

  OracleAnswer run_one(const FeatureSet& free) {
    auto out = run({free}, false);
    return std::move(out.answers[0]);
  }

private:
  BatchOutcome run(const std::vector<FeatureSet>& frees, bool chain) {
    const std::size_t n = frees.size();
    BatchOutcome out;
    out.answers.resize(n);
    if (n == 0)
      return out;

    std::vector<std::stop_source> stops(n);
    {
      std::lock_guard lock(mu_);
      ++batch_;
      results_.clear();
      for (std::size_t k = 0; k < n; ++k)
        queue_.push_back(Job{batch_, k, frees[k], stops[k]});
    }
    work_cv_.notify_all();

    std::vector<bool> settled(n, false);
    std::size_t remaining = n;
    std::exception_ptr first_error;
    std::unique_lock lock(mu_);
    while (remaining > 0) {
      result_cv_.wait(lock, [&] { return !results_.empty(); });
      auto r = std::move(results_.front());
      results_.pop_front();
      --remaining;
      settled[r.slot] = true;
      if (r.issued)
        ++out.issued;
      if (r.error) {
        if (!first_error)
          first_error = r.error;
        for (std::size_t k = 0; k < n; ++k)
          if (!settled[k])
            stops[k].request_stop();
        continue;
      }
      if (r.answer.cancelled())
        ++out.cancelled;
      if (chain && r.answer.found())
        for (std::size_t k = r.slot + 1; k < n; ++k)
          if (!settled[k])
            stops[k].request_stop();
      out.answers[r.slot] = std::move(r.answer);
    }
    lock.unlock();
    if (first_error)
      std::rethrow_exception(first_error);
    return out;
  }

  struct Job {
    std::size_t batch;
    std::size_t slot;
    FeatureSet free;
    std::stop_source stop;
  };

  struct Result {
    std::size_t slot;
    OracleAnswer answer;
    bool issued = false;
    std::exception_ptr error;
  };

  void work(std::size_t w, std::stop_token st) {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(mu_);
        work_cv_.wait(lock, [&] { return shutdown_ || st.stop_requested() || !queue_.empty(); });
        if (queue_.empty())
          return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      Result r{job.slot, OracleAnswer::cancelled_answer(), false, nullptr};
      if (!job.stop.stop_requested()) {
        r.issued = true;
        try {
          r.answer = query_free(problem_, *sessions_[w], job.free, epsilon_, norm_, job.stop.get_token());
        } catch (...) {
          r.error = std::current_exception();
        }
      }
      {
        std::lock_guard lock(mu_);
        results_.push_back(std::move(r));
      }
      result_cv_.notify_one();
    }
  }

  const ExplanationProblem& problem_;
  double epsilon_;
  Norm norm_;
  std::vector<std::unique_ptr<OracleSession>> sessions_;

  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable result_cv_;
  std::deque<Job> queue_;
  std::deque<Result> results_;
  std::size_t batch_ = 0;
  bool shutdown_ = false;
  std::vector<std::jthread> threads_;  // last: joined before the rest is torn down
};

}  // namespace dxp
