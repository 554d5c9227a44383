#pragma once

// Reference backend for the external-oracle protocol: answers checks with an
// in-process oracle. Each check runs on its own thread so that a cancel
// message can interrupt it.

#include <atomic>
#include <chrono>
#include <iostream>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "dxp/model_io.hpp"
#include "dxp/oracles/exhaustive.hpp"
#include "dxp/oracles/latency.hpp"
#include "dxp/oracles/linear.hpp"
#include "dxp/protocol.hpp"

namespace dxp {

struct BackendOptions {
  enum class Engine { Exhaustive, Auto };
  Engine engine = Engine::Exhaustive;
  std::chrono::milliseconds delay{0};  // artificial latency before each answer
};

class Backend {
public:
  Backend(ModelFile model, std::ostream& out, BackendOptions opts)
      : model_(std::move(model)), out_(out), opts_(opts) {}

  ~Backend() { jobs_.clear(); }

  // Processes messages until quit or end of input.
  void serve(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty())
        continue;
      reap();
      nlohmann::json msg;
      try {
        msg = protocol::parse_message(line);
      } catch (const ParseError& e) {
        std::cerr << "dxp-backend: " << e.what() << '\n';
        continue;
      }
      const auto cmd = msg["cmd"].get<std::string>();
      if (cmd == "hello") {
        send(protocol::hello_reply(model_.space.size(), num_classes(*model_.model)));
      } else if (cmd == "check") {
        start_check(msg);
      } else if (cmd == "cancel") {
        try {
          const auto id = protocol::message_id(msg);
          std::lock_guard lock(jobs_mu_);
          if (auto it = by_id_.find(id); it != by_id_.end())
            it->second->thread.request_stop();
        } catch (const ParseError& e) {
          std::cerr << "dxp-backend: " << e.what() << '\n';
        }
      } else if (cmd == "quit") {
        break;
      }
      // other commands are ignored
    }
    std::lock_guard lock(jobs_mu_);
    for (auto& job : jobs_)
      job.thread.request_stop();
  }

private:
  struct Job {
    std::uint64_t id = 0;
    std::atomic<bool> done{false};
    std::jthread thread;
  };

  void send(const std::string& line) {
    std::lock_guard lock(out_mu_);
    out_ << line << '\n';
    out_.flush();
  }

  void start_check(const nlohmann::json& msg) {
    protocol::CheckRequest req;
    try {
      req = protocol::parse_check(msg);
    } catch (const ParseError& e) {
      if (msg.contains("id") && msg["id"].is_number_unsigned())
        send(protocol::error_reply(msg["id"].get<std::uint64_t>(), e.what()));
      else
        std::cerr << "dxp-backend: " << e.what() << '\n';
      return;
    }
    std::lock_guard lock(jobs_mu_);
    auto& job = jobs_.emplace_back();
    job.id = req.id;
    by_id_[req.id] = &job;
    job.thread = std::jthread([this, req = std::move(req), &job](std::stop_token st) {
      run_check(req, st);
      job.done = true;
    });
  }

  void run_check(const protocol::CheckRequest& req, std::stop_token st) {
    try {
      ExplanationProblem problem(model_.model, model_.space, Instance{req.instance, req.label});
      std::unique_ptr<OracleSession> session;
      if (opts_.engine == BackendOptions::Engine::Auto && std::holds_alternative<LinearModel>(problem.model()))
        session = std::make_unique<LinearOracle>(problem);
      else
        session = std::make_unique<ExhaustiveOracle>(problem);
      if (opts_.delay.count() > 0)
        session = std::make_unique<LatencyOracle>(
            std::move(session), DelayDistribution::fixed(std::chrono::duration_cast<std::chrono::microseconds>(opts_.delay)));
      OracleQuery q{req.epsilon, req.norm, req.fixed, st};
      send(protocol::answer_reply(req.id, session->find_adv_ex(q)));
    } catch (const std::exception& e) {
      send(protocol::error_reply(req.id, e.what()));
    }
  }

  // Joins finished checks.
  void reap() {
    std::lock_guard lock(jobs_mu_);
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      if (it->done) {
        by_id_.erase(it->id);
        it = jobs_.erase(it);
      } else {
        ++it;
      }
    }
  }

  ModelFile model_;
  std::ostream& out_;
  BackendOptions opts_;
  std::mutex out_mu_;
  std::mutex jobs_mu_;
  std::list<Job> jobs_;
  std::map<std::uint64_t, Job*> by_id_;
};

}  // namespace dxp
