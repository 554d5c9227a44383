#pragma once

// Oracle backed by an external process speaking the line protocol in
// dxp/protocol.hpp over its standard streams. One process per session;
// concurrent queries on a session are multiplexed by id.

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <map>
#include <mutex>
#include <set>
#include <optional>
#include <string>
#include <thread>

#include "dxp/oracle.hpp"
#include "dxp/protocol.hpp"

namespace dxp {

struct ExternalConfig {
  std::string command;  // run through /bin/sh -c
  // Per-query limit; zero disables it.
  std::chrono::milliseconds timeout{0};
  std::chrono::milliseconds handshake_timeout{10'000};
};

namespace detail {

// Child process whose stdin/stdout are one end of a socket pair.
class Subprocess {
public:
  explicit Subprocess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw OracleError(OracleError::Kind::BackendCrash, std::string("socketpair: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw OracleError(OracleError::Kind::BackendCrash, std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::setpgid(0, 0);  // own group, so reap() also takes down grandchildren
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ~Subprocess() {
    shutdown_write();
    if (fd_ >= 0)
      ::close(fd_);
    reap();
  }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  // false once the peer is gone.
  bool write_line(const std::string& line) {
    std::lock_guard lock(write_mu_);
    std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      const auto n = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR)
          continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  // Blocks until a full line arrives; nullopt on EOF or error.
  std::optional<std::string> read_line() {
    for (;;) {
      auto nl = rbuf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = rbuf_.substr(0, nl);
        rbuf_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR)
        continue;
      if (n <= 0)
        return std::nullopt;
      rbuf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown_write() {
    if (fd_ >= 0)
      ::shutdown(fd_, SHUT_WR);
  }

  // Unblocks a pending read_line().
  void shutdown_read() {
    if (fd_ >= 0)
      ::shutdown(fd_, SHUT_RD);
  }

private:
  void reap() {
    if (pid_ <= 0)
      return;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        ::kill(-pid_, SIGKILL);  // stragglers left in the group
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

  pid_t pid_ = -1;
  int fd_ = -1;
  std::mutex write_mu_;
  std::string rbuf_;  // reader thread only
};

}  // namespace detail

class ExternalOracle : public OracleSession {
public:
  ExternalOracle(const ExplanationProblem& problem, ExternalConfig config)
      : problem_(problem), config_(std::move(config)), proc_(config_.command) {
    reader_ = std::thread([this] { read_loop(); });
    try {
      handshake();
    } catch (...) {
      stop();
      throw;
    }
  }

  ~ExternalOracle() override { stop(); }

  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  // Safe to call from several threads at once.
  OracleAnswer find_adv_ex(const OracleQuery& query) override {
    if (query.cancel.stop_requested())
      return OracleAnswer::cancelled_answer();

    std::unique_lock lock(mu_);
    fail_if_dead();
    const std::uint64_t id = next_id_++;
    pending_.emplace(id, Slot{});
    lock.unlock();

    protocol::CheckRequest req{id, query.epsilon, query.norm, query.fixed, problem_.point(), problem_.label()};
    if (!proc_.write_line(protocol::check_request(req))) {
      lock.lock();
      pending_.erase(id);
      throw OracleError(OracleError::Kind::BackendCrash, "external oracle: backend closed its input");
    }

    lock.lock();
    auto ready = [&] { return pending_.at(id).answer.has_value() || dead_; };
    bool done;
    if (config_.timeout.count() > 0)
      done = cv_.wait_until(lock, query.cancel, std::chrono::steady_clock::now() + config_.timeout, ready);
    else
      done = cv_.wait(lock, query.cancel, ready);

    if (!done) {
      const bool timed_out = !query.cancel.stop_requested();
      lock.unlock();
      proc_.write_line(protocol::cancel_request(id));
      lock.lock();
      if (timed_out) {
        // The late answer, if any, is dropped by the reader.
        pending_.erase(id);
        abandoned_.insert(id);
        throw OracleError(OracleError::Kind::Timeout, "external oracle: query " + std::to_string(id) + " timed out");
      }
      cv_.wait(lock, ready);
    }

    auto slot = std::move(pending_.at(id));
    pending_.erase(id);
    if (!slot.answer) {
      fail_if_dead();
      throw OracleError(OracleError::Kind::BackendCrash, "external oracle: no answer");
    }
    if (slot.error)
      throw OracleError(OracleError::Kind::Protocol, "external oracle: backend error: " + *slot.error);
    return std::move(*slot.answer);
  }

  std::size_t features() const { return features_; }
  std::size_t classes() const { return classes_; }

private:
  struct Slot {
    std::optional<OracleAnswer> answer;
    std::optional<std::string> error;
  };

  void handshake() {
    if (!proc_.write_line(protocol::hello_request()))
      throw OracleError(OracleError::Kind::BackendCrash, "external oracle: cannot reach backend");
    std::unique_lock lock(mu_);
    const bool ok = cv_.wait_for(lock, config_.handshake_timeout, [&] { return hello_.has_value() || dead_; });
    if (!ok)
      throw OracleError(OracleError::Kind::Timeout, "external oracle: no hello from backend");
    fail_if_dead();
    const auto& h = *hello_;
    try {
      features_ = h.at("features").get<std::size_t>();
      classes_ = h.at("classes").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
      throw OracleError(OracleError::Kind::Protocol, "external oracle: malformed hello");
    }
    if (features_ != problem_.num_features() || classes_ != problem_.num_classes())
      throw OracleError(OracleError::Kind::Protocol,
                        "external oracle: handshake mismatch (backend reports " + std::to_string(features_) +
                            " features / " + std::to_string(classes_) + " classes, problem has " +
                            std::to_string(problem_.num_features()) + " / " + std::to_string(problem_.num_classes()) +
                            ")");
  }

  void read_loop() {
    for (;;) {
      auto line = proc_.read_line();
      if (!line) {
        mark_dead(OracleError::Kind::BackendCrash, "external oracle: backend exited");
        return;
      }
      if (line->empty())
        continue;
      try {
        auto msg = protocol::parse_message(*line);
        const auto cmd = msg["cmd"].get<std::string>();
        std::lock_guard lock(mu_);
        if (cmd == "hello") {
          hello_ = std::move(msg);
        } else if (cmd == "answer" || cmd == "error") {
          const auto id = protocol::message_id(msg);
          if (abandoned_.erase(id))
            continue;
          auto it = pending_.find(id);
          if (it == pending_.end())
            throw ParseError("protocol: answer for unknown id " + std::to_string(id));
          if (cmd == "answer") {
            it->second.answer = protocol::parse_answer(msg);
          } else {
            it->second.answer = OracleAnswer::not_found();
            it->second.error = msg.value("message", std::string("unspecified"));
          }
        } else {
          throw ParseError("protocol: unexpected message '" + cmd + "'");
        }
        cv_.notify_all();
      } catch (const ParseError& e) {
        mark_dead(OracleError::Kind::Protocol, e.what());
        return;
      }
    }
  }

  void mark_dead(OracleError::Kind kind, const std::string& why) {
    std::lock_guard lock(mu_);
    if (!dead_) {
      dead_ = true;
      death_kind_ = kind;
      death_reason_ = why;
    }
    cv_.notify_all();
  }

  void fail_if_dead() const {
    if (dead_ && !stopping_)
      throw OracleError(death_kind_, death_reason_);
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (stopping_)
        return;
      stopping_ = true;
    }
    proc_.write_line(protocol::quit_request());
    proc_.shutdown_write();
    proc_.shutdown_read();
    if (reader_.joinable())
      reader_.join();
  }

  const ExplanationProblem& problem_;
  ExternalConfig config_;
  detail::Subprocess proc_;
  std::thread reader_;

  std::mutex mu_;
  std::condition_variable_any cv_;
  std::map<std::uint64_t, Slot> pending_;
  std::set<std::uint64_t> abandoned_;
  std::optional<nlohmann::json> hello_;
  std::uint64_t next_id_ = 1;
  bool dead_ = false;
  bool stopping_ = false;
  OracleError::Kind death_kind_ = OracleError::Kind::BackendCrash;
  std::string death_reason_;
  std::size_t features_ = 0;
  std::size_t classes_ = 0;
};

inline SessionFactory external_factory(const ExplanationProblem& problem, ExternalConfig config) {
  return [&problem, config] { return std::make_unique<ExternalOracle>(problem, config); };
}

}  // namespace dxp
