#pragma once

// Client side of the runner line protocol. The runner is a child process:
// it first prints a handshake line announcing its capabilities, then answers
// each request line {task, files} with one TaskOutcome line.

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <istream>
#include <ostream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "spark/evaluator.hpp"

extern char** environ;

namespace spark {

inline nlohmann::json runner_request(const Task& task, const DocumentSnapshot& snapshot) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [path, text] : snapshot.files) files[path] = text;
  return {{"task", to_json(task)}, {"files", files}};
}

/// Capability named by a handshake line: {"capabilities": "interactive"} or
/// {"capabilities": ["interactive", ...]}.
inline RunnerCapability parse_handshake(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error("runner handshake is not JSON: " + line);
  }
  if (!j.is_object() || !j.contains("capabilities")) throw Error("runner handshake lacks 'capabilities'");
  const auto& caps = j["capabilities"];
  auto has = [&](const nlohmann::json& v) { return v.is_string() && v.get<std::string>() == "interactive"; };
  if (has(caps)) return RunnerCapability::Interactive;
  if (caps.is_array() && std::any_of(caps.begin(), caps.end(), has)) return RunnerCapability::Interactive;
  return RunnerCapability::StaticOnly;
}

class ExternalRunner : public Runner {
 public:
  explicit ExternalRunner(std::vector<std::string> argv,
                          std::chrono::milliseconds task_timeout = std::chrono::milliseconds(10'000))
      : argv_(std::move(argv)), timeout_(task_timeout) {
    if (argv_.empty()) throw Error("runner command is empty");
    start();
  }
  ExternalRunner(const ExternalRunner&) = delete;
  ExternalRunner& operator=(const ExternalRunner&) = delete;
  ~ExternalRunner() override { stop(); }

  RunnerCapability capability() const override { return capability_; }

  TaskOutcome evaluate(const Task& task, const DocumentSnapshot& snapshot) override {
    std::lock_guard lock(mu_);
    auto fail = [&](std::string why) {
      return TaskOutcome{task.id, TaskStatus::Error, std::move(why), snapshot.timestamp_ms, snapshot.content_hash};
    };
    if (pid_ <= 0) {
      try {
        start();
      } catch (const std::exception& e) {
        return fail(std::string("runner unavailable: ") + e.what());
      }
    }
    const std::string line = runner_request(task, snapshot).dump() + "\n";
    if (!write_all(line)) {
      stop();
      return fail("runner closed its input");
    }
    std::string reply;
    const auto status = read_line(reply, timeout_);
    if (status == ReadStatus::Timeout) {
      stop();
      return fail("timeout");
    }
    if (status == ReadStatus::Closed) {
      stop();
      return fail("runner exited before answering");
    }
    try {
      auto out = outcome_from_json(nlohmann::json::parse(reply));
      out.task_id = task.id;
      out.evaluated_at = snapshot.timestamp_ms;
      out.snapshot_hash = snapshot.content_hash;
      return out;
    } catch (const std::exception& e) {
      return fail(std::string("malformed runner response: ") + e.what());
    }
  }

 private:
  enum class ReadStatus { Line, Timeout, Closed };

  void start() {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) throw Error("pipe failed");
    if (pipe(out_pipe) != 0) {
      close(in_pipe[0]);
      close(in_pipe[1]);
      throw Error("pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
      close(in_pipe[1]);
      close(out_pipe[0]);
      throw Error("cannot start runner '" + argv_[0] + "'");
    }
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
    std::string hello;
    if (read_line(hello, timeout_) != ReadStatus::Line) {
      stop();
      throw Error("runner sent no handshake");
    }
    capability_ = parse_handshake(hello);
  }

  void stop() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      kill(pid_, SIGTERM);
      waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
  }

  bool write_all(const std::string& s) {
    // A dead child must surface as a failed write, not SIGPIPE.
    struct sigaction ignore {}, old {};
    ignore.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &ignore, &old);
    std::size_t done = 0;
    while (done < s.size()) {
      const auto n = write(to_child_, s.data() + done, s.size() - done);
      if (n <= 0) break;
      done += static_cast<std::size_t>(n);
    }
    sigaction(SIGPIPE, &old, nullptr);
    return done == s.size();
  }

  ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return ReadStatus::Line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return ReadStatus::Timeout;
      pollfd p{from_child_, POLLIN, 0};
      const int r = poll(&p, 1, static_cast<int>(left.count()));
      if (r == 0) return ReadStatus::Timeout;
      if (r < 0) return ReadStatus::Closed;
      char chunk[65536];
      const auto n = read(from_child_, chunk, sizeof chunk);
      if (n <= 0) return ReadStatus::Closed;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  RunnerCapability capability_ = RunnerCapability::StaticOnly;
  std::mutex mu_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Runner side of the protocol: handshake, then one outcome line per request
/// line until EOF. A request that cannot be decoded gets an error outcome.
inline void serve_runner(std::istream& in, std::ostream& out, Runner& runner) {
  const bool interactive = runner.capability() == RunnerCapability::Interactive;
  out << nlohmann::json{{"capabilities", interactive ? "interactive" : "static"}}.dump() << '\n' << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TaskOutcome o{"", TaskStatus::Error, "", 0, ""};
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("task") || !j.contains("files") || !j["files"].is_object()) {
        throw std::invalid_argument("request needs 'task' and 'files'");
      }
      if (j["task"].is_object() && j["task"].contains("id") && j["task"]["id"].is_string()) {
        o.task_id = j["task"]["id"].get<std::string>();
      }
      const Task task = parse_task_json(j["task"]);
      FileMap files;
      for (const auto& [path, text] : j["files"].items()) files[path] = text.get<std::string>();
      o = runner.evaluate(task, make_snapshot("runner", std::move(files), 0));
    } catch (const std::exception& e) {
      o.detail = std::string("bad request: ") + e.what();
    }
    out << to_json(o).dump() << '\n' << std::flush;
  }
}

}  // namespace spark
