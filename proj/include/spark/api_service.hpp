#pragma once

// HTTP surface over a Session. Every handler is a thin mapping onto an
// in-process call; payloads are the to_json forms of the engine types.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "spark/inspector.hpp"
#include "spark/session.hpp"
#include "spark/suggest.hpp"
#include "spark/suggest_remote.hpp"

namespace spark {

/// Token bucket per key.
class RateLimiter {
 public:
  RateLimiter(double per_second, double burst) : rate_(per_second), burst_(burst) {}

  bool allow(const std::string& key) {
    const auto now = std::chrono::steady_clock::now();
    std::lock_guard lock(mu_);
    auto [it, fresh] = buckets_.try_emplace(key, Bucket{burst_, now});
    auto& b = it->second;
    if (!fresh) {
      const double dt = std::chrono::duration<double>(now - b.at).count();
      b.tokens = std::min(burst_, b.tokens + dt * rate_);
      b.at = now;
    }
    if (b.tokens < 1.0) return false;
    b.tokens -= 1.0;
    return true;
  }

 private:
  struct Bucket {
    double tokens;
    std::chrono::steady_clock::time_point at;
  };
  double rate_;
  double burst_;
  std::mutex mu_;
  std::map<std::string, Bucket> buckets_;
};

struct ApiOptions {
  /// Instructor token; defaults to SPARK_TOKEN. Unset leaves dashboard endpoints open.
  std::optional<std::string> token = [] {
    const char* t = std::getenv("SPARK_TOKEN");
    return t && *t ? std::optional<std::string>(t) : std::nullopt;
  }();
  double ingest_rate_per_student = 200.0;  // events per second
  double ingest_burst_per_student = 2000.0;
  std::chrono::milliseconds heartbeat{15'000};
  int worker_threads = 32;
  /// Overrides the provider chosen from SPARK_SUGGEST_URL.
  std::shared_ptr<SuggestionProvider> provider;
};

class ApiServer {
 public:
  ApiServer(std::shared_ptr<Session> session, ApiOptions options = {})
      : options_(std::move(options)),
        limiter_(options_.ingest_rate_per_student, options_.ingest_burst_per_student),
        session_(std::move(session)) {
    if (!session_) throw Error("server needs a session");
    // Replay sessions publish into the same bus, so /updates outlives a session swap.
    bus_ = session_->bus();
    routes();
  }
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;
  ~ApiServer() { stop(); }

  /// Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    stopping_ = false;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port) {
    stopping_ = false;
    if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    stopping_ = true;
    bus_->close_all();
    server_.stop();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(mu_);
    replay_.reset();
  }

  std::shared_ptr<Session> session() const {
    std::lock_guard lock(mu_);
    return session_;
  }

  /// Blocks until a running replay finishes.
  void wait_for_replay() {
    std::shared_ptr<ReplayJob> job;
    {
      std::lock_guard lock(mu_);
      job = replay_;
    }
    if (job) job->wait();
  }

  httplib::Server& raw() { return server_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void send_error(Res& res, int status, const std::string& message) { send_json(res, {{"error", message}}, status); }

  bool authorized(const Req& req, Res& res) const {
    if (!options_.token) return true;
    if (req.get_header_value("X-Spark-Token") == *options_.token) return true;
    send_error(res, 401, "missing or wrong X-Spark-Token");
    return false;
  }

  static std::optional<TimestampMs> query_ms(const Req& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const auto v = req.get_param_value(name);
    std::size_t used = 0;
    TimestampMs t = 0;
    try {
      t = std::stoll(v, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("query parameter '") + name + "' must be an integer");
    }
    if (used != v.size()) throw std::invalid_argument(std::string("query parameter '") + name + "' must be an integer");
    return t;
  }

  static nlohmann::json parse_body(const Req& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(std::string("body is not valid JSON: ") + e.what());
    }
  }

  /// Slice for /progress and /stats: latest published tick <= t, or the live
  /// "now" when t is omitted.
  std::optional<TickSlice> resolve_slice(Session& s, std::optional<TimestampMs> t) {
    if (t) {
      auto p = s.slice_at(*t);
      if (!p) return std::nullopt;
      return *p;
    }
    if (s.config().mode == SessionMode::Live && !replay_running()) {
      auto last = s.last_event_ms();
      if (!last) return std::nullopt;
      return s.evaluate_at(*last);
    }
    auto p = s.latest_slice();
    if (!p) return std::nullopt;
    return *p;
  }

  bool replay_running() const {
    std::lock_guard lock(mu_);
    return replay_ && replay_->status().running;
  }

  std::shared_ptr<SuggestionProvider> provider() {
    if (options_.provider) return options_.provider;
    if (auto remote = RemoteProvider::from_env()) return std::make_shared<RemoteProvider>(std::move(*remote));
    return std::make_shared<HeuristicProvider>();
  }

  template <typename F>
  auto guarded(F f) {
    return [this, f](const Req& req, Res& res) {
      try {
        f(req, res);
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, e.what());
      } catch (const SelectorError& e) {
        send_error(res, 400, e.what());
      } catch (const KeyNotFound& e) {
        send_error(res, 404, e.what());
      } catch (const ProviderError& e) {
        send_error(res, 502, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server_.new_task_queue = [n = options_.worker_threads] { return new httplib::ThreadPool(static_cast<size_t>(n)); };

    server_.Post("/events", guarded([this](const Req& req, Res& res) {
      const auto body = parse_body(req);
      if (!body.is_array()) throw std::invalid_argument("body must be an array of events");
      std::vector<EditEvent> events;
      for (std::size_t i = 0; i < body.size(); ++i) {
        try {
          events.push_back(event_from_json(body[i]));
        } catch (const std::invalid_argument& e) {
          throw std::invalid_argument("event " + std::to_string(i) + ": " + e.what());
        }
      }
      auto s = session();
      if (replay_running() || s->config().mode == SessionMode::Replay) {
        send_error(res, 409, "session is in replay mode");
        return;
      }
      std::vector<std::optional<Verdict>> verdicts(events.size());
      std::vector<EditEvent> admitted;
      std::vector<std::size_t> where;
      for (std::size_t i = 0; i < events.size(); ++i) {
        if (limiter_.allow(events[i].student_id)) {
          admitted.push_back(events[i]);
          where.push_back(i);
        } else {
          verdicts[i] = Verdict{false, "RejectRate", "student_id", "ingestion rate limit exceeded"};
        }
      }
      const auto done = s->ingest(admitted);
      for (std::size_t k = 0; k < done.size(); ++k) verdicts[where[k]] = done[k];
      nlohmann::json out = nlohmann::json::array();
      for (const auto& v : verdicts) out.push_back(to_json(*v));
      send_json(res, {{"verdicts", out}});
    }));

    server_.Get("/progress", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      auto s = session();
      auto slice = resolve_slice(*s, query_ms(req, "t"));
      if (!slice) return send_error(res, 404, "no tick at or before the requested time");
      send_json(res, to_json(*slice));
    }));

    server_.Get("/stats", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      auto s = session();
      auto slice = resolve_slice(*s, query_ms(req, "t"));
      if (!slice) return send_error(res, 404, "no tick at or before the requested time");
      send_json(res, to_json(classroom_stats(*slice, s->assets().checkpoints)));
    }));

    server_.Get(R"(/students/([^/]+)/snapshot)", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      auto s = session();
      const std::string id = req.matches[1];
      const auto view = s->view();
      const auto t = query_ms(req, "t").value_or(s->last_event_ms().value_or(0));
      const auto all = index_by_student(view);
      auto it = all.find(id);
      if (it == all.end()) return send_error(res, 404, "unknown student '" + id + "'");
      send_json(res, snapshot_payload(id, it->second, t, s->assets().starter));
    }));

    server_.Post("/inspect", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      const auto body = parse_body(req);
      if (!body.is_object()) throw std::invalid_argument("body must be an object");
      if (!body.contains("selector") || !body["selector"].is_string()) {
        throw std::invalid_argument("'selector' must be a string");
      }
      if (!body.contains("task_id") || !body["task_id"].is_string()) {
        throw std::invalid_argument("'task_id' must be a string");
      }
      auto s = session();
      send_json(res, inspect(*s, body));
    }));

    server_.Post("/checkpoints/verify", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      std::optional<std::string> id;
      if (!req.body.empty()) {
        const auto body = parse_body(req);
        if (!body.is_object()) throw std::invalid_argument("body must be an object");
        if (body.contains("checkpoint_id")) {
          if (!body["checkpoint_id"].is_string()) throw std::invalid_argument("'checkpoint_id' must be a string");
          id = body["checkpoint_id"].get<std::string>();
        }
      }
      send_json(res, to_json(session()->verify(id)));
    }));

    server_.Post("/checkpoints/suggest", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      const auto body = parse_body(req);
      if (!body.is_object() || !body.contains("description") || !body["description"].is_string()) {
        throw std::invalid_argument("'description' must be a string");
      }
      SuggestionRequest request{body["description"].get<std::string>(), session()->assets().reference, std::nullopt};
      if (body.contains("target_selector")) {
        if (!body["target_selector"].is_string()) throw std::invalid_argument("'target_selector' must be a string");
        request.target_selector = body["target_selector"].get<std::string>();
      }
      auto p = provider();
      send_json(res, to_json(suggest_assertions(request, *p)));
    }));

    server_.Post("/replay", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      const auto body = parse_body(req);
      if (!body.is_object() || !body.contains("log_path") || !body["log_path"].is_string()) {
        throw std::invalid_argument("'log_path' must be a string");
      }
      const double speed = parse_speed(body.contains("speed") ? body["speed"] : nlohmann::json("max"));
      EventLog log;
      try {
        log = load_log_file(body["log_path"].get<std::string>());
      } catch (const Error& e) {
        throw std::invalid_argument(e.what());
      }
      std::lock_guard lock(mu_);
      if (replay_ && replay_->status().running) {
        send_error(res, 409, "a replay is already running");
        return;
      }
      auto config = session_->config();
      config.mode = SessionMode::Replay;
      config.log.reset();
      auto fresh = std::make_shared<Session>(config, session_->assets(), nullptr, nullptr, bus_);
      fresh->threads = session_->threads;
      session_ = fresh;
      const auto view = log.view();
      replay_ = std::make_shared<ReplayJob>(fresh, view, speed);
      send_json(res, {{"started", true}, {"total", view.size()}}, 202);
    }));

    server_.Get("/replay/status", guarded([this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      std::lock_guard lock(mu_);
      if (!replay_) return send_json(res, to_json(ReplayStatus{}));
      send_json(res, to_json(replay_->status()));
    }));

    server_.Get("/updates", [this](const Req& req, Res& res) {
      if (!authorized(req, res)) return;
      auto sub = bus_->subscribe();
      res.set_chunked_content_provider("application/x-ndjson", [this, sub](size_t, httplib::DataSink& sink) {
        if (stopping_) return false;
        auto line = sub->pop(options_.heartbeat);
        if (stopping_ || sub->closed()) return false;
        if (!line) {
          auto s = session();
          auto last = s ? s->latest_slice() : nullptr;
          nlohmann::json hb{{"type", "TickReady"}, {"heartbeat", true}};
          hb["t_ms"] = last ? nlohmann::json(last->t_ms) : nlohmann::json(nullptr);
          line = hb.dump();
        }
        *line += '\n';
        return sink.write(line->data(), line->size());
      }, [sub](bool) { sub->close(); });
    });
  }

  static double parse_speed(const nlohmann::json& v) {
    if (v.is_string() && v.get<std::string>() == "max") return std::numeric_limits<double>::infinity();
    if (v.is_number() && v.get<double>() > 0) return v.get<double>();
    throw std::invalid_argument("'speed' must be a positive number or \"max\"");
  }

  nlohmann::json inspect(Session& s, const nlohmann::json& body) {
    const auto task_key = body["task_id"].get<std::string>();
    const auto selector = body["selector"].get<std::string>();
    parse_selector(selector);
    auto ref = find_task(s.assets().checkpoints, task_key);
    if (!ref) throw KeyNotFound("unknown task '" + task_key + "'");
    TimestampMs t = 0;
    if (body.contains("t_ms")) {
      if (!body["t_ms"].is_number_integer()) throw std::invalid_argument("'t_ms' must be an integer");
      t = body["t_ms"].get<TimestampMs>();
    } else {
      t = s.last_event_ms().value_or(0);
    }
    const auto snaps = s.class_snapshots(t);
    if (body.contains("property") && !body["property"].is_null()) {
      if (!body["property"].is_string()) throw std::invalid_argument("'property' must be a string");
      return to_json(inspect_property(snaps, selector, body["property"].get<std::string>(), t));
    }
    return to_json(preview_clusters(snaps, *ref->checkpoint, *ref->task, selector, t, &s.runner()));
  }

 public:
  /// Payload of GET /students/{id}/snapshot.
  static nlohmann::json snapshot_payload(const std::string& id, StudentEvents events, TimestampMs t,
                                         const FileMap& starter) {
    nlohmann::json out;
    DocumentSnapshot snap;
    try {
      snap = reconstruct_at(id, events, t, starter);
    } catch (const StreamCorrupt& e) {
      snap = e.partial();
      out["stream_error"] = e.what();
    }
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [p, text] : snap.files) files[p] = text;
    out["student_id"] = id;
    out["t_ms"] = t;
    out["files"] = files;
    out["content_hash"] = snap.content_hash;
    if (auto a = active_file(events, id, t)) {
      out["active_file"] = {{"file_path", a->file_path}, {"timestamp_ms", a->timestamp_ms}};
    } else {
      out["active_file"] = nullptr;
    }
    return out;
  }

 private:
  ApiOptions options_;
  RateLimiter limiter_;
  mutable std::mutex mu_;
  std::shared_ptr<Session> session_;
  std::shared_ptr<ReplayJob> replay_;
  std::shared_ptr<UpdateBus> bus_;
  std::atomic<bool> stopping_{false};
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace spark
