#pragma once

// A monitoring session: ingestion, tick publication, the live update bus and
// replay control. The HTTP layer is a thin mapping over this class.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spark/digest.hpp"
#include "spark/document_store.hpp"
#include "spark/evaluator.hpp"
#include "spark/event_log.hpp"
#include "spark/inspector.hpp"
#include "spark/verify.hpp"

namespace spark {

enum class SessionMode { Live, Replay };

struct SessionConfig {
  std::string session_id;
  std::filesystem::path starter;
  std::filesystem::path checkpoints;
  std::filesystem::path reference;
  TimestampMs tick_interval_ms = kMinuteMs;
  SessionMode mode = SessionMode::Live;
  /// Accepted events are also appended here when set.
  std::optional<std::filesystem::path> log;
  /// Tick anchor; defaults to the first ingested event.
  std::optional<TimestampMs> start_ms;
  std::vector<std::string> roster;
};

/// Reads a session file. Relative paths resolve against the file's directory.
inline SessionConfig load_session_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open session config '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("session config '" + file.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw Error("session config must be an object");
  const auto base = file.parent_path();
  auto path_field = [&](const char* k, bool required) -> std::optional<std::filesystem::path> {
    if (!j.contains(k)) {
      if (required) throw Error(std::string("session config lacks '") + k + "'");
      return std::nullopt;
    }
    if (!j[k].is_string()) throw Error(std::string("session config field '") + k + "' must be a string");
    std::filesystem::path p = j[k].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  SessionConfig c;
  c.session_id = j.value("session_id", "session");
  c.starter = *path_field("starter", true);
  c.checkpoints = *path_field("checkpoints", true);
  c.reference = *path_field("reference", true);
  c.log = path_field("log", false);
  if (j.contains("tick_interval_ms")) {
    if (!j["tick_interval_ms"].is_number_integer() || j["tick_interval_ms"].get<TimestampMs>() <= 0) {
      throw Error("tick_interval_ms must be a positive integer");
    }
    c.tick_interval_ms = j["tick_interval_ms"].get<TimestampMs>();
  }
  if (j.contains("mode")) {
    const auto m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    if (m == "live") {
      c.mode = SessionMode::Live;
    } else if (m == "replay") {
      c.mode = SessionMode::Replay;
    } else {
      throw Error("mode must be \"live\" or \"replay\"");
    }
  }
  if (j.contains("start_ms")) {
    if (!j["start_ms"].is_number_integer()) throw Error("start_ms must be an integer");
    c.start_ms = j["start_ms"].get<TimestampMs>();
  }
  if (j.contains("roster")) c.roster = j["roster"].get<std::vector<std::string>>();
  return c;
}

struct SessionAssets {
  FileMap starter;
  std::vector<Checkpoint> checkpoints;
  FileMap reference;
};

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Loads and validates everything a session file references. Throws on any
/// missing path or invalid checkpoint configuration.
inline SessionAssets load_session_assets(const SessionConfig& c) {
  SessionAssets a;
  a.starter = load_workspace(c.starter);
  a.checkpoints = parse_checkpoint_config(read_text_file(c.checkpoints)).checkpoints;
  a.reference = load_workspace(c.reference);
  return a;
}

// ---------------------------------------------------------------------------
// Live updates

/// One subscriber's queue of serialized LiveUpdate lines.
class Subscription {
 public:
  void push(std::string line) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      queue_.push_back(std::move(line));
    }
    cv_.notify_one();
  }
  /// Next line, or nullopt on timeout or close.
  std::optional<std::string> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    auto line = std::move(queue_.front());
    queue_.pop_front();
    return line;
  }
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

class UpdateBus {
 public:
  std::shared_ptr<Subscription> subscribe() {
    auto s = std::make_shared<Subscription>();
    std::lock_guard lock(mu_);
    subs_.push_back(s);
    return s;
  }
  void publish(const nlohmann::json& update) {
    const auto line = update.dump();
    std::lock_guard lock(mu_);
    std::erase_if(subs_, [](const std::weak_ptr<Subscription>& w) {
      auto s = w.lock();
      return !s || s->closed();
    });
    for (auto& w : subs_) {
      if (auto s = w.lock()) s->push(line);
    }
  }
  void close_all() {
    std::lock_guard lock(mu_);
    for (auto& w : subs_) {
      if (auto s = w.lock()) s->close();
    }
    subs_.clear();
  }

 private:
  std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;
};

inline nlohmann::json student_edited(const EditEvent& e) {
  return {{"type", "StudentEdited"}, {"student_id", e.student_id}, {"file_path", e.file_path}, {"t_ms", e.timestamp_ms}};
}

inline std::string slice_hash(const TickSlice& s) { return sha256_hex(to_json(s).dump()); }

inline nlohmann::json tick_ready(const TickSlice& s) {
  return {{"type", "TickReady"}, {"t_ms", s.t_ms}, {"slice_hash", slice_hash(s)}};
}

// ---------------------------------------------------------------------------
// Session

struct Verdict {
  bool accepted = false;
  std::string error;  // RejectNoOp, RejectPath, RejectSeq, RejectField, RejectRate
  std::string field;
  std::string message;
};

inline nlohmann::json to_json(const Verdict& v) {
  if (v.accepted) return {{"accepted", true}};
  return {{"accepted", false}, {"error", v.error}, {"field", v.field}, {"message", v.message}};
}

class Session {
 public:
  Session(SessionConfig config, SessionAssets assets, std::shared_ptr<Runner> runner = nullptr,
          std::shared_ptr<LogStorage> storage = nullptr, std::shared_ptr<UpdateBus> bus = nullptr)
      : config_(std::move(config)),
        assets_(std::move(assets)),
        runner_(runner ? std::move(runner) : std::make_shared<StaticRunner>()),
        log_(std::move(storage)),
        bus_(bus ? std::move(bus) : std::make_shared<UpdateBus>()) {}

  const SessionConfig& config() const { return config_; }
  const SessionAssets& assets() const { return assets_; }
  Runner& runner() { return *runner_; }
  UpdateBus& updates() { return *bus_; }
  const std::shared_ptr<UpdateBus>& bus() const { return bus_; }
  LogView view() const { return log_.view(); }
  const EventLog& log() const { return log_; }
  unsigned threads = 0;

  /// Validates and appends a batch in order. Rejected events leave no trace.
  std::vector<Verdict> ingest(const std::vector<EditEvent>& batch) {
    std::vector<Verdict> verdicts;
    std::vector<TimestampMs> accepted;
    {
      std::lock_guard lock(ingest_mu_);
      for (const auto& e : batch) {
        try {
          validate_event(e, streams_);
          log_.append(e);
          streams_.commit(e);
          bus_->publish(student_edited(e));
          accepted.push_back(e.timestamp_ms);
          verdicts.push_back(Verdict{true, "", "", ""});
        } catch (const ValidationError& v) {
          verdicts.push_back(Verdict{false, std::string(reject_name(v.kind())), v.field(), v.what()});
        }
      }
    }
    if (!accepted.empty()) advance(accepted);
    return verdicts;
  }

  /// Appends an event from a persisted log: structural checks only, since
  /// replay order need not follow per-stream seq order.
  void ingest_trusted(const EditEvent& e) {
    {
      std::lock_guard lock(ingest_mu_);
      validate_event(e, StreamState{});
      log_.append(e);
      auto last = streams_.last_seq(e.student_id, e.session_id);
      if (!last || e.seq > *last) streams_.commit(e);
      bus_->publish(student_edited(e));
    }
    advance({e.timestamp_ms});
  }

  /// Closes every remaining tick up to the last event, including a final
  /// unaligned one, so the published ticks equal minute_ticks over the log.
  void finalize() {
    std::lock_guard lock(engine_mu_);
    if (!anchor_ || !max_ts_) return;
    while (next_tick_ <= *max_ts_) close_tick(next_tick_);
    const auto last = latest_tick_locked();
    if (last && *last < *max_ts_) close_tick(*max_ts_);
  }

  /// Latest published tick at or before t.
  std::shared_ptr<const TickSlice> slice_at(TimestampMs t) const {
    std::shared_lock lock(pub_mu_);
    auto it = published_.upper_bound(t);
    if (it == published_.begin()) return nullptr;
    return std::prev(it)->second;
  }

  std::shared_ptr<const TickSlice> latest_slice() const {
    std::shared_lock lock(pub_mu_);
    if (published_.empty()) return nullptr;
    return published_.rbegin()->second;
  }

  /// On-demand evaluation at t (not published).
  TickSlice evaluate_at(TimestampMs t) {
    std::lock_guard lock(engine_mu_);
    return compute(t);
  }

  std::optional<TimestampMs> last_event_ms() const {
    std::lock_guard lock(engine_mu_);
    return max_ts_;
  }
  std::optional<TimestampMs> anchor_ms() const {
    std::lock_guard lock(engine_mu_);
    return anchor_;
  }

  ProgressMatrix matrix() const {
    ProgressMatrix m;
    {
      std::shared_lock lock(pub_mu_);
      for (const auto& [_, s] : published_) m.ticks.push_back(*s);
    }
    std::lock_guard lock(engine_mu_);
    m.errors.assign(errors_.begin(), errors_.end());
    return m;
  }

  std::vector<TimestampMs> published_ticks() const {
    std::shared_lock lock(pub_mu_);
    std::vector<TimestampMs> out;
    for (const auto& [t, _] : published_) out.push_back(t);
    return out;
  }

  /// Every student's snapshot at t, ordered by student id: the class as it
  /// stands at that instant.
  std::vector<DocumentSnapshot> class_snapshots(TimestampMs t) const {
    const auto v = view();
    std::vector<DocumentSnapshot> out;
    std::set<std::string> roster(config_.roster.begin(), config_.roster.end());
    for (const auto& [sid, events] : index_by_student(v)) {
      if (roster.contains(sid) || events.front().timestamp_ms <= t) roster.insert(sid);
    }
    for (const auto& sid : roster) {
      try {
        out.push_back(reconstruct_at(v, sid, t, assets_.starter));
      } catch (const StreamCorrupt& e) {
        out.push_back(e.partial());
      }
    }
    return out;
  }

  VerificationReport verify(const std::optional<std::string>& checkpoint_id) {
    const auto ref = reference_snapshot(assets_.reference);
    if (!checkpoint_id) return verify_checkpoints(assets_.checkpoints, ref, *runner_);
    for (const auto& c : assets_.checkpoints) {
      if (c.id == *checkpoint_id) return verify_checkpoint(c, ref, *runner_);
    }
    throw KeyNotFound("unknown checkpoint '" + *checkpoint_id + "'");
  }

 private:
  void advance(const std::vector<TimestampMs>& stamps) {
    std::lock_guard lock(engine_mu_);
    const auto [lo, hi] = std::minmax_element(stamps.begin(), stamps.end());
    if (!anchor_) {
      anchor_ = config_.start_ms.value_or(*lo);
      next_tick_ = *anchor_;
      snapshots_.emplace(assets_.starter, *anchor_, config_.tick_interval_ms);
    }
    // Late events: republish every already-closed tick they affect.
    if (const auto last = latest_tick_locked(); last && *lo <= *last) {
      std::vector<TimestampMs> stale;
      {
        std::shared_lock pl(pub_mu_);
        for (auto it = published_.lower_bound(*lo); it != published_.end(); ++it) stale.push_back(it->first);
      }
      for (auto t : stale) {
        publish(compute(t));
        bus_->publish({{"type", "StatsChanged"}, {"t_ms", t}});
      }
    }
    if (!max_ts_ || *hi > *max_ts_) max_ts_ = *hi;
    while (next_tick_ < *max_ts_) close_tick(next_tick_);
  }

  void close_tick(TimestampMs t) {
    auto slice = compute(t);
    bus_->publish(tick_ready(slice));
    publish(std::move(slice));
    if (t == next_tick_) next_tick_ += config_.tick_interval_ms;
  }

  TickSlice compute(TimestampMs t) {
    MatrixOptions opt;
    opt.threads = threads;
    opt.memo = &memo_;
    opt.snapshots = snapshots_ ? &*snapshots_ : nullptr;
    opt.roster = config_.roster;
    auto m = build_progress_matrix(view(), assets_.checkpoints, {t}, *runner_, assets_.starter, opt);
    errors_.insert(m.errors.begin(), m.errors.end());
    return std::move(m.ticks.front());
  }

  void publish(TickSlice slice) {
    auto p = std::make_shared<const TickSlice>(std::move(slice));
    std::unique_lock lock(pub_mu_);
    published_[p->t_ms] = std::move(p);
  }

  std::optional<TimestampMs> latest_tick_locked() const {
    std::shared_lock lock(pub_mu_);
    if (published_.empty()) return std::nullopt;
    return published_.rbegin()->first;
  }

  SessionConfig config_;
  SessionAssets assets_;
  std::shared_ptr<Runner> runner_;
  EventLog log_;
  std::shared_ptr<UpdateBus> bus_;

  std::mutex ingest_mu_;
  StreamState streams_;

  mutable std::mutex engine_mu_;
  std::optional<TimestampMs> anchor_;
  std::optional<TimestampMs> max_ts_;
  TimestampMs next_tick_ = 0;
  std::optional<SnapshotCache> snapshots_;
  MemoCache memo_;
  std::set<std::string> errors_;

  mutable std::shared_mutex pub_mu_;
  std::map<TimestampMs, std::shared_ptr<const TickSlice>> published_;
};

/// Storage for a session's configured log file, or null.
inline std::shared_ptr<LogStorage> session_storage(const SessionConfig& c) {
  if (!c.log) return nullptr;
  return std::make_shared<FileLogStorage>(c.log->string());
}

// ---------------------------------------------------------------------------
// Replay control

struct ReplayStatus {
  bool running = false;
  bool done = false;
  std::size_t delivered = 0;
  std::size_t total = 0;
  std::optional<TimestampMs> cursor_ms;
  std::string error;
};

inline nlohmann::json to_json(const ReplayStatus& s) {
  nlohmann::json j{{"running", s.running}, {"done", s.done}, {"events_delivered", s.delivered}, {"total", s.total},
                   {"error", s.error}};
  j["cursor_ms"] = s.cursor_ms ? nlohmann::json(*s.cursor_ms) : nlohmann::json(nullptr);
  return j;
}

/// Feeds a persisted log into a session on a background thread, then
/// finalizes it.
class ReplayJob {
 public:
  ReplayJob(std::shared_ptr<Session> session, LogView log, double speed, Sleeper sleeper = real_sleep)
      : session_(std::move(session)), log_(std::move(log)), clock_(speed), sleeper_(std::move(sleeper)) {
    total_ = log_.size();
    thread_ = std::thread([this] { run(); });
  }
  ReplayJob(const ReplayJob&) = delete;
  ReplayJob& operator=(const ReplayJob&) = delete;
  ~ReplayJob() {
    cancel_ = true;
    if (thread_.joinable()) thread_.join();
  }

  void wait() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return done_; });
  }

  ReplayStatus status() const {
    std::lock_guard lock(mu_);
    ReplayStatus s;
    s.running = !done_;
    s.done = done_;
    s.delivered = delivered_.load();
    s.total = total_;
    if (s.delivered > 0) s.cursor_ms = clock_.cursor();
    s.error = error_;
    return s;
  }

  const std::shared_ptr<Session>& session() const { return session_; }

 private:
  void run() {
    auto report = replay(
        log_, clock_,
        [&](const EditEvent& e) {
          session_->ingest_trusted(e);
          ++delivered_;
        },
        sleeper_, &cancel_);
    if (!report.aborted) session_->finalize();
    std::lock_guard lock(mu_);
    error_ = report.error;
    done_ = true;
    cv_.notify_all();
  }

  std::shared_ptr<Session> session_;
  LogView log_;
  ReplayClock clock_;
  Sleeper sleeper_;
  std::size_t total_ = 0;
  std::atomic<std::size_t> delivered_{0};
  std::atomic<bool> cancel_{false};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::string error_;
  std::thread thread_;
};

}  // namespace spark
