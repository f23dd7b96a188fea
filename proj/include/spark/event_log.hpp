#pragma once

// Keystroke-level edit events: validation, the append-only log, its
// line-delimited persisted form, merging of recordings, and replay.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spark/error.hpp"
#include "spark/utf8.hpp"

namespace spark {

using TimestampMs = std::int64_t;

struct EditEvent {
  std::string student_id;
  std::string session_id;
  std::string file_path;
  std::uint64_t offset = 0;
  std::uint64_t delete_count = 0;
  std::string insert_text;
  TimestampMs timestamp_ms = 0;
  std::uint64_t seq = 0;

  auto key() const { return std::tie(timestamp_ms, student_id, session_id, seq); }
  friend bool operator==(const EditEvent&, const EditEvent&) = default;
};

/// Strict weak order on (timestamp_ms, student_id, session_id, seq).
struct EventKeyLess {
  bool operator()(const EditEvent& a, const EditEvent& b) const { return a.key() < b.key(); }
};

// ---------------------------------------------------------------------------
// Validation

enum class RejectKind { NoOp, Path, Seq, Field };

inline std::string_view reject_name(RejectKind k) noexcept {
  switch (k) {
    case RejectKind::NoOp:
      return "RejectNoOp";
    case RejectKind::Path:
      return "RejectPath";
    case RejectKind::Seq:
      return "RejectSeq";
    case RejectKind::Field:
      return "RejectField";
  }
  return "Reject";
}

class ValidationError : public Error {
 public:
  ValidationError(RejectKind kind, std::string field, const std::string& detail)
      : Error(std::string(reject_name(kind)) + " (" + field + "): " + detail),
        kind_(kind),
        field_(std::move(field)) {}
  RejectKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }
  std::string_view name() const noexcept { return reject_name(kind_); }

 private:
  RejectKind kind_;
  std::string field_;
};

/// Relative, forward-slash path with no empty, "." or ".." segments.
inline bool is_workspace_path(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.find('\\') != std::string_view::npos) return false;
  if (path.size() >= 2 && path[1] == ':') return false;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = std::min(path.find('/', start), path.size());
    const auto seg = path.substr(start, end - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    start = end + 1;
  }
  return true;
}

/// Last accepted seq per (student_id, session_id) connection.
class StreamState {
 public:
  std::optional<std::uint64_t> last_seq(const std::string& student, const std::string& session) const {
    auto it = last_.find({student, session});
    if (it == last_.end()) return std::nullopt;
    return it->second;
  }
  void commit(const EditEvent& e) { last_[{e.student_id, e.session_id}] = e.seq; }

 private:
  std::map<std::pair<std::string, std::string>, std::uint64_t> last_;
};

/// Returns `event` unchanged when every invariant holds; throws ValidationError otherwise.
inline const EditEvent& validate_event(const EditEvent& event, const StreamState& state) {
  if (event.student_id.empty()) throw ValidationError(RejectKind::Field, "student_id", "empty");
  if (event.session_id.empty()) throw ValidationError(RejectKind::Field, "session_id", "empty");
  if (!utf8::valid(event.insert_text)) {
    throw ValidationError(RejectKind::Field, "insert_text", "invalid UTF-8");
  }
  if (event.delete_count == 0 && event.insert_text.empty()) {
    throw ValidationError(RejectKind::NoOp, "delete_count", "edit neither deletes nor inserts");
  }
  if (!is_workspace_path(event.file_path)) {
    throw ValidationError(RejectKind::Path, "file_path", "'" + event.file_path + "' escapes the workspace");
  }
  if (auto last = state.last_seq(event.student_id, event.session_id); last && event.seq <= *last) {
    throw ValidationError(RejectKind::Seq, "seq",
                          std::to_string(event.seq) + " does not exceed " + std::to_string(*last));
  }
  return event;
}

// ---------------------------------------------------------------------------
// Wire / persisted record

inline nlohmann::json to_json(const EditEvent& e) {
  return nlohmann::json{{"student_id", e.student_id},     {"session_id", e.session_id},
                        {"file_path", e.file_path},       {"offset", e.offset},
                        {"delete_count", e.delete_count}, {"insert_text", e.insert_text},
                        {"timestamp_ms", e.timestamp_ms}, {"seq", e.seq}};
}

/// Strict decode: exactly the EditEvent field names with the right JSON types.
/// Throws std::invalid_argument naming the offending field.
inline EditEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("event is not an object");
  static const std::vector<std::string> kFields = {"student_id", "session_id",  "file_path",    "offset",
                                                   "delete_count", "insert_text", "timestamp_ms", "seq"};
  for (const auto& [k, _] : j.items()) {
    if (std::find(kFields.begin(), kFields.end(), k) == kFields.end()) {
      throw std::invalid_argument("unknown field '" + k + "'");
    }
  }
  auto str = [&](const char* f) -> std::string {
    if (!j.contains(f) || !j[f].is_string()) throw std::invalid_argument(std::string("field '") + f + "' must be a string");
    return j[f].get<std::string>();
  };
  auto uns = [&](const char* f) -> std::uint64_t {
    if (!j.contains(f) || !j[f].is_number_unsigned()) {
      throw std::invalid_argument(std::string("field '") + f + "' must be a non-negative integer");
    }
    return j[f].get<std::uint64_t>();
  };
  EditEvent e;
  e.student_id = str("student_id");
  e.session_id = str("session_id");
  e.file_path = str("file_path");
  e.offset = uns("offset");
  e.delete_count = uns("delete_count");
  e.insert_text = str("insert_text");
  if (!j.contains("timestamp_ms") || !j["timestamp_ms"].is_number_integer()) {
    throw std::invalid_argument("field 'timestamp_ms' must be an integer");
  }
  e.timestamp_ms = j["timestamp_ms"].get<TimestampMs>();
  e.seq = uns("seq");
  return e;
}

inline std::string to_line(const EditEvent& e) { return to_json(e).dump(); }

// ---------------------------------------------------------------------------
// Storage seam

class LogStorage {
 public:
  virtual ~LogStorage() = default;
  virtual void write(const EditEvent& e) = 0;
};

/// Appends one record per line and flushes after each write.
class FileLogStorage final : public LogStorage {
 public:
  explicit FileLogStorage(const std::string& path) : path_(path), out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw StorageError("cannot open log '" + path + "' for append");
  }
  void write(const EditEvent& e) override {
    out_ << to_line(e) << '\n';
    out_.flush();
    if (!out_) throw StorageError("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Log

/// Immutable, globally ordered snapshot of a log taken at read time.
class LogView {
 public:
  LogView() : events_(std::make_shared<const std::vector<EditEvent>>()) {}
  explicit LogView(std::shared_ptr<const std::vector<EditEvent>> events) : events_(std::move(events)) {}

  auto begin() const { return events_->begin(); }
  auto end() const { return events_->end(); }
  std::size_t size() const { return events_->size(); }
  bool empty() const { return events_->empty(); }
  const EditEvent& operator[](std::size_t i) const { return (*events_)[i]; }
  const std::vector<EditEvent>& events() const { return *events_; }

 private:
  std::shared_ptr<const std::vector<EditEvent>> events_;
};

/// Append-only event log. Appends are serialized through one internal lock;
/// readers take LogView snapshots and never observe a partial append.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::shared_ptr<LogStorage> storage) : storage_(std::move(storage)) {}

  EventLog(EventLog&& other) noexcept {
    std::lock_guard lock(other.mu_);
    storage_ = std::move(other.storage_);
    appended_ = std::move(other.appended_);
    ordered_ = std::move(other.ordered_);
    view_ = std::move(other.view_);
  }
  EventLog& operator=(EventLog&& other) noexcept {
    if (this != &other) {
      std::scoped_lock lock(mu_, other.mu_);
      storage_ = std::move(other.storage_);
      appended_ = std::move(other.appended_);
      ordered_ = std::move(other.ordered_);
      view_ = std::move(other.view_);
    }
    return *this;
  }

  /// Persists (if a storage backend is attached) and then inserts at the
  /// event's ordering-key position. Equal keys keep append order.
  void append(const EditEvent& e) {
    std::lock_guard lock(mu_);
    if (storage_) storage_->write(e);
    appended_.push_back(e);
    auto pos = std::upper_bound(ordered_.begin(), ordered_.end(), e, EventKeyLess{});
    ordered_.insert(pos, e);
    view_.reset();
  }

  LogView view() const {
    std::lock_guard lock(mu_);
    if (!view_) view_ = std::make_shared<const std::vector<EditEvent>>(ordered_);
    return LogView(view_);
  }

  /// Events in the order they were appended (the persisted line order).
  std::vector<EditEvent> append_order() const {
    std::lock_guard lock(mu_);
    return appended_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return appended_.size();
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<LogStorage> storage_;
  std::vector<EditEvent> appended_;
  std::vector<EditEvent> ordered_;
  mutable std::shared_ptr<const std::vector<EditEvent>> view_;
};

inline void persist(const EventLog& log, std::ostream& out) {
  for (const auto& e : log.append_order()) out << to_line(e) << '\n';
  if (!out) throw StorageError("persist: stream write failed");
}

inline void persist_file(const EventLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open '" + path + "' for writing");
  persist(log, out);
}

/// Parses a persisted log. Every record must decode and satisfy the
/// stateless event invariants; the first bad line raises FormatError.
inline EventLog load_log(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  const StreamState no_state;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    EditEvent e;
    try {
      e = event_from_json(nlohmann::json::parse(line));
      validate_event(e, no_state);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(lineno, ex.what());
    } catch (const std::exception& ex) {
      throw FormatError(lineno, ex.what());
    }
    log.append(e);
  }
  return log;
}

inline EventLog load_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open log '" + path + "'");
  return load_log(in);
}

/// Multiset union of several recordings, globally ordered. Two events that
/// share the full ordering key are a ConflictError.
inline EventLog merge_logs(const std::vector<LogView>& logs) {
  std::vector<EditEvent> all;
  for (const auto& v : logs) all.insert(all.end(), v.begin(), v.end());
  std::stable_sort(all.begin(), all.end(), EventKeyLess{});
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i - 1].key() == all[i].key()) {
      throw ConflictError("duplicate ordering key: student=" + all[i].student_id +
                          " session=" + all[i].session_id + " seq=" + std::to_string(all[i].seq) +
                          " t=" + std::to_string(all[i].timestamp_ms));
    }
  }
  EventLog merged;
  for (const auto& e : all) merged.append(e);
  return merged;
}

// ---------------------------------------------------------------------------
// Replay

class ReplayClock {
 public:
  /// `speed` > 0; infinity means as fast as possible.
  explicit ReplayClock(double speed = 1.0) : speed_(speed) {
    if (!(speed > 0)) throw std::invalid_argument("replay speed must be positive");
  }
  static ReplayClock as_fast_as_possible() { return ReplayClock(std::numeric_limits<double>::infinity()); }

  double speed() const noexcept { return speed_; }
  bool unthrottled() const noexcept { return std::isinf(speed_); }
  TimestampMs cursor() const noexcept { return cursor_.load(); }

  void advance(TimestampMs t) {
    if (t > cursor_.load()) cursor_.store(t);
  }

  std::chrono::nanoseconds delay(TimestampMs from, TimestampMs to) const {
    if (unthrottled() || to <= from) return std::chrono::nanoseconds{0};
    return std::chrono::nanoseconds{static_cast<std::int64_t>(static_cast<double>(to - from) * 1e6 / speed_)};
  }

 private:
  double speed_;
  std::atomic<TimestampMs> cursor_{std::numeric_limits<TimestampMs>::min()};
};

struct ReplayReport {
  std::size_t events_delivered = 0;
  bool aborted = false;
  std::string error;
};

using EventSink = std::function<void(const EditEvent&)>;
using Sleeper = std::function<void(std::chrono::nanoseconds)>;

inline void real_sleep(std::chrono::nanoseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

/// Delivers every event once in ordering-key order, pacing by Δt / speed.
/// A throwing sink (or `cancel` turning true) stops the run early.
inline ReplayReport replay(const LogView& log, ReplayClock& clock, const EventSink& sink,
                           const Sleeper& sleep = real_sleep, const std::atomic<bool>* cancel = nullptr) {
  ReplayReport report;
  std::optional<TimestampMs> prev;
  for (const auto& e : log) {
    if (cancel && cancel->load()) {
      report.aborted = true;
      report.error = "cancelled";
      return report;
    }
    if (prev) {
      if (auto d = clock.delay(*prev, e.timestamp_ms); d.count() > 0) sleep(d);
    }
    clock.advance(e.timestamp_ms);
    try {
      sink(e);
    } catch (const std::exception& ex) {
      report.aborted = true;
      report.error = ex.what();
      return report;
    }
    ++report.events_delivered;
    prev = e.timestamp_ms;
  }
  return report;
}

}  // namespace spark
