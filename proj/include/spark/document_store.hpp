#pragma once

// Reconstruction of a student's multi-file workspace at any instant from the
// edit log, with snapshots cached at tick boundaries.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spark/digest.hpp"
#include "spark/error.hpp"
#include "spark/event_log.hpp"
#include "spark/utf8.hpp"

namespace spark {

inline constexpr TimestampMs kMinuteMs = 60'000;

using FileMap = std::map<std::string, std::string>;

/// Splices `insert_text` over the scalar range [offset, offset + delete_count).
inline std::string apply_edit(std::string_view text, std::uint64_t offset, std::uint64_t delete_count,
                              std::string_view insert_text) {
  const std::size_t begin = utf8::byte_offset(text, offset);
  const std::size_t end = begin == std::string_view::npos ? begin : [&] {
    std::size_t i = begin;
    for (std::uint64_t n = 0; n < delete_count; ++n) {
      if (i >= text.size()) return std::string_view::npos;
      i += utf8::sequence_length(text, i);
    }
    return i;
  }();
  if (begin == std::string_view::npos || end == std::string_view::npos) {
    throw OutOfBounds(offset, delete_count, utf8::scalar_length(text));
  }
  std::string out;
  out.reserve(text.size() - (end - begin) + insert_text.size());
  out.append(text.substr(0, begin));
  out.append(insert_text);
  out.append(text.substr(end));
  return out;
}

inline std::string content_hash(const FileMap& files) {
  Sha256 h;
  for (const auto& [path, text] : files) h.field(path).field(text);
  return h.hex();
}

struct DocumentSnapshot {
  std::string student_id;
  FileMap files;
  TimestampMs timestamp_ms = 0;
  std::string content_hash;

  friend bool operator==(const DocumentSnapshot&, const DocumentSnapshot&) = default;
};

inline DocumentSnapshot make_snapshot(std::string student, FileMap files, TimestampMs t) {
  auto hash = content_hash(files);
  return DocumentSnapshot{std::move(student), std::move(files), t, std::move(hash)};
}

/// An apply_edit failure while folding a student's stream.
class StreamCorrupt : public Error {
 public:
  StreamCorrupt(DocumentSnapshot partial, EditEvent failing, const std::string& why)
      : Error("stream corrupt for " + failing.student_id + " at seq " + std::to_string(failing.seq) + " (" +
              failing.file_path + "): " + why),
        partial_(std::move(partial)),
        failing_(std::move(failing)) {}
  const DocumentSnapshot& partial() const noexcept { return partial_; }
  const EditEvent& failing_event() const noexcept { return failing_; }

 private:
  DocumentSnapshot partial_;
  EditEvent failing_;
};

namespace detail {

inline void apply_to(FileMap& files, const EditEvent& e, const std::string& student, TimestampMs t) {
  auto& text = files[e.file_path];  // first mention creates an empty file
  try {
    text = apply_edit(text, e.offset, e.delete_count, e.insert_text);
  } catch (const OutOfBounds& oob) {
    throw StreamCorrupt(make_snapshot(student, files, t), e, oob.what());
  }
}

}  // namespace detail

/// Events of one student, in ordering-key order.
using StudentEvents = std::span<const EditEvent>;

/// Groups a class view by student; each group keeps ordering-key order.
inline std::map<std::string, std::vector<EditEvent>> index_by_student(const LogView& view) {
  std::map<std::string, std::vector<EditEvent>> out;
  for (const auto& e : view) out[e.student_id].push_back(e);
  return out;
}

inline std::vector<std::string> students_in(const LogView& view) {
  std::vector<std::string> ids;
  for (const auto& e : view) ids.push_back(e.student_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

/// Number of leading events with timestamp <= t.
inline std::size_t count_at_or_before(StudentEvents events, TimestampMs t) {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](TimestampMs v, const EditEvent& e) { return v < e.timestamp_ms; });
  return static_cast<std::size_t>(it - events.begin());
}

/// Starter files with every event at or before `t` applied, uncached.
inline DocumentSnapshot reconstruct_at(const std::string& student_id, StudentEvents events, TimestampMs t,
                                       const FileMap& starter) {
  FileMap files = starter;
  const std::size_t n = count_at_or_before(events, t);
  for (std::size_t i = 0; i < n; ++i) detail::apply_to(files, events[i], student_id, t);
  return make_snapshot(student_id, std::move(files), t);
}

inline DocumentSnapshot reconstruct_at(const LogView& view, const std::string& student_id, TimestampMs t,
                                       const FileMap& starter) {
  std::vector<EditEvent> mine;
  for (const auto& e : view) {
    if (e.student_id == student_id) mine.push_back(e);
  }
  return reconstruct_at(student_id, mine, t, starter);
}

/// Per-student snapshots at tick boundaries anchor + k * interval.
///
/// A cached boundary stays valid while the number of the student's events at
/// or before it is unchanged; the log is append-only, so an unchanged count
/// means an unchanged event set. Late events therefore invalidate exactly the
/// boundaries they precede.
class SnapshotCache {
 public:
  SnapshotCache(FileMap starter, TimestampMs anchor, TimestampMs interval = kMinuteMs)
      : starter_(std::move(starter)), anchor_(anchor), interval_(interval) {
    if (interval_ <= 0) throw std::invalid_argument("tick interval must be positive");
  }

  const FileMap& starter() const noexcept { return starter_; }

  DocumentSnapshot reconstruct(const std::string& student_id, StudentEvents events, TimestampMs t) {
    const std::size_t target = count_at_or_before(events, t);

    FileMap files = starter_;
    std::size_t applied = 0;
    bool found = false;
    {
      std::lock_guard lock(mu_);
      auto sit = boundaries_.find(student_id);
      if (sit != boundaries_.end()) {
        auto& by_time = sit->second;
        for (auto it = by_time.upper_bound(t); it != by_time.begin();) {
          --it;
          if (it->second.applied == count_at_or_before(events, it->first)) {
            files = it->second.files;
            applied = it->second.applied;
            found = true;
            break;
          }
        }
      }
    }
    ++lookups_;
    if (found) ++hits_;

    std::vector<std::pair<TimestampMs, Entry>> fresh;
    // First boundary at or after the previously applied event.
    auto next_boundary = [&](std::size_t idx) {
      const TimestampMs after = idx == 0 ? anchor_ : std::max(anchor_, events[idx - 1].timestamp_ms);
      const TimestampMs k = (after - anchor_ + interval_ - 1) / interval_;
      return anchor_ + k * interval_;
    };
    for (std::size_t i = applied; i < target; ++i) {
      if (events[i].timestamp_ms >= anchor_) {
        if (const TimestampMs b = next_boundary(i); b < events[i].timestamp_ms && b <= t) {
          fresh.emplace_back(b, Entry{i, files});
        }
      }
      detail::apply_to(files, events[i], student_id, t);
    }
    if (t >= anchor_ && (t - anchor_) % interval_ == 0) fresh.emplace_back(t, Entry{target, files});

    if (!fresh.empty()) {
      std::lock_guard lock(mu_);
      auto& by_time = boundaries_[student_id];
      for (auto& [b, entry] : fresh) by_time.insert_or_assign(b, std::move(entry));
    }
    return make_snapshot(student_id, std::move(files), t);
  }

  std::size_t lookups() const noexcept { return lookups_; }
  std::size_t hits() const noexcept { return hits_; }

 private:
  struct Entry {
    std::size_t applied = 0;
    FileMap files;
  };

  FileMap starter_;
  TimestampMs anchor_;
  TimestampMs interval_;
  std::mutex mu_;
  std::map<std::string, std::map<TimestampMs, Entry>> boundaries_;
  std::atomic<std::size_t> lookups_{0};
  std::atomic<std::size_t> hits_{0};
};

struct SessionBounds {
  TimestampMs start_ms = 0;
  TimestampMs end_ms = 0;
};

/// First and last event timestamps of a non-empty view.
inline std::optional<SessionBounds> bounds_of(const LogView& view) {
  if (view.empty()) return std::nullopt;
  return SessionBounds{view[0].timestamp_ms, view[view.size() - 1].timestamp_ms};
}

/// start, start + interval, ... up to end, plus end itself when unaligned.
inline std::vector<TimestampMs> minute_ticks(SessionBounds bounds, TimestampMs interval = kMinuteMs) {
  if (bounds.end_ms < bounds.start_ms) throw std::invalid_argument("session end precedes start");
  if (interval <= 0) throw std::invalid_argument("tick interval must be positive");
  std::vector<TimestampMs> ticks;
  for (TimestampMs t = bounds.start_ms; t <= bounds.end_ms; t += interval) ticks.push_back(t);
  if (ticks.back() != bounds.end_ms) ticks.push_back(bounds.end_ms);
  return ticks;
}

struct ActiveFileMarker {
  std::string student_id;
  std::string file_path;
  TimestampMs timestamp_ms = 0;
  friend bool operator==(const ActiveFileMarker&, const ActiveFileMarker&) = default;
};

inline std::optional<ActiveFileMarker> active_file(StudentEvents events, const std::string& student_id,
                                                   TimestampMs t) {
  const std::size_t n = count_at_or_before(events, t);
  if (n == 0) return std::nullopt;
  const auto& e = events[n - 1];
  return ActiveFileMarker{student_id, e.file_path, e.timestamp_ms};
}

inline std::optional<ActiveFileMarker> active_file(const LogView& view, const std::string& student_id,
                                                   TimestampMs t) {
  std::optional<ActiveFileMarker> out;
  for (const auto& e : view) {
    if (e.timestamp_ms > t) break;
    if (e.student_id == student_id) out = ActiveFileMarker{student_id, e.file_path, e.timestamp_ms};
  }
  return out;
}

/// Reads every regular file under `root` into a map keyed by '/'-separated relative path.
inline FileMap load_workspace(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error("workspace '" + root.string() + "' is not a directory");
  FileMap files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    files[fs::relative(entry.path(), root).generic_string()] = buf.str();
  }
  return files;
}

}  // namespace spark
