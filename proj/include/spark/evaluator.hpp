#pragma once

// Task evaluation against snapshots, memoized per (task, snapshot hash), and
// the progress matrix / classroom statistics built from the outcomes.

#include <algorithm>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "spark/cascade.hpp"
#include "spark/checkpoints.hpp"
#include "spark/document_store.hpp"
#include "spark/page.hpp"

namespace spark {

enum class TaskStatus { Pass, Fail, Unsupported, Error };

inline std::string_view status_name(TaskStatus s) {
  switch (s) {
    case TaskStatus::Pass:
      return "pass";
    case TaskStatus::Fail:
      return "fail";
    case TaskStatus::Unsupported:
      return "unsupported";
    case TaskStatus::Error:
      return "error";
  }
  return "error";
}

inline std::optional<TaskStatus> parse_status(std::string_view s) {
  for (auto st : {TaskStatus::Pass, TaskStatus::Fail, TaskStatus::Unsupported, TaskStatus::Error}) {
    if (status_name(st) == s) return st;
  }
  return std::nullopt;
}

struct TaskOutcome {
  std::string task_id;
  TaskStatus status = TaskStatus::Fail;
  std::string detail;
  TimestampMs evaluated_at = 0;
  std::string snapshot_hash;

  friend bool operator==(const TaskOutcome&, const TaskOutcome&) = default;
};

inline nlohmann::json to_json(const TaskOutcome& o) {
  return {{"task_id", o.task_id},
          {"status", status_name(o.status)},
          {"detail", o.detail},
          {"evaluated_at_ms", o.evaluated_at},
          {"snapshot_hash", o.snapshot_hash}};
}

/// Strict decode of a TaskOutcome record; throws std::invalid_argument.
inline TaskOutcome outcome_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("outcome is not an object");
  auto need_str = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_string()) throw std::invalid_argument(std::string("outcome field '") + k + "' must be a string");
    return j[k].get<std::string>();
  };
  TaskOutcome o;
  o.task_id = need_str("task_id");
  auto st = parse_status(need_str("status"));
  if (!st) throw std::invalid_argument("outcome status must be pass, fail, unsupported or error");
  o.status = *st;
  o.detail = need_str("detail");
  if (j.contains("evaluated_at_ms")) {
    if (!j["evaluated_at_ms"].is_number_integer()) throw std::invalid_argument("evaluated_at_ms must be an integer");
    o.evaluated_at = j["evaluated_at_ms"].get<TimestampMs>();
  }
  if (j.contains("snapshot_hash")) o.snapshot_hash = need_str("snapshot_hash");
  return o;
}

// ---------------------------------------------------------------------------
// Static assertion evaluation

namespace detail {

inline std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

inline std::vector<NodeId> run_query(const Page& page, const std::string& selector) {
  return query(parse_selector(selector), page.tree);
}

/// The effective declaration of `property` among rules carrying exactly
/// `target` as one of their selector alternatives.
inline std::optional<std::string> declared_for(const Page& page, const ComplexSelector& target,
                                               const std::string& property) {
  std::optional<std::pair<std::tuple<bool, std::size_t, std::size_t, std::size_t>, std::string>> best;
  for (std::size_t s = 0; s < page.sheets.size(); ++s) {
    for (std::size_t r = 0; r < page.sheets[s].rules.size(); ++r) {
      const auto& rule = page.sheets[s].rules[r];
      const auto& alts = rule.selectors.alternatives;
      if (std::find(alts.begin(), alts.end(), target) == alts.end()) continue;
      for (std::size_t k = 0; k < rule.declarations.size(); ++k) {
        const auto& d = rule.declarations[k];
        if (d.property != property) continue;
        auto rank = std::make_tuple(d.important, s, r, k);
        if (!best || best->first < rank) best = std::make_pair(rank, d.value);
      }
    }
  }
  if (!best) return std::nullopt;
  return best->second;
}

/// nullopt on success, otherwise the failure text after "<kind> on <selector>: ".
inline std::optional<std::string> check_assertion(const Page& page, const Assertion& assertion) {
  return std::visit(
      [&](const auto& a) -> std::optional<std::string> {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, check::RuleDeclared>) {
          const auto want = normalize_value(a.property, a.expected);
          for (const auto& alt : parse_selector(a.selector).alternatives) {
            auto got = declared_for(page, alt, a.property);
            if (!got) return "no rule for " + serialize(alt) + " declares " + a.property;
            const auto canon = normalize_value(a.property, *got);
            if (canon != want) return "expected " + a.property + ": " + want + ", got " + canon;
          }
          return std::nullopt;
        } else {
          const auto nodes = run_query(page, a.selector);
          if constexpr (std::is_same_v<T, check::Exists>) {
            if (nodes.empty()) return std::string("no elements matched");
            if (nodes.size() < a.min_count) {
              return "expected at least " + std::to_string(a.min_count) + " elements, got " +
                     std::to_string(nodes.size());
            }
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, check::Count>) {
            const auto n = nodes.size();
            const bool ok = a.comparator == Comparator::Equal     ? n == a.n
                            : a.comparator == Comparator::AtLeast ? n >= a.n
                                                                  : n <= a.n;
            if (ok) return std::nullopt;
            return "expected count " + std::string(comparator_symbol(a.comparator)) + " " + std::to_string(a.n) +
                   ", got " + std::to_string(n);
          } else {
            if (nodes.empty()) return std::string("no elements matched");
            for (NodeId id : nodes) {
              if constexpr (std::is_same_v<T, check::Attribute>) {
                auto got = page.tree.attribute(id, a.attribute);
                if (!got) return "expected " + a.attribute + "=" + quote(a.expected) + ", got (absent)";
                if (*got != a.expected) return "expected " + a.attribute + "=" + quote(a.expected) + ", got " + quote(*got);
              } else if constexpr (std::is_same_v<T, check::Text>) {
                const auto got = page.tree.text_content(id);
                const bool ok = a.mode == TextMode::Exact ? got == a.expected
                                                          : got.find(a.expected) != std::string::npos;
                if (!ok) {
                  return std::string(a.mode == TextMode::Exact ? "expected text " : "expected text containing ") +
                         quote(a.expected) + ", got " + quote(got);
                }
              } else if constexpr (std::is_same_v<T, check::Style>) {
                const auto style = computed_style(id, page.sheets, page.tree);
                const auto want = normalize_value(a.property, a.expected);
                auto it = style.find(a.property);
                const std::string got = it == style.end() ? "(unset)" : it->second.value;
                if (got != want) return "expected " + a.property + ": " + want + ", got " + got;
              } else if constexpr (std::is_same_v<T, check::Ancestor>) {
                const auto anc = parse_selector(a.ancestor);
                bool found = false;
                for (NodeId up = page.tree.parent_element(id); up != kNoNode && !found; up = page.tree.parent_element(up)) {
                  found = matches(page.tree, up, anc);
                }
                if (!found) return "expected an ancestor matching " + a.ancestor + ", got none";
              }
            }
            return std::nullopt;
          }
        }
      },
      assertion);
}

}  // namespace detail

/// Evaluates a static task against an already-parsed page. Assertions run in
/// order; the first failure decides the outcome and its detail.
inline TaskOutcome evaluate_task_on_page(const Task& task, const Page& page, const DocumentSnapshot& snapshot) {
  TaskOutcome out{task.id, TaskStatus::Pass, "", snapshot.timestamp_ms, snapshot.content_hash};
  for (std::size_t k = 0; k < task.assertions.size(); ++k) {
    const auto& a = task.assertions[k];
    if (auto failure = detail::check_assertion(page, a)) {
      out.status = TaskStatus::Fail;
      out.detail = "assertion " + std::to_string(k) + ": " + std::string(kind_name(a)) + " on " +
                   subject_selector(a) + ": " + *failure;
      return out;
    }
  }
  return out;
}

inline TaskOutcome evaluate_task_static(const Task& task, const DocumentSnapshot& snapshot) {
  auto page = load_page(snapshot.files);
  if (!page) {
    return TaskOutcome{task.id, TaskStatus::Error, "snapshot has no HTML file", snapshot.timestamp_ms,
                       snapshot.content_hash};
  }
  return evaluate_task_on_page(task, *page, snapshot);
}

// ---------------------------------------------------------------------------
// Runner seam

enum class RunnerCapability { StaticOnly, Interactive };

class Runner {
 public:
  virtual ~Runner() = default;
  virtual RunnerCapability capability() const = 0;
  /// Deterministic for a fixed (task, snapshot).
  virtual TaskOutcome evaluate(const Task& task, const DocumentSnapshot& snapshot) = 0;
  /// Document after running the task's interaction, when the runner can produce one.
  virtual std::optional<FileMap> post_interaction(const Task&, const DocumentSnapshot&) { return std::nullopt; }
};

class StaticRunner : public Runner {
 public:
  RunnerCapability capability() const override { return RunnerCapability::StaticOnly; }
  TaskOutcome evaluate(const Task& task, const DocumentSnapshot& snapshot) override {
    if (task.requires_runtime()) {
      return TaskOutcome{task.id, TaskStatus::Unsupported,
                         "task has interaction steps; the static runner cannot execute them", snapshot.timestamp_ms,
                         snapshot.content_hash};
    }
    return evaluate_task_static(task, snapshot);
  }
};

// ---------------------------------------------------------------------------
// Memoization

/// (qualified task id, snapshot hash) -> outcome. Concurrent inserts of the
/// same key are harmless: both writers computed the same value.
class MemoCache {
 public:
  std::optional<TaskOutcome> find(const std::string& task_key, const std::string& hash) const {
    std::shared_lock lock(mu_);
    auto it = map_.find(task_key + '\n' + hash);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void insert(const std::string& task_key, const std::string& hash, const TaskOutcome& o) {
    std::unique_lock lock(mu_);
    map_.emplace(task_key + '\n' + hash, o);
  }
  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }
  void clear() {
    std::unique_lock lock(mu_);
    map_.clear();
  }

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, TaskOutcome> map_;
};

inline std::string task_key(const Checkpoint& c, const Task& t) { return c.id + "/" + t.id; }

struct CheckpointProgress {
  std::string checkpoint_id;
  double completion = 0.0;
  std::vector<TaskOutcome> outcomes;
  friend bool operator==(const CheckpointProgress&, const CheckpointProgress&) = default;
};

/// passed / total; unsupported and error count as not passed.
inline double completion_rate(const std::vector<TaskOutcome>& outcomes) {
  if (outcomes.empty()) return 0.0;
  const auto passed = std::count_if(outcomes.begin(), outcomes.end(),
                                    [](const TaskOutcome& o) { return o.status == TaskStatus::Pass; });
  return static_cast<double>(passed) / static_cast<double>(outcomes.size());
}

/// Evaluates every task against `snapshot`. Runner exceptions become
/// error outcomes for that task only. Memoized outcomes are restamped with
/// the snapshot's instant.
inline std::vector<CheckpointProgress> evaluate_snapshot(const DocumentSnapshot& snapshot,
                                                         const std::vector<Checkpoint>& checkpoints, Runner& runner,
                                                         MemoCache* memo) {
  std::vector<CheckpointProgress> out;
  out.reserve(checkpoints.size());
  for (const auto& c : checkpoints) {
    CheckpointProgress cp{c.id, 0.0, {}};
    for (const auto& t : c.tasks) {
      const auto key = task_key(c, t);
      std::optional<TaskOutcome> o = memo ? memo->find(key, snapshot.content_hash) : std::nullopt;
      if (!o) {
        try {
          o = runner.evaluate(t, snapshot);
        } catch (const std::exception& e) {
          o = TaskOutcome{t.id, TaskStatus::Error, std::string("runner failure: ") + e.what(), snapshot.timestamp_ms,
                          snapshot.content_hash};
        }
        o->task_id = t.id;
        o->snapshot_hash = snapshot.content_hash;
        if (memo && o->status != TaskStatus::Error) memo->insert(key, snapshot.content_hash, *o);
      }
      o->evaluated_at = snapshot.timestamp_ms;
      cp.outcomes.push_back(std::move(*o));
    }
    cp.completion = completion_rate(cp.outcomes);
    out.push_back(std::move(cp));
  }
  return out;
}

/// Outcomes for one student at `t`, reconstructing through `snapshots`
/// (or from scratch when null). Throws StreamCorrupt.
inline std::vector<CheckpointProgress> evaluate_student_at(const std::string& student_id, StudentEvents events,
                                                           TimestampMs t, const std::vector<Checkpoint>& checkpoints,
                                                           Runner& runner, SnapshotCache* snapshots, const FileMap& starter,
                                                           MemoCache* memo) {
  const auto snap = snapshots ? snapshots->reconstruct(student_id, events, t)
                              : reconstruct_at(student_id, events, t, starter);
  return evaluate_snapshot(snap, checkpoints, runner, memo);
}

// ---------------------------------------------------------------------------
// Progress matrix

struct StudentProgress {
  std::string student_id;
  std::string snapshot_hash;
  std::vector<CheckpointProgress> checkpoints;
  friend bool operator==(const StudentProgress&, const StudentProgress&) = default;
};

struct TickSlice {
  TimestampMs t_ms = 0;
  std::vector<StudentProgress> students;  // sorted by student_id
  friend bool operator==(const TickSlice&, const TickSlice&) = default;
};

struct ProgressMatrix {
  std::vector<TickSlice> ticks;
  std::vector<std::string> errors;
  friend bool operator==(const ProgressMatrix&, const ProgressMatrix&) = default;
};

inline nlohmann::json to_json(const CheckpointProgress& cp) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& o : cp.outcomes) tasks.push_back(to_json(o));
  return {{"checkpoint_id", cp.checkpoint_id}, {"completion", cp.completion}, {"tasks", tasks}};
}

inline nlohmann::json to_json(const TickSlice& s) {
  nlohmann::json students = nlohmann::json::array();
  for (const auto& sp : s.students) {
    nlohmann::json cps = nlohmann::json::array();
    for (const auto& cp : sp.checkpoints) cps.push_back(to_json(cp));
    students.push_back({{"student_id", sp.student_id}, {"snapshot_hash", sp.snapshot_hash}, {"checkpoints", cps}});
  }
  return {{"t_ms", s.t_ms}, {"students", students}};
}

inline nlohmann::json to_json(const ProgressMatrix& m) {
  nlohmann::json ticks = nlohmann::json::array();
  for (const auto& s : m.ticks) ticks.push_back(to_json(s));
  return {{"ticks", ticks}, {"errors", m.errors}};
}

struct MatrixOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  /// Off: every cell is reconstructed from scratch and every task re-run.
  bool use_cache = true;
  MemoCache* memo = nullptr;          // shared memo; an internal one is used when null
  SnapshotCache* snapshots = nullptr; // shared cache; an internal one is used when null
  /// Students present from the first tick on. Anyone else joins at the
  /// first tick at or after their first event.
  std::vector<std::string> roster;
};

namespace detail {

inline StudentProgress corrupt_cell(const std::string& student, const std::vector<Checkpoint>& checkpoints,
                                    TimestampMs t, const std::string& why) {
  StudentProgress sp{student, "", {}};
  for (const auto& c : checkpoints) {
    CheckpointProgress cp{c.id, 0.0, {}};
    for (const auto& task : c.tasks) cp.outcomes.push_back(TaskOutcome{task.id, TaskStatus::Error, why, t, ""});
    sp.checkpoints.push_back(std::move(cp));
  }
  return sp;
}

}  // namespace detail

/// Matrix over every (tick, student, checkpoint). Students are evaluated in
/// parallel; within a student, a tick whose snapshot hash is unchanged from
/// the previous tick reuses that tick's outcomes without calling the runner.
inline ProgressMatrix build_progress_matrix(const LogView& view, const std::vector<Checkpoint>& checkpoints,
                                            const std::vector<TimestampMs>& ticks, Runner& runner,
                                            const FileMap& starter, MatrixOptions options = {}) {
  for (std::size_t i = 1; i < ticks.size(); ++i) {
    if (ticks[i] <= ticks[i - 1]) throw std::invalid_argument("ticks must be strictly increasing");
  }
  ProgressMatrix m;
  const auto by_student = index_by_student(view);
  std::vector<std::string> students;
  for (const auto& [id, _] : by_student) students.push_back(id);
  for (const auto& id : options.roster) {
    if (!by_student.contains(id)) students.push_back(id);
  }
  std::sort(students.begin(), students.end());
  if (ticks.empty()) return m;
  if (students.empty()) {
    for (auto t : ticks) m.ticks.push_back(TickSlice{t, {}});
    return m;
  }

  MemoCache local_memo;
  MemoCache* memo = options.use_cache ? (options.memo ? options.memo : &local_memo) : nullptr;
  const TimestampMs interval = ticks.size() > 1 ? ticks[1] - ticks[0] : kMinuteMs;
  std::optional<SnapshotCache> local_snaps;
  SnapshotCache* snaps = nullptr;
  if (options.use_cache) {
    if (options.snapshots) {
      snaps = options.snapshots;
    } else {
      local_snaps.emplace(starter, ticks.front(), interval);
      snaps = &*local_snaps;
    }
  }

  // cells[student][tick]; empty where the student has not joined yet
  std::vector<std::vector<std::optional<StudentProgress>>> cells(students.size(),
                                                                 std::vector<std::optional<StudentProgress>>(ticks.size()));
  const std::set<std::string> roster(options.roster.begin(), options.roster.end());
  std::vector<std::string> errors(students.size());
  static const std::vector<EditEvent> kNoEvents;

  auto work = [&](std::size_t si) {
    const auto& sid = students[si];
    auto it = by_student.find(sid);
    const auto& events = it == by_student.end() ? kNoEvents : it->second;
    std::string prev_hash;
    const bool listed = roster.contains(sid);
    for (std::size_t ti = 0; ti < ticks.size(); ++ti) {
      const auto t = ticks[ti];
      if (!listed && (events.empty() || events.front().timestamp_ms > t)) continue;
      try {
        const auto snap = snaps ? snaps->reconstruct(sid, events, t) : reconstruct_at(sid, events, t, starter);
        if (options.use_cache && !prev_hash.empty() && snap.content_hash == prev_hash) {
          auto reused = *cells[si][ti - 1];
          for (auto& cp : reused.checkpoints) {
            for (auto& o : cp.outcomes) o.evaluated_at = t;
          }
          cells[si][ti] = std::move(reused);
        } else {
          cells[si][ti] = StudentProgress{sid, snap.content_hash, evaluate_snapshot(snap, checkpoints, runner, memo)};
        }
        prev_hash = snap.content_hash;
      } catch (const StreamCorrupt& e) {
        if (errors[si].empty()) errors[si] = e.what();
        cells[si][ti] = detail::corrupt_cell(sid, checkpoints, t, std::string("stream corrupt: ") + e.what());
        prev_hash.clear();
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(students.size()));
  if (threads <= 1) {
    for (std::size_t si = 0; si < students.size(); ++si) work(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) {
      pool.emplace_back([&] {
        for (std::size_t si; (si = next.fetch_add(1)) < students.size();) work(si);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t ti = 0; ti < ticks.size(); ++ti) {
    TickSlice slice{ticks[ti], {}};
    slice.students.reserve(students.size());
    for (std::size_t si = 0; si < students.size(); ++si) {
      if (cells[si][ti]) slice.students.push_back(std::move(*cells[si][ti]));
    }
    m.ticks.push_back(std::move(slice));
  }
  for (auto& e : errors) {
    if (!e.empty()) m.errors.push_back(std::move(e));
  }
  std::sort(m.errors.begin(), m.errors.end());
  return m;
}

// ---------------------------------------------------------------------------
// Classroom statistics

struct TaskStat {
  std::string checkpoint_id;
  std::string task_id;
  std::size_t passing = 0;
  friend bool operator==(const TaskStat&, const TaskStat&) = default;
};

struct CheckpointSummary {
  std::string checkpoint_id;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  friend bool operator==(const CheckpointSummary&, const CheckpointSummary&) = default;
};

struct ClassroomStats {
  TimestampMs t_ms = 0;
  std::size_t class_size = 0;
  std::vector<TaskStat> tasks;
  std::vector<CheckpointSummary> checkpoints;
  friend bool operator==(const ClassroomStats&, const ClassroomStats&) = default;
};

inline ClassroomStats classroom_stats(const TickSlice& slice, const std::vector<Checkpoint>& checkpoints) {
  ClassroomStats stats{slice.t_ms, slice.students.size(), {}, {}};
  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    const auto& c = checkpoints[ci];
    std::vector<double> rates;
    for (std::size_t ti = 0; ti < c.tasks.size(); ++ti) {
      TaskStat ts{c.id, c.tasks[ti].id, 0};
      for (const auto& sp : slice.students) {
        if (ci < sp.checkpoints.size() && ti < sp.checkpoints[ci].outcomes.size() &&
            sp.checkpoints[ci].outcomes[ti].status == TaskStatus::Pass) {
          ++ts.passing;
        }
      }
      stats.tasks.push_back(std::move(ts));
    }
    for (const auto& sp : slice.students) {
      if (ci < sp.checkpoints.size()) rates.push_back(sp.checkpoints[ci].completion);
    }
    CheckpointSummary sum{c.id, 0.0, 0.0, 0.0};
    if (!rates.empty()) {
      std::sort(rates.begin(), rates.end());
      sum.min = rates.front();
      sum.max = rates.back();
      const auto n = rates.size();
      sum.median = n % 2 ? rates[n / 2] : (rates[n / 2 - 1] + rates[n / 2]) / 2.0;
    }
    stats.checkpoints.push_back(std::move(sum));
  }
  return stats;
}

inline nlohmann::json to_json(const ClassroomStats& s) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : s.tasks) {
    tasks.push_back({{"checkpoint_id", t.checkpoint_id}, {"task_id", t.task_id}, {"passing", t.passing}});
  }
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& c : s.checkpoints) {
    cps.push_back({{"checkpoint_id", c.checkpoint_id}, {"min", c.min}, {"median", c.median}, {"max", c.max}});
  }
  return {{"t_ms", s.t_ms}, {"class_size", s.class_size}, {"tasks", tasks}, {"checkpoints", cps}};
}

}  // namespace spark
