#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spark/evaluator.hpp"

namespace spark {

struct VerifiedTask {
  std::string checkpoint_id;
  std::string task_id;
  TaskStatus outcome = TaskStatus::Fail;
  std::string detail;
  friend bool operator==(const VerifiedTask&, const VerifiedTask&) = default;
};

struct VerificationReport {
  std::vector<VerifiedTask> tasks;
  bool overall_pass = false;  // every task passed

  /// Non-strict acceptance tolerates unsupported tasks but no fail or error.
  bool accepted(bool strict) const {
    if (strict) return overall_pass;
    return std::all_of(tasks.begin(), tasks.end(), [](const VerifiedTask& t) {
      return t.outcome == TaskStatus::Pass || t.outcome == TaskStatus::Unsupported;
    });
  }
  friend bool operator==(const VerificationReport&, const VerificationReport&) = default;
};

inline DocumentSnapshot reference_snapshot(const FileMap& files) { return make_snapshot("reference", files, 0); }

/// Grades the reference exactly as a student snapshot would be graded.
inline VerificationReport verify_checkpoints(const std::vector<Checkpoint>& checkpoints,
                                             const DocumentSnapshot& reference, Runner& runner) {
  VerificationReport report;
  const auto graded = evaluate_snapshot(reference, checkpoints, runner, nullptr);
  for (const auto& cp : graded) {
    for (const auto& o : cp.outcomes) report.tasks.push_back(VerifiedTask{cp.checkpoint_id, o.task_id, o.status, o.detail});
  }
  report.overall_pass = std::all_of(report.tasks.begin(), report.tasks.end(),
                                    [](const VerifiedTask& t) { return t.outcome == TaskStatus::Pass; });
  return report;
}

inline VerificationReport verify_checkpoint(const Checkpoint& checkpoint, const DocumentSnapshot& reference,
                                            Runner& runner) {
  return verify_checkpoints({checkpoint}, reference, runner);
}

inline nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : r.tasks) {
    tasks.push_back({{"checkpoint_id", t.checkpoint_id},
                     {"task_id", t.task_id},
                     {"outcome", status_name(t.outcome)},
                     {"detail", t.detail}});
  }
  return {{"tasks", tasks}, {"overall_pass", r.overall_pass}};
}

inline std::string render_text(const VerificationReport& r) {
  std::string out;
  for (const auto& t : r.tasks) {
    out += std::string(status_name(t.outcome)) + "\t" + t.checkpoint_id + "/" + t.task_id;
    if (!t.detail.empty()) out += "\t" + t.detail;
    out += "\n";
  }
  std::size_t n[4] = {0, 0, 0, 0};
  for (const auto& t : r.tasks) ++n[static_cast<int>(t.outcome)];
  out += std::to_string(n[0]) + " pass, " + std::to_string(n[1]) + " fail, " + std::to_string(n[2]) + " unsupported, " +
         std::to_string(n[3]) + " error\n";
  if (r.overall_pass) {
    out += "overall: pass\n";
  } else if (r.accepted(false)) {
    out += "overall: incomplete (unsupported tasks need an interactive runner)\n";
  } else {
    out += "overall: fail\n";
  }
  return out;
}

}  // namespace spark
