#pragma once

// Class-wide element inspection: property value distributions and
// structural fingerprint clusters.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spark/cascade.hpp"
#include "spark/checkpoints.hpp"
#include "spark/digest.hpp"
#include "spark/evaluator.hpp"
#include "spark/page.hpp"

namespace spark {

inline constexpr std::string_view kNoMatch = "(no match)";
inline constexpr std::string_view kParseError = "(parse error)";
inline constexpr std::string_view kUnset = "(unset)";
inline constexpr std::string_view kErrorCluster = "(error)";

struct PropertyDistribution {
  std::string selector;
  std::string property;
  TimestampMs t_ms = 0;
  std::map<std::string, std::vector<std::string>> buckets;  // canonical value -> sorted student ids

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, ids] : buckets) n += ids.size();
    return n;
  }
  friend bool operator==(const PropertyDistribution&, const PropertyDistribution&) = default;
};

/// Buckets every student by the normalized value of `property` on the first
/// element matching `selector`. Throws SelectorError before touching any snapshot.
inline PropertyDistribution inspect_property(const std::vector<DocumentSnapshot>& snapshots, const std::string& selector,
                                             const std::string& property, TimestampMs t) {
  const auto list = parse_selector(selector);
  PropertyDistribution d{selector, property, t, {}};
  for (const auto& snap : snapshots) {
    std::string key;
    if (auto page = load_page(snap.files); !page) {
      key = kParseError;
    } else if (auto nodes = query(list, page->tree); nodes.empty()) {
      key = kNoMatch;
    } else {
      const auto style = computed_style(nodes.front(), page->sheets, page->tree);
      auto it = style.find(property);
      key = it == style.end() ? std::string(kUnset) : it->second.value;
    }
    d.buckets[key].push_back(snap.student_id);
  }
  for (auto& [_, ids] : d.buckets) std::sort(ids.begin(), ids.end());
  return d;
}

struct RenderFingerprint {
  std::string student_id;
  std::string selector;
  std::string serialization;
  std::string digest;
};

struct Cluster {
  std::string digest;
  std::string representative;
  std::vector<std::string> members;  // sorted
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterSet {
  std::string task_id;
  std::string selector;
  TimestampMs t_ms = 0;
  /// Set when the task needs interaction but documents were fingerprinted as written.
  bool pre_interaction = false;
  std::vector<Cluster> clusters;
  friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

/// Union of the properties named by Style assertions across a checkpoint.
inline std::set<std::string> graded_properties(const Checkpoint& checkpoint) {
  std::set<std::string> props;
  for (const auto& t : checkpoint.tasks) {
    for (const auto& a : t.assertions) {
      if (const auto* s = std::get_if<check::Style>(&a)) props.insert(s->property);
    }
  }
  return props;
}

inline RenderFingerprint fingerprint(const std::string& student_id, const FileMap& files, const SelectorList& selector,
                                     const std::string& selector_text, const std::set<std::string>& properties) {
  RenderFingerprint fp{student_id, selector_text, "", ""};
  auto page = load_page(files);
  if (!page) {
    fp.serialization = kParseError;
  } else if (auto nodes = query(selector, page->tree); nodes.empty()) {
    fp.serialization = kNoMatch;
  } else {
    fp.serialization = serialize_normalized(nodes.front(), StyleContext{page->tree, page->sheets, properties});
  }
  fp.digest = sha256_hex(fp.serialization);
  return fp;
}

/// Groups students by exact fingerprint digest. Clusters are ordered by
/// descending size, then digest.
inline std::vector<Cluster> cluster_fingerprints(const std::vector<RenderFingerprint>& fps) {
  std::map<std::string, Cluster> by_digest;
  for (const auto& fp : fps) {
    auto& c = by_digest[fp.digest];
    if (c.members.empty()) {
      c.digest = fp.digest;
      c.representative = fp.serialization;
    }
    c.members.push_back(fp.student_id);
  }
  std::vector<Cluster> out;
  for (auto& [_, c] : by_digest) {
    std::sort(c.members.begin(), c.members.end());
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Cluster& a, const Cluster& b) { return a.members.size() > b.members.size(); });
  return out;
}

/// Fingerprints the first element matching `selector` for every student.
/// An interactive runner supplies post-interaction documents for tasks that
/// need them; otherwise the written documents are used and the set is
/// flagged pre-interaction. Per-student failures land in the "(error)" cluster.
inline ClusterSet preview_clusters(const std::vector<DocumentSnapshot>& snapshots, const Checkpoint& checkpoint,
                                   const Task& task, const std::string& selector, TimestampMs t,
                                   Runner* runner = nullptr) {
  const auto list = parse_selector(selector);
  const auto props = graded_properties(checkpoint);
  ClusterSet set{task.id, selector, t, false, {}};
  const bool interactive = runner && runner->capability() == RunnerCapability::Interactive;
  std::vector<RenderFingerprint> fps;
  fps.reserve(snapshots.size());
  for (const auto& snap : snapshots) {
    try {
      std::optional<FileMap> files;
      if (task.requires_runtime() && interactive) files = runner->post_interaction(task, snap);
      if (task.requires_runtime() && !files) set.pre_interaction = true;
      fps.push_back(fingerprint(snap.student_id, files ? *files : snap.files, list, selector, props));
    } catch (const std::exception& e) {
      fps.push_back(RenderFingerprint{snap.student_id, selector, std::string(kErrorCluster),
                                      sha256_hex(std::string(kErrorCluster))});
    }
  }
  set.clusters = cluster_fingerprints(fps);
  return set;
}

/// Members of a bucket, ordered by student id. Throws KeyNotFound.
inline std::vector<std::string> students_matching(const PropertyDistribution& d, const std::string& key) {
  auto it = d.buckets.find(key);
  if (it == d.buckets.end()) throw KeyNotFound("no bucket '" + key + "' in distribution");
  return it->second;
}

/// Members of the cluster with digest `key`. Throws KeyNotFound.
inline std::vector<std::string> students_matching(const ClusterSet& s, const std::string& key) {
  for (const auto& c : s.clusters) {
    if (c.digest == key) return c.members;
  }
  throw KeyNotFound("no cluster '" + key + "'");
}

inline nlohmann::json to_json(const PropertyDistribution& d) {
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& [k, ids] : d.buckets) buckets[k] = ids;
  return {{"selector", d.selector}, {"property", d.property}, {"t_ms", d.t_ms}, {"buckets", buckets}};
}

inline nlohmann::json to_json(const ClusterSet& s) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : s.clusters) {
    clusters.push_back({{"digest", c.digest}, {"representative", c.representative}, {"members", c.members}});
  }
  return {{"task_id", s.task_id},
          {"selector", s.selector},
          {"t_ms", s.t_ms},
          {"pre_interaction", s.pre_interaction},
          {"clusters", clusters}};
}

}  // namespace spark
