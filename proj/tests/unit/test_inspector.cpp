#include <gtest/gtest.h>

#include "spark/inspector.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace spark;

namespace {

std::vector<DocumentSnapshot> class_at(const std::string& name, std::uint64_t seed, TimestampMs t) {
  SimulationOptions opt;
  opt.students = 12;
  opt.events_per_student = 150;
  opt.seed = seed;
  opt.duration_ms = 3 * kMinuteMs;
  const auto a = fixture::assets(name);
  const auto log = fixture::class_log(name, opt);
  std::vector<DocumentSnapshot> out;
  for (const auto& [id, events] : index_by_student(log.view())) {
    out.push_back(reconstruct_at(id, events, opt.start_ms + t, a.starter));
  }
  return out;
}

std::set<std::string> roster(const std::vector<DocumentSnapshot>& snaps) {
  std::set<std::string> out;
  for (const auto& s : snaps) out.insert(s.student_id);
  return out;
}

}  // namespace

TEST(Inspect, BucketsByNormalizedValue) {
  std::vector<DocumentSnapshot> snaps = {
      make_snapshot("a", {{"index.html", "<style>#t{font-size:25px}</style><h1 id=t>x</h1>"}}, 0),
      make_snapshot("b", {{"index.html", "<style>#t{font-size:25.0PX}</style><h1 id=t>x</h1>"}}, 0),
      make_snapshot("c", {{"index.html", "<h1 id=t>x</h1>"}}, 0),
      make_snapshot("d", {{"index.html", "<p>x</p>"}}, 0),
      make_snapshot("e", {{"styles.css", "p{}"}}, 0),
  };
  const auto d = inspect_property(snaps, "#t", "font-size", 0);
  EXPECT_EQ(d.total(), 5u);
  EXPECT_EQ(students_matching(d, "25px"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(students_matching(d, std::string(kUnset)), std::vector<std::string>{"c"});
  EXPECT_EQ(students_matching(d, std::string(kNoMatch)), std::vector<std::string>{"d"});
  EXPECT_EQ(students_matching(d, std::string(kParseError)), std::vector<std::string>{"e"});
  EXPECT_THROW(students_matching(d, "24px"), KeyNotFound);
  EXPECT_THROW(inspect_property(snaps, "div >> p", "width", 0), SelectorError);
}

TEST(Inspect, DistributionsPartitionTheClass) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto snaps = class_at("todo", seed, 2 * kMinuteMs);
    for (const auto& [sel, prop] : std::vector<std::pair<std::string, std::string>>{
             {"#pageTitle", "font-size"}, {".todoItem", "width"}, {".deleteBtn", "background-color"}}) {
      const auto d = inspect_property(snaps, sel, prop, 0);
      std::vector<std::vector<std::string>> parts;
      for (const auto& [_, ids] : d.buckets) parts.push_back(ids);
      EXPECT_TRUE(oracle::partitions(parts, roster(snaps), snaps.size()));
    }
  }
}

TEST(Clusters, EqualPairwiseOracle) {
  const auto a = fixture::assets("todo");
  const auto& cp = a.checkpoints[0];
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto snaps = class_at("todo", seed, 3 * kMinuteMs);
    for (const char* sel : {"#pageTitle", "#inputContainer", "body"}) {
      const auto set = preview_clusters(snaps, cp, cp.tasks[1], sel, 0);
      std::vector<std::vector<std::string>> parts;
      for (const auto& c : set.clusters) parts.push_back(c.members);
      EXPECT_TRUE(oracle::partitions(parts, roster(snaps), snaps.size()));
      for (std::size_t i = 1; i < set.clusters.size(); ++i) {
        EXPECT_GE(set.clusters[i - 1].members.size(), set.clusters[i].members.size());
      }

      std::vector<std::pair<std::string, std::string>> items;
      const auto list = parse_selector(sel);
      for (const auto& s : snaps) {
        items.emplace_back(s.student_id, fingerprint(s.student_id, s.files, list, sel, graded_properties(cp)).serialization);
      }
      std::vector<std::set<std::string>> got;
      for (const auto& c : set.clusters) got.emplace_back(c.members.begin(), c.members.end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, oracle::pairwise_groups(items));
    }
  }
}

TEST(Clusters, InteractiveTasksAreFlaggedWithoutARunner) {
  const auto a = fixture::assets("todo");
  const auto ref = find_task(a.checkpoints, "add/add-item");
  ASSERT_TRUE(ref);
  std::vector<DocumentSnapshot> snaps = {make_snapshot("a", a.reference, 0), make_snapshot("b", a.reference, 0)};
  const auto set = preview_clusters(snaps, *ref->checkpoint, *ref->task, "#todoList", 0);
  EXPECT_TRUE(set.pre_interaction);
  ASSERT_EQ(set.clusters.size(), 1u);
  EXPECT_EQ(students_matching(set, set.clusters[0].digest), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(students_matching(set, "nope"), KeyNotFound);
}

TEST(Clusters, GradedPropertiesComeFromStyleAssertions) {
  const auto a = fixture::assets("todo");
  const auto props = graded_properties(a.checkpoints[0]);
  EXPECT_TRUE(props.count("font-size"));
  EXPECT_TRUE(props.count("font-weight"));
}
