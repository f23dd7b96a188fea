#include <gtest/gtest.h>

#include "spark/simulate.hpp"
#include "support/fixtures.hpp"

using namespace spark;

TEST(Simulate, ExactEventCountAndValidStreams) {
  const auto a = fixture::assets("todo");
  SimulationOptions opt;
  opt.students = 5;
  opt.events_per_student = 810;
  const auto events = simulate_class(a.starter, a.reference, fixture::mutations("todo"), opt);
  ASSERT_EQ(events.size(), 5u * 810u);
  StreamState st;
  std::map<std::string, std::size_t> per;
  for (const auto& e : events) {
    EXPECT_NO_THROW(validate_event(e, st));
    st.commit(e);
    ++per[e.student_id];
    EXPECT_GE(e.timestamp_ms, opt.start_ms);
    EXPECT_LE(e.timestamp_ms, opt.start_ms + opt.duration_ms);
  }
  for (const auto& [_, n] : per) EXPECT_EQ(n, 810u);
}

TEST(Simulate, EndsOnTheReferenceWithoutMutations) {
  const auto a = fixture::assets("carousel");
  SimulationOptions opt;
  opt.students = 3;
  opt.events_per_student = 500;
  EventLog log;
  for (const auto& e : simulate_class(a.starter, a.reference, {}, opt)) log.append(e);
  for (const auto& [id, events] : index_by_student(log.view())) {
    const auto snap = reconstruct_at(id, events, opt.start_ms + opt.duration_ms, a.starter);
    for (const auto& [path, text] : a.reference) EXPECT_EQ(snap.files.at(path), text) << id << " " << path;
  }
}

TEST(Simulate, DeterministicInSeed) {
  const auto a = fixture::assets("todo");
  SimulationOptions opt;
  opt.students = 3;
  opt.events_per_student = 200;
  const auto m = fixture::mutations("todo");
  EXPECT_EQ(simulate_class(a.starter, a.reference, m, opt), simulate_class(a.starter, a.reference, m, opt));
  auto other = opt;
  other.seed = 2;
  EXPECT_NE(simulate_class(a.starter, a.reference, m, opt), simulate_class(a.starter, a.reference, m, other));
}

TEST(Simulate, RejectsImpossibleBudgets) {
  const auto a = fixture::assets("todo");
  SimulationOptions opt;
  opt.events_per_student = 1;
  EXPECT_THROW(simulate_class(a.starter, a.reference, {}, opt), std::invalid_argument);
}

TEST(Mutations, ApplyAndFailLoudly) {
  const FileMap files{{"a.css", "p { color: red }"}};
  EXPECT_EQ(apply_mutation(files, {"m", "a.css", "red", "blue", ""}).at("a.css"), "p { color: blue }");
  EXPECT_THROW(apply_mutation(files, {"m", "b.css", "red", "blue", ""}), Error);
  EXPECT_THROW(apply_mutation(files, {"m", "a.css", "green", "blue", ""}), Error);
  EXPECT_GE(fixture::mutations("todo").size(), 10u);
  EXPECT_GE(fixture::mutations("carousel").size(), 10u);
}
