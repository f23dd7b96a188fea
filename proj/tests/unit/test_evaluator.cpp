#include <gtest/gtest.h>

#include <atomic>

#include "spark/evaluator.hpp"
#include "spark/verify.hpp"
#include "support/fixtures.hpp"

using namespace spark;
using fixture::ev;

namespace {

Task task_of(const std::string& assertions_json) {
  return parse_task_json(nlohmann::json::parse(R"({"id": "t", "assertions": )" + assertions_json + "}"));
}

TaskOutcome grade(const std::string& assertions_json, const FileMap& files) {
  return evaluate_task_static(task_of(assertions_json), make_snapshot("s", files, 0));
}

const FileMap kPage{{"index.html", R"(<link rel="stylesheet" href="styles.css">
<h1 id="pageTitle">Todo  List</h1>
<div id="inputContainer"><input type="text" id="input"><button id="addBtn">Add</button></div>
<ul id="todoList"><li class="todoItem">a</li><li class="todoItem">b</li></ul>)"},
                    {"styles.css", "#pageTitle { font-size: 25.0px; font-weight: bold }\n"
                                   ".todoItem { width: 350px }\n.deleteBtn:hover { background-color: darkred }"}};

/// Counts calls and answers pass for everything.
class CountingRunner : public Runner {
 public:
  RunnerCapability capability() const override { return RunnerCapability::StaticOnly; }
  TaskOutcome evaluate(const Task& task, const DocumentSnapshot& snap) override {
    ++calls;
    return StaticRunner{}.evaluate(task, snap);
  }
  std::atomic<int> calls{0};
};

}  // namespace

TEST(Assertions, EachKind) {
  EXPECT_EQ(grade(R"([{"kind": "exists", "selector": "#todoList"}])", kPage).status, TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "exists", "selector": "li", "min_count": 3}])", kPage).status, TaskStatus::Fail);
  EXPECT_EQ(grade(R"([{"kind": "count", "selector": "li", "comparator": "=", "n": 2}])", kPage).status, TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "count", "selector": "li", "comparator": "<=", "n": 1}])", kPage).status, TaskStatus::Fail);
  EXPECT_EQ(grade(R"([{"kind": "attribute", "selector": "#input", "attribute": "type", "expected": "text"}])", kPage).status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "text", "selector": "#pageTitle", "expected": "Todo List"}])", kPage).status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "text", "selector": "#addBtn", "expected": "dd", "mode": "contains"}])", kPage).status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "style", "selector": "#pageTitle", "property": "font-size", "expected": "25px"}])", kPage)
                .status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "style", "selector": "#pageTitle", "property": "font-weight", "expected": "700"}])", kPage)
                .status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "rule_declared", "selector": ".deleteBtn:hover", "property": "background-color", "expected": "#8b0000"}])",
                  kPage)
                .status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "ancestor", "selector": "#addBtn", "ancestor": "#inputContainer"}])", kPage).status,
            TaskStatus::Pass);
  EXPECT_EQ(grade(R"([{"kind": "ancestor", "selector": "#pageTitle", "ancestor": "#inputContainer"}])", kPage).status,
            TaskStatus::Fail);
}

TEST(Assertions, FailureDetailNamesTheAssertion) {
  const auto o = grade(R"([{"kind": "exists", "selector": "p"}, {"kind": "style", "selector": "#pageTitle", "property": "color", "expected": "red"}])",
                       kPage);
  EXPECT_EQ(o.status, TaskStatus::Fail);
  EXPECT_NE(o.detail.find("assertion 0"), std::string::npos);
  EXPECT_NE(o.detail.find("no elements matched"), std::string::npos);
  const auto u = grade(R"([{"kind": "style", "selector": "#pageTitle", "property": "color", "expected": "red"}])", kPage);
  EXPECT_NE(u.detail.find("(unset)"), std::string::npos);
}

TEST(Assertions, NoHtmlIsAnError) {
  const auto o = grade(R"([{"kind": "exists", "selector": "p"}])", FileMap{{"styles.css", ""}});
  EXPECT_EQ(o.status, TaskStatus::Error);
}

TEST(Runner, StaticRunnerMarksInteractionUnsupported) {
  const auto t = parse_task_json(nlohmann::json::parse(
      R"({"id": "t", "interaction": [{"kind": "click", "selector": "#addBtn"}], "assertions": [{"kind": "exists", "selector": "li"}]})"));
  StaticRunner r;
  EXPECT_EQ(r.evaluate(t, make_snapshot("s", kPage, 0)).status, TaskStatus::Unsupported);
}

TEST(Outcome, JsonRoundTripIsStrict) {
  const TaskOutcome o{"t", TaskStatus::Fail, "why", 5, "abc"};
  EXPECT_EQ(outcome_from_json(to_json(o)), o);
  auto j = to_json(o);
  j["status"] = "maybe";
  EXPECT_THROW(outcome_from_json(j), std::invalid_argument);
}

TEST(Evaluate, MemoSkipsRepeatedWork) {
  const auto cps = fixture::assets("todo").checkpoints;
  CountingRunner runner;
  MemoCache memo;
  const auto snap = make_snapshot("s", kPage, 10);
  const auto first = evaluate_snapshot(snap, cps, runner, &memo);
  const int calls = runner.calls;
  auto later = snap;
  later.timestamp_ms = 20;
  const auto second = evaluate_snapshot(later, cps, runner, &memo);
  EXPECT_EQ(runner.calls, calls);
  EXPECT_EQ(second[0].outcomes[0].evaluated_at, 20);
  EXPECT_EQ(second[0].completion, first[0].completion);
}

TEST(Matrix, RosterAndJoinSemantics) {
  const auto a = fixture::assets("todo");
  EventLog log;
  log.append(ev("early", "index.html", 0, 0, "x", 0, 1));
  log.append(ev("late", "index.html", 0, 0, "x", 90'000, 1));
  StaticRunner runner;
  MatrixOptions opt;
  opt.roster = {"early", "absent"};
  const auto m = build_progress_matrix(log.view(), a.checkpoints, {0, 60'000, 120'000}, runner, a.starter, opt);
  ASSERT_EQ(m.ticks.size(), 3u);
  auto ids = [](const TickSlice& s) {
    std::vector<std::string> out;
    for (const auto& sp : s.students) out.push_back(sp.student_id);
    return out;
  };
  EXPECT_EQ(ids(m.ticks[0]), (std::vector<std::string>{"absent", "early"}));
  EXPECT_EQ(ids(m.ticks[2]), (std::vector<std::string>{"absent", "early", "late"}));
  EXPECT_EQ(m.ticks[0].students[0].snapshot_hash, content_hash(a.starter));
}

TEST(Matrix, CorruptStreamBecomesErrorCells) {
  const auto a = fixture::assets("todo");
  EventLog log;
  log.append(ev("ok", "index.html", 0, 0, "x", 0, 1));
  log.append(ev("bad", "index.html", 9999, 0, "x", 0, 1));
  StaticRunner runner;
  const auto m = build_progress_matrix(log.view(), a.checkpoints, {0}, runner, a.starter);
  ASSERT_EQ(m.errors.size(), 1u);
  const auto& bad = m.ticks[0].students[0];
  EXPECT_EQ(bad.student_id, "bad");
  EXPECT_EQ(bad.checkpoints[0].outcomes[0].status, TaskStatus::Error);
}

TEST(Matrix, CachedEqualsUncachedAndReusesUnchangedTicks) {
  spark::SimulationOptions opt;
  opt.students = 4;
  opt.events_per_student = 120;
  opt.duration_ms = 5 * kMinuteMs;
  const auto a = fixture::assets("todo");
  const auto log = fixture::class_log("todo", opt);
  auto ticks = minute_ticks(*bounds_of(log.view()));
  ticks.push_back(ticks.back() + kMinuteMs);  // nothing changes after the last event
  CountingRunner cached_runner, plain_runner;
  MatrixOptions cached, plain;
  plain.use_cache = false;
  const auto m1 = build_progress_matrix(log.view(), a.checkpoints, ticks, cached_runner, a.starter, cached);
  const auto m2 = build_progress_matrix(log.view(), a.checkpoints, ticks, plain_runner, a.starter, plain);
  EXPECT_EQ(m1, m2);
  EXPECT_LT(cached_runner.calls, plain_runner.calls);
}

TEST(Stats, MatchesHandTally) {
  spark::SimulationOptions opt;
  opt.students = 6;
  opt.events_per_student = 150;
  opt.duration_ms = 4 * kMinuteMs;
  const auto a = fixture::assets("todo");
  const auto log = fixture::class_log("todo", opt);
  StaticRunner runner;
  const auto m = build_progress_matrix(log.view(), a.checkpoints, minute_ticks(*bounds_of(log.view())), runner, a.starter);
  for (const auto& slice : m.ticks) {
    const auto stats = classroom_stats(slice, a.checkpoints);
    EXPECT_EQ(stats.class_size, 6u);
    std::size_t k = 0;
    for (std::size_t ci = 0; ci < a.checkpoints.size(); ++ci) {
      std::vector<double> rates;
      for (std::size_t ti = 0; ti < a.checkpoints[ci].tasks.size(); ++ti, ++k) {
        std::size_t pass = 0;
        for (const auto& sp : slice.students) pass += sp.checkpoints[ci].outcomes[ti].status == TaskStatus::Pass;
        EXPECT_EQ(stats.tasks[k].passing, pass);
      }
      for (const auto& sp : slice.students) {
        std::size_t pass = 0;
        for (const auto& o : sp.checkpoints[ci].outcomes) pass += o.status == TaskStatus::Pass;
        rates.push_back(static_cast<double>(pass) / static_cast<double>(sp.checkpoints[ci].outcomes.size()));
      }
      std::sort(rates.begin(), rates.end());
      EXPECT_DOUBLE_EQ(stats.checkpoints[ci].min, rates.front());
      EXPECT_DOUBLE_EQ(stats.checkpoints[ci].max, rates.back());
      EXPECT_DOUBLE_EQ(stats.checkpoints[ci].median, (rates[2] + rates[3]) / 2);
    }
  }
}

TEST(Verify, ReferencePassesStaticTasks) {
  for (const char* name : {"todo", "carousel"}) {
    const auto a = fixture::assets(name);
    StaticRunner runner;
    const auto report = verify_checkpoints(a.checkpoints, reference_snapshot(a.reference), runner);
    EXPECT_TRUE(report.accepted(false)) << render_text(report);
    EXPECT_FALSE(report.accepted(true));
    for (const auto& t : report.tasks) EXPECT_NE(t.outcome, TaskStatus::Fail) << t.task_id << ": " << t.detail;
  }
}
