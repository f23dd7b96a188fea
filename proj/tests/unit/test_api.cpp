#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "spark/api_service.hpp"
#include "support/fixtures.hpp"

using namespace spark;
using fixture::ev;
using nlohmann::json;

namespace {

class Api : public ::testing::Test {
 protected:
  void start(ApiOptions opt = {}) {
    opt.token = "secret";
    session = std::make_shared<Session>(fixture::config("todo"), fixture::assets("todo"));
    server = std::make_unique<ApiServer>(session, opt);
    port = server->start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_default_headers({{"X-Spark-Token", "secret"}});
    client->set_read_timeout(std::chrono::seconds(60));
  }

  json post(const std::string& path, const json& body, int want = 200) {
    auto r = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(r);
    if (!r) return {};
    EXPECT_EQ(r->status, want) << path << " " << r->body;
    return json::parse(r->body);
  }

  json get(const std::string& path, int want = 200) {
    auto r = client->Get(path);
    EXPECT_TRUE(r);
    if (!r) return {};
    EXPECT_EQ(r->status, want) << path << " " << r->body;
    return json::parse(r->body);
  }

  void send_log(const EventLog& log) {
    const auto v = log.view();
    for (std::size_t i = 0; i < v.size(); i += 100) {
      json batch = json::array();
      for (std::size_t k = i; k < std::min(v.size(), i + 100); ++k) batch.push_back(to_json(v[k]));
      for (const auto& verdict : post("/events", batch)["verdicts"]) ASSERT_TRUE(verdict["accepted"].get<bool>()) << verdict;
    }
  }

  static EventLog small_class() {
    SimulationOptions opt;
    opt.students = 4;
    opt.events_per_student = 120;
    opt.duration_ms = 3 * kMinuteMs;
    return fixture::class_log("todo", opt);
  }

  std::shared_ptr<Session> session;
  std::unique_ptr<ApiServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

}  // namespace

TEST_F(Api, TokenGuardsDashboardButNotIngest) {
  start();
  httplib::Client anon("127.0.0.1", port);
  EXPECT_EQ(anon.Get("/progress")->status, 401);
  EXPECT_EQ(anon.Post("/checkpoints/verify", "{}", "application/json")->status, 401);
  auto r = anon.Post("/events", json::array({to_json(ev("a", "index.html", 0, 0, "x", 1, 1))}).dump(), "application/json");
  EXPECT_EQ(r->status, 200);
}

TEST_F(Api, EventVerdictsAndMalformedBodies) {
  start();
  const auto v = post("/events", json::array({to_json(ev("a", "index.html", 0, 0, "x", 1, 1)),
                                              to_json(ev("a", "index.html", 0, 0, "x", 2, 1))}))["verdicts"];
  EXPECT_EQ(v[0], json({{"accepted", true}}));
  EXPECT_EQ(v[1]["error"], "RejectSeq");
  EXPECT_EQ(client->Post("/events", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client->Post("/events", R"([{"student_id": 1}])", "application/json")->status, 400);
}

TEST_F(Api, ProgressStatsAndInspectMatchInProcess) {
  start();
  send_log(small_class());
  const auto ticks = session->published_ticks();
  ASSERT_GE(ticks.size(), 2u);
  for (auto t : ticks) {
    const auto slice = session->slice_at(t);
    EXPECT_EQ(get("/progress?t=" + std::to_string(t)), to_json(*slice));
    EXPECT_EQ(get("/stats?t=" + std::to_string(t)), to_json(classroom_stats(*slice, session->assets().checkpoints)));
  }
  EXPECT_EQ(get("/progress"), to_json(session->evaluate_at(*session->last_event_ms())));
  get("/progress?t=5", 404);
  get("/progress?t=abc", 400);

  const auto t = ticks.back();
  const auto snaps = session->class_snapshots(t);
  EXPECT_EQ(post("/inspect", {{"task_id", "structure/title-style"}, {"selector", "#pageTitle"}, {"property", "font-size"}, {"t_ms", t}}),
            to_json(inspect_property(snaps, "#pageTitle", "font-size", t)));
  const auto ref = find_task(session->assets().checkpoints, "structure/title-style");
  EXPECT_EQ(post("/inspect", {{"task_id", "structure/title-style"}, {"selector", "#pageTitle"}, {"t_ms", t}}),
            to_json(preview_clusters(snaps, *ref->checkpoint, *ref->task, "#pageTitle", t, &session->runner())));
  post("/inspect", {{"task_id", "structure/title-style"}, {"selector", "div >> p"}}, 400);
  post("/inspect", {{"task_id", "nope/nope"}, {"selector", "p"}}, 404);
  post("/inspect", {{"selector", "p"}}, 400);
}

TEST_F(Api, StudentSnapshot) {
  start();
  post("/events", json::array({to_json(ev("a", "index.html", 0, 0, "<p>hi</p>", 10, 1)),
                               to_json(ev("a", "styles.css", 0, 0, "p{}", 20, 2))}));
  auto s = get("/students/a/snapshot?t=15");
  EXPECT_EQ(s["active_file"]["file_path"], "index.html");
  EXPECT_EQ(s["files"]["index.html"].get<std::string>().rfind("<p>hi</p>", 0), 0u);
  s = get("/students/a/snapshot");
  EXPECT_EQ(s["active_file"]["file_path"], "styles.css");
  get("/students/zz/snapshot", 404);
}

TEST_F(Api, VerifyAndSuggest) {
  start();
  EXPECT_EQ(post("/checkpoints/verify", json::object()), to_json(session->verify(std::nullopt)));
  EXPECT_EQ(post("/checkpoints/verify", {{"checkpoint_id", "add"}}), to_json(session->verify(std::string("add"))));
  post("/checkpoints/verify", {{"checkpoint_id", "nope"}}, 404);
  post("/checkpoints/verify", {{"checkpoint_id", 3}}, 400);

  const auto s = post("/checkpoints/suggest", {{"description", "Set the font size of #pageTitle to 25px"}});
  EXPECT_EQ(s["provider"], "heuristic");
  EXPECT_FALSE(s["assertions"].empty());
  post("/checkpoints/suggest", json::object(), 400);
}

TEST_F(Api, RateLimitRejectsBursts) {
  ApiOptions opt;
  opt.ingest_rate_per_student = 0.001;
  opt.ingest_burst_per_student = 5;
  start(opt);
  json batch = json::array();
  for (int i = 1; i <= 8; ++i) batch.push_back(to_json(ev("a", "index.html", 0, 0, "x", i, i)));
  batch.push_back(to_json(ev("b", "index.html", 0, 0, "x", 9, 1)));
  const auto v = post("/events", batch)["verdicts"];
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(v[i]["accepted"].get<bool>());
  for (int i = 5; i < 8; ++i) EXPECT_EQ(v[i]["error"], "RejectRate");
  EXPECT_TRUE(v[8]["accepted"].get<bool>());
  EXPECT_EQ(session->view().size(), 6u);
}

TEST_F(Api, UpdatesStreamEditsTicksAndHeartbeats) {
  ApiOptions opt;
  opt.heartbeat = std::chrono::milliseconds(200);
  start(opt);
  std::vector<json> lines;
  std::atomic<bool> subscribed{false};
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port);
    c.set_default_headers({{"X-Spark-Token", "secret"}});
    std::string buf;
    c.Get("/updates", [&](const char* data, size_t n) {
      subscribed = true;
      buf.append(data, n);
      for (auto nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n')) {
        lines.push_back(json::parse(buf.substr(0, nl)));
        buf.erase(0, nl + 1);
      }
      bool tick = false, hb = false;
      for (const auto& l : lines) {
        tick |= l["type"] == "TickReady" && !l.contains("heartbeat");
        hb |= l.contains("heartbeat");
      }
      return !(tick && hb);
    });
  });
  while (!subscribed) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  post("/events", json::array({to_json(ev("a", "index.html", 0, 0, "x", 1000, 1)),
                               to_json(ev("a", "index.html", 0, 0, "y", 70'000, 2))}));
  reader.join();
  std::size_t edited = 0;
  for (const auto& l : lines) edited += l["type"] == "StudentEdited";
  EXPECT_EQ(edited, 2u);
  bool saw_tick = false;
  for (const auto& l : lines) {
    if (l["type"] == "TickReady" && !l.contains("heartbeat")) {
      saw_tick = true;
      EXPECT_EQ(l["t_ms"], 1000);
      EXPECT_EQ(l["slice_hash"], slice_hash(*session->slice_at(1000)));
    }
  }
  EXPECT_TRUE(saw_tick);
}

TEST_F(Api, ReplayEndpointMatchesBatchAndBlocksIngest) {
  start();
  const auto log = small_class();
  const auto path = std::filesystem::temp_directory_path() / "spark_api_replay.evlog";
  persist_file(log, path.string());
  post("/replay", {{"log_path", path.string()}, {"speed", "fast"}}, 400);
  post("/replay", {{"log_path", "/nonexistent.evlog"}}, 400);
  EXPECT_EQ(post("/replay", {{"log_path", path.string()}}, 202)["total"], log.size());
  server->wait_for_replay();
  const auto st = get("/replay/status");
  EXPECT_TRUE(st["done"].get<bool>());
  EXPECT_EQ(st["events_delivered"], log.size());
  post("/events", json::array({to_json(ev("a", "index.html", 0, 0, "x", 1, 1))}), 409);

  const auto a = fixture::assets("todo");
  StaticRunner runner;
  const auto batch = build_progress_matrix(log.view(), a.checkpoints, minute_ticks(*bounds_of(log.view())), runner, a.starter);
  for (const auto& slice : batch.ticks) EXPECT_EQ(get("/progress?t=" + std::to_string(slice.t_ms)), to_json(slice));
  std::filesystem::remove(path);
}
