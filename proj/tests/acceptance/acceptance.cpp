// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Thresholds and case counts are fixed here; every check compares the engine
// against an independent oracle or against another path through the engine.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "spark/api_service.hpp"
#include "spark/inspector.hpp"
#include "spark/session.hpp"
#include "spark/simulate.hpp"
#include "spark/verify.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace spark;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kEditSequences = 10'000;
constexpr std::size_t kMaxSequenceLength = 200;
constexpr double kEditBudgetSeconds = 10.0;
constexpr int kDeterminismLogs = 50;
constexpr std::size_t kMinMutations = 10;
constexpr int kCascadeCases = 1'000;
constexpr std::size_t kPerfStudents = 22;
constexpr std::size_t kPerfEvents = 810;
constexpr std::size_t kPerfTicks = 21;
constexpr double kPerfBudgetSeconds = 30.0;
constexpr int kPartitionClasses = 20;

struct Result {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt_seconds(double s) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << s << " s";
  return o.str();
}

// 1. apply_edit fold vs the naive code-point splice.
Result edit_oracle() {
  Result r;
  oracle::Rng rng(20'240'001);
  std::size_t edits = 0;
  const auto start = Clock::now();
  for (int seq = 0; seq < kEditSequences && r.ok; ++seq) {
    std::string text = oracle::random_text(rng, 40), expect = text;
    const std::size_t len = 1 + oracle::pick(rng, kMaxSequenceLength);
    for (std::size_t i = 0; i < len; ++i) {
      const auto e = oracle::random_edit(rng, expect);
      expect = oracle::naive_splice(expect, e.offset, e.del, e.ins);
      text = apply_edit(text, e.offset, e.del, e.ins);
      ++edits;
    }
    if (text != expect) r.fail("sequence " + std::to_string(seq) + " diverged");
  }
  const double s = seconds_since(start);
  if (r.ok && s >= kEditBudgetSeconds) r.fail("took " + fmt_seconds(s));
  if (r.ok) r.detail = std::to_string(kEditSequences) + " sequences, " + std::to_string(edits) + " edits, " + fmt_seconds(s);
  return r;
}

// 2. Cached vs uncached reconstruction, and live vs replay matrices.
Result determinism() {
  Result r;
  const auto a = fixture::assets("todo");
  std::size_t hashes = 0, late = 0;
  for (int seed = 1; seed <= kDeterminismLogs && r.ok; ++seed) {
    SimulationOptions opt;
    opt.students = 6;
    opt.events_per_student = 120;
    opt.duration_ms = 5 * kMinuteMs;
    opt.seed = static_cast<std::uint64_t>(seed);
    const auto log = fixture::class_log("todo", opt);
    const auto view = log.view();
    const auto ticks = minute_ticks(*bounds_of(view));

    SnapshotCache cache(a.starter, ticks.front());
    for (const auto& [id, events] : index_by_student(view)) {
      for (auto t : ticks) {
        if (cache.reconstruct(id, events, t).content_hash != reconstruct_at(id, events, t, a.starter).content_hash) {
          r.fail("seed " + std::to_string(seed) + ": cached hash differs for " + id + " at " + std::to_string(t));
        }
        ++hashes;
      }
    }

    auto config = fixture::config("todo");
    config.start_ms = ticks.front();

    // Live: students' batches arrive interleaved in random order, so ticks
    // close early and late events must republish them.
    auto live = std::make_shared<Session>(config, a);
    std::map<std::string, std::vector<EditEvent>> pending;
    for (const auto& e : view) pending[e.student_id].push_back(e);
    std::map<std::string, std::size_t> cursor;
    oracle::Rng rng(static_cast<std::uint64_t>(seed) * 7919);
    auto sub = live->updates().subscribe();
    while (!pending.empty()) {
      auto it = std::next(pending.begin(), static_cast<long>(oracle::pick(rng, pending.size())));
      auto& pos = cursor[it->first];
      const auto n = std::min(it->second.size() - pos, 1 + oracle::pick(rng, 25));
      const std::vector<EditEvent> batch(it->second.begin() + static_cast<long>(pos),
                                         it->second.begin() + static_cast<long>(pos + n));
      for (const auto& v : live->ingest(batch)) {
        if (!v.accepted) r.fail("seed " + std::to_string(seed) + ": live ingest rejected an event: " + v.error);
      }
      pos += n;
      if (pos == it->second.size()) pending.erase(it);
    }
    live->finalize();
    while (auto line = sub->pop(std::chrono::milliseconds(0))) late += line->find("StatsChanged") != std::string::npos;

    auto config_r = config;
    config_r.mode = SessionMode::Replay;
    auto replayed = std::make_shared<Session>(config_r, a);
    ReplayJob job(replayed, view, std::numeric_limits<double>::infinity());
    job.wait();

    StaticRunner runner;
    MatrixOptions uncached;
    uncached.use_cache = false;
    const auto batch = build_progress_matrix(view, a.checkpoints, ticks, runner, a.starter, uncached);

    const auto lm = to_json(live->matrix()).dump(), rm = to_json(replayed->matrix()).dump();
    if (lm != rm) r.fail("seed " + std::to_string(seed) + ": live and replay matrices differ");
    if (rm != to_json(batch).dump()) r.fail("seed " + std::to_string(seed) + ": replay differs from uncached batch");
  }
  if (r.ok) {
    r.detail = std::to_string(kDeterminismLogs) + " logs, " + std::to_string(hashes) +
               " snapshot hashes, live == replay == uncached batch (" + std::to_string(late) + " late republishes)";
  }
  return r;
}

// 3. Reference passes every static task; each mutation fails exactly its task.
Result fixtures_faithful() {
  Result r;
  std::size_t total = 0;
  for (const std::string name : {"todo", "carousel"}) {
    const auto a = fixture::assets(name);
    StaticRunner runner;
    const auto ref = verify_checkpoints(a.checkpoints, reference_snapshot(a.reference), runner);
    std::map<std::string, TaskStatus> baseline;
    for (const auto& t : ref.tasks) {
      const auto key = t.checkpoint_id + "/" + t.task_id;
      baseline[key] = t.outcome;
      const auto task = find_task(a.checkpoints, key);
      const bool interactive = task->task->requires_runtime();
      if (!interactive && t.outcome != TaskStatus::Pass) r.fail(name + " reference fails static task " + key);
      if (interactive && t.outcome != TaskStatus::Unsupported) r.fail(name + " interactive task " + key + " not unsupported");
    }
    if (a.checkpoints.size() != 3) r.fail(name + " does not have 3 checkpoints");
    const auto muts = fixture::mutations(name);
    if (muts.size() < kMinMutations) r.fail(name + " has only " + std::to_string(muts.size()) + " mutations");
    for (const auto& m : muts) {
      const auto report = verify_checkpoints(a.checkpoints, reference_snapshot(apply_mutation(a.reference, m)), runner);
      for (const auto& t : report.tasks) {
        const auto key = t.checkpoint_id + "/" + t.task_id;
        const auto want = key == m.fails ? TaskStatus::Fail : baseline[key];
        if (t.outcome != want) {
          r.fail(name + " mutation " + m.id + ": " + key + " is " + std::string(status_name(t.outcome)) + ", expected " +
                 std::string(status_name(want)));
        }
      }
      ++total;
    }
  }
  if (r.ok) r.detail = std::to_string(total) + " mutations across 2 fixtures each fail exactly their task";
  return r;
}

// 4. Cascade winners and selector queries vs exhaustive oracles.
Result cascade_oracle() {
  Result r;
  oracle::Rng rng(20'240'004);
  std::size_t pairs = 0, queries = 0;
  for (int i = 0; i < kCascadeCases && r.ok; ++i) {
    const auto c = oracle::random_case(rng, 50, 30);
    const auto tree = oracle::build_tree(c);
    const auto parsed = parse_css(oracle::render_sheet(c.rules));
    if (parsed.sheet.rules.size() != c.rules.size()) {
      r.fail("case " + std::to_string(i) + ": sheet parsed to a different rule count");
      break;
    }
    const std::vector<Stylesheet> sheets{parsed.sheet};
    for (std::size_t n = 0; n < c.nodes.size(); ++n) {
      const auto style = computed_style(oracle::tree_id(n), sheets, tree);
      for (const auto& prop : oracle::kProps) {
        auto it = style.find(prop);
        const std::optional<std::string> got = it == style.end() ? std::nullopt : std::optional(it->second.value);
        if (got != oracle::computed_winner(c, n, prop)) r.fail("case " + std::to_string(i) + " node " + std::to_string(n) + " " + prop);
        ++pairs;
      }
    }
    const auto order = oracle::document_order(c);
    for (const auto& g : c.queries) {
      const auto hits = oracle::match_set(c, g);
      std::vector<NodeId> want;
      for (auto n : order) {
        if (hits.count(n)) want.push_back(oracle::tree_id(n));
      }
      if (query(parse_selector(oracle::render(g)), tree) != want) r.fail("case " + std::to_string(i) + " query " + oracle::render(g));
      ++queries;
    }
  }
  if (r.ok) {
    r.detail = std::to_string(kCascadeCases) + " cases, " + std::to_string(pairs) + " (node, property) pairs, " +
               std::to_string(queries) + " queries";
  }
  return r;
}

// 5. Full matrix over a 22 x 810 class, end to end through replay.
Result performance() {
  Result r;
  const auto a = fixture::assets("todo");
  SimulationOptions opt;
  opt.students = kPerfStudents;
  opt.events_per_student = kPerfEvents;
  const auto sim_start = Clock::now();
  const auto log = fixture::class_log("todo", opt);
  const double sim_s = seconds_since(sim_start);

  auto config = fixture::config("todo");
  config.mode = SessionMode::Replay;
  auto session = std::make_shared<Session>(config, a);
  const auto start = Clock::now();
  ReplayJob job(session, log.view(), std::numeric_limits<double>::infinity());
  job.wait();
  const auto m = session->matrix();
  const double s = seconds_since(start);

  if (log.size() != kPerfStudents * kPerfEvents) r.fail("log has " + std::to_string(log.size()) + " events");
  if (m.ticks.size() != kPerfTicks) r.fail("matrix has " + std::to_string(m.ticks.size()) + " ticks");
  for (const auto& t : m.ticks) {
    if (t.students.size() != kPerfStudents) r.fail("tick " + std::to_string(t.t_ms) + " has a partial roster");
  }
  if (!m.errors.empty()) r.fail("matrix reported errors: " + m.errors.front());
  if (s >= kPerfBudgetSeconds) r.fail("matrix took " + fmt_seconds(s));
  r.detail = (r.ok ? "" : r.detail + "; ") + std::to_string(log.size()) + " events, " + std::to_string(m.ticks.size()) +
             " ticks, matrix in " + fmt_seconds(s) + " (simulation " + fmt_seconds(sim_s) + ", " +
             std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hardware threads)";
  return r;
}

std::vector<std::pair<std::string, std::string>> style_targets(const std::vector<Checkpoint>& cps) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& cp : cps) {
    for (const auto& t : cp.tasks) {
      for (const auto& as : t.assertions) {
        if (const auto* s = std::get_if<check::Style>(&as)) out.emplace_back(s->selector, s->property);
      }
    }
  }
  return out;
}

// 6. Distributions and clusters partition the roster; clusters equal the
// pairwise-equality grouping.
Result partitions() {
  Result r;
  std::size_t distributions = 0, cluster_sets = 0;
  for (const std::string name : {"todo", "carousel"}) {
    const auto a = fixture::assets(name);
    StaticRunner runner;
    for (int seed = 1; seed <= kPartitionClasses && r.ok; ++seed) {
      SimulationOptions opt;
      opt.students = 10 + static_cast<std::size_t>(seed % 13);
      opt.events_per_student = 200;
      opt.duration_ms = 6 * kMinuteMs;
      opt.seed = static_cast<std::uint64_t>(seed);
      const auto log = fixture::class_log(name, opt);
      const auto view = log.view();
      const auto by_student = index_by_student(view);
      for (TimestampMs t = opt.start_ms; t <= opt.start_ms + opt.duration_ms; t += 2 * kMinuteMs) {
        std::vector<DocumentSnapshot> snaps;
        std::set<std::string> roster;
        for (const auto& [id, events] : by_student) {
          snaps.push_back(reconstruct_at(id, events, t, a.starter));
          roster.insert(id);
        }
        for (const auto& [sel, prop] : style_targets(a.checkpoints)) {
          const auto d = inspect_property(snaps, sel, prop, t);
          std::vector<std::vector<std::string>> parts;
          for (const auto& [_, ids] : d.buckets) parts.push_back(ids);
          if (!oracle::partitions(parts, roster, snaps.size())) r.fail(name + " distribution " + sel + " " + prop);
          ++distributions;
        }
        for (const auto& cp : a.checkpoints) {
          const auto graded = graded_properties(cp);
          for (const auto& task : cp.tasks) {
            std::set<std::string> selectors{"body"};
            for (const auto& as : task.assertions) selectors.insert(subject_selector(as));
            for (const auto& sel : selectors) {
              const auto set = preview_clusters(snaps, cp, task, sel, t, &runner);
              std::vector<std::vector<std::string>> parts;
              std::vector<std::set<std::string>> got;
              for (const auto& c : set.clusters) {
                parts.push_back(c.members);
                got.emplace_back(c.members.begin(), c.members.end());
              }
              if (!oracle::partitions(parts, roster, snaps.size())) r.fail(name + " clusters " + task.id + " " + sel);
              const auto list = parse_selector(sel);
              std::vector<std::pair<std::string, std::string>> items;
              for (const auto& s : snaps) {
                items.emplace_back(s.student_id, fingerprint(s.student_id, s.files, list, sel, graded).serialization);
              }
              std::sort(got.begin(), got.end());
              if (got != oracle::pairwise_groups(items)) r.fail(name + " clusters differ from pairwise oracle: " + task.id + " " + sel);
              ++cluster_sets;
            }
          }
        }
      }
    }
  }
  if (r.ok) {
    r.detail = std::to_string(2 * kPartitionClasses) + " classes, " + std::to_string(distributions) + " distributions, " +
               std::to_string(cluster_sets) + " cluster sets";
  }
  return r;
}

struct CliRun {
  int code;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(SPARK_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, ""};
  std::string out;
  char buf[4096];
  while (auto n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

// 7. HTTP payloads equal in-process results; verify equals the CLI report.
Result api_agreement() {
  Result r;
  const auto config_path = fixture::dir("todo") / "session.json";
  auto session = std::make_shared<Session>(load_session_config(config_path), fixture::assets("todo"));
  ApiOptions options;
  options.token = "acceptance";
  ApiServer server(session, options);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  client.set_default_headers({{"X-Spark-Token", "acceptance"}});
  client.set_read_timeout(std::chrono::seconds(120));

  auto call = [&](const httplib::Result& res, const std::string& what) -> json {
    if (!res || res->status != 200) {
      r.fail(what + " returned " + (res ? std::to_string(res->status) + " " + res->body : std::string("no response")));
      return nullptr;
    }
    return json::parse(res->body);
  };

  SimulationOptions opt;
  opt.students = 12;
  opt.events_per_student = 300;
  opt.duration_ms = 8 * kMinuteMs;
  const auto log = fixture::class_log("todo", opt);
  const auto view = log.view();
  for (std::size_t i = 0; i < view.size() && r.ok; i += 250) {
    json batch = json::array();
    for (std::size_t k = i; k < std::min(view.size(), i + 250); ++k) batch.push_back(to_json(view[k]));
    const auto body = call(client.Post("/events", batch.dump(), "application/json"), "POST /events");
    if (body.is_null()) break;
    for (const auto& v : body["verdicts"]) {
      if (!v["accepted"].get<bool>()) r.fail("event rejected: " + v.dump());
    }
  }

  std::size_t compared = 0;
  const auto ticks = session->published_ticks();
  if (ticks.size() < 8) r.fail("only " + std::to_string(ticks.size()) + " ticks published");
  const auto& cps = session->assets().checkpoints;
  for (auto t : ticks) {
    const auto q = "?t=" + std::to_string(t);
    const auto slice = session->slice_at(t);
    if (call(client.Get("/progress" + q), "GET /progress") != to_json(*slice)) r.fail("/progress differs at " + std::to_string(t));
    if (call(client.Get("/stats" + q), "GET /stats") != to_json(classroom_stats(*slice, cps))) {
      r.fail("/stats differs at " + std::to_string(t));
    }
    compared += 2;
    const auto snaps = session->class_snapshots(t);
    for (const auto& [sel, prop] : style_targets(cps)) {
      const json req{{"task_id", "structure/title-style"}, {"selector", sel}, {"property", prop}, {"t_ms", t}};
      if (call(client.Post("/inspect", req.dump(), "application/json"), "POST /inspect") !=
          to_json(inspect_property(snaps, sel, prop, t))) {
        r.fail("/inspect property differs: " + sel + " " + prop);
      }
      ++compared;
    }
    for (const auto& cp : cps) {
      for (const auto& task : cp.tasks) {
        const auto sel = subject_selector(task.assertions.front());
        const json req{{"task_id", cp.id + "/" + task.id}, {"selector", sel}, {"t_ms", t}};
        if (call(client.Post("/inspect", req.dump(), "application/json"), "POST /inspect") !=
            to_json(preview_clusters(snaps, cp, task, sel, t, &session->runner()))) {
          r.fail("/inspect clusters differ: " + cp.id + "/" + task.id);
        }
        ++compared;
      }
    }
  }
  const auto now = call(client.Get("/progress"), "GET /progress");
  if (now != to_json(session->evaluate_at(*session->last_event_ms()))) r.fail("/progress (now) differs");

  for (const std::optional<std::string>& id : {std::optional<std::string>{}, std::optional<std::string>{"add"}}) {
    const json req = id ? json{{"checkpoint_id", *id}} : json::object();
    const auto http = call(client.Post("/checkpoints/verify", req.dump(), "application/json"), "POST /checkpoints/verify");
    const auto cli = run_cli("verify --config " + config_path.string() + " --format json" + (id ? " --checkpoint " + *id : ""));
    if (cli.code != 0) r.fail("CLI verify exited " + std::to_string(cli.code));
    else if (http != json::parse(cli.out)) r.fail("/checkpoints/verify differs from CLI verify");
    compared += 1;
  }
  server.stop();
  if (r.ok) r.detail = std::to_string(view.size()) + " events over HTTP, " + std::to_string(compared) + " payloads equal";
  return r;
}

// 8. Round trips and error types.
Result round_trips() {
  Result r;
  for (const std::string name : {"todo", "carousel"}) {
    const auto first = parse_checkpoint_config(read_text_file(fixture::dir(name) / "checkpoints.json"));
    const auto again = parse_checkpoint_config(serialize_checkpoint_config(first.checkpoints));
    if (again.checkpoints != first.checkpoints) r.fail(name + " checkpoint config does not round-trip");
  }

  for (int seed = 1; seed <= 5; ++seed) {
    SimulationOptions opt;
    opt.students = 5;
    opt.events_per_student = 200;
    opt.seed = static_cast<std::uint64_t>(seed);
    const auto log = fixture::class_log("carousel", opt);
    std::stringstream buf;
    persist(log, buf);
    const auto back = load_log(buf);
    if (back.view().events() != log.view().events() || back.append_order() != log.append_order()) {
      r.fail("log " + std::to_string(seed) + " does not round-trip");
    }
  }

  try {
    load_log_file((fixture::dir("errors") / "corrupted.evlog").string());
    r.fail("corrupted log loaded");
  } catch (const FormatError& e) {
    if (e.line() != 3) r.fail("corrupted log reported line " + std::to_string(e.line()));
  } catch (const std::exception& e) {
    r.fail(std::string("corrupted log raised the wrong type: ") + e.what());
  }

  try {
    parse_checkpoint_config(read_text_file(fixture::dir("errors") / "invalid_checkpoints.json"));
    r.fail("invalid config parsed");
  } catch (const ConfigError& e) {
    if (e.violations().empty()) r.fail("ConfigError without violations");
  } catch (const std::exception& e) {
    r.fail(std::string("invalid config raised the wrong type: ") + e.what());
  }
  if (r.ok) r.detail = "2 configs, 5 logs round-trip; FormatError at line 3; ConfigError with violations";
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"edit application matches naive splice", edit_oracle},
      {"reconstruction, cache and replay determinism", determinism},
      {"fixture reference and mutations", fixtures_faithful},
      {"cascade and selector oracles", cascade_oracle},
      {"22 x 810 progress matrix under 30 s", performance},
      {"inspector partitions", partitions},
      {"HTTP agrees with in-process and CLI", api_agreement},
      {"config and log round trips", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    const auto start = Clock::now();
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.fail(std::string("exception: ") + e.what());
    }
    failed += !r.ok;
    std::cout << (r.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " (" << r.detail
              << "; " << fmt_seconds(seconds_since(start)) << " total)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
