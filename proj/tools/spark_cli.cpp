#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <limits>
#include <thread>

#include <CLI11.hpp>

#include "spark/api_service.hpp"
#include "spark/runner_process.hpp"
#include "spark/session.hpp"
#include "spark/simulate.hpp"
#include "spark/verify.hpp"

namespace fs = std::filesystem;
using namespace spark;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_speed(const std::string& s) {
  if (s == "max") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("--speed must be a positive number or 'max'");
  }
  if (used != s.size() || !(v > 0)) throw UsageError("--speed must be a positive number or 'max'");
  return v;
}

/// An external runner from a whitespace-separated command line, or the
/// in-process static runner when empty.
std::shared_ptr<Runner> make_runner(const std::string& command) {
  if (command.empty()) return std::make_shared<StaticRunner>();
  std::istringstream words(command);
  std::vector<std::string> argv{std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()};
  return std::make_shared<ExternalRunner>(argv);
}

std::shared_ptr<Session> open_session(const std::string& config_path, bool with_storage, const std::string& runner) {
  auto config = load_session_config(config_path);
  auto assets = load_session_assets(config);
  auto storage = with_storage ? session_storage(config) : nullptr;
  return std::make_shared<Session>(std::move(config), std::move(assets), make_runner(runner), storage);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

int cmd_serve(const std::string& config_path, const std::string& host, int port, const std::string& runner) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  auto session = open_session(config_path, true, runner);
  ApiServer server(session);
  auto ticks = session->updates().subscribe();
  std::thread logger([&] {
    while (!ticks->closed()) {
      auto line = ticks->pop(std::chrono::milliseconds(500));
      if (!line) continue;
      const auto j = nlohmann::json::parse(*line);
      if (j.value("type", "") == "TickReady") {
        std::cerr << "tick " << j["t_ms"] << " ready (" << j["slice_hash"].get<std::string>().substr(0, 12) << ")\n";
      }
    }
  });
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  std::cerr << "serving session '" << session->config().session_id << "' on " << host << ":" << port << "\n";
  try {
    server.listen(host, port);
  } catch (...) {
    ticks->close();
    logger.join();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw;
  }
  ticks->close();
  logger.join();
  waiter.join();
  return kOk;
}

int cmd_replay(const std::string& log_path, const std::string& speed, const std::string& config_path,
               const std::string& out_path) {
  const double multiplier = parse_speed(speed);
  auto config = load_session_config(config_path);
  config.mode = SessionMode::Replay;
  config.log.reset();
  auto session = std::make_shared<Session>(config, load_session_assets(config));
  const auto log = load_log_file(log_path);
  ReplayJob job(session, log.view(), multiplier);
  job.wait();
  const auto status = job.status();
  std::cerr << "delivered " << status.delivered << " of " << status.total << " events\n";
  if (!status.error.empty()) {
    std::cerr << "replay aborted: " << status.error << "\n";
    return kFailed;
  }
  write_output(out_path, to_json(session->matrix()).dump() + "\n");
  return kOk;
}

int cmd_verify(const std::string& config_path, const std::string& checkpoint, bool strict, const std::string& format,
               const std::string& runner) {
  const auto owner = open_session(config_path, false, runner);
  auto& session = *owner;
  std::optional<std::string> id;
  if (!checkpoint.empty()) id = checkpoint;
  VerificationReport report;
  try {
    report = session.verify(id);
  } catch (const KeyNotFound& e) {
    throw UsageError(e.what());
  }
  std::cout << (format == "json" ? to_json(report).dump(2) + "\n" : render_text(report));
  return report.accepted(strict) ? kOk : kFailed;
}

int cmd_simulate(const SimulationOptions& opt, const std::string& reference, std::string starter,
                 std::string mutations, const std::string& out_path) {
  fs::path ref = fs::path(reference).lexically_normal();
  if (!ref.has_filename()) ref = ref.parent_path();
  if (starter.empty()) starter = (ref.parent_path() / "starter").string();
  if (mutations.empty() && fs::exists(ref.parent_path() / "mutations.json")) {
    mutations = (ref.parent_path() / "mutations.json").string();
  }
  std::vector<Mutation> muts;
  if (!mutations.empty()) muts = parse_mutations(read_text_file(mutations));
  std::vector<EditEvent> events;
  try {
    events = simulate_class(load_workspace(starter), load_workspace(reference), muts, opt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::string text;
  for (const auto& e : events) text += to_line(e) + "\n";
  write_output(out_path, text);
  std::cerr << "wrote " << events.size() << " events for " << opt.students << " students\n";
  return kOk;
}

int cmd_stats(const std::string& log_path, const std::string& config_path, const std::string& out_path) {
  auto config = load_session_config(config_path);
  const auto assets = load_session_assets(config);
  const auto log = load_log_file(log_path);
  const auto view = log.view();
  std::string csv = "t_ms,task_id,passing,class_size\n";
  if (auto bounds = bounds_of(view)) {
    if (config.start_ms) bounds->start_ms = *config.start_ms;
    StaticRunner runner;
    MatrixOptions opt;
    opt.roster = config.roster;
    const auto m = build_progress_matrix(view, assets.checkpoints, minute_ticks(*bounds, config.tick_interval_ms),
                                         runner, assets.starter, opt);
    for (const auto& slice : m.ticks) {
      const auto stats = classroom_stats(slice, assets.checkpoints);
      for (const auto& t : stats.tasks) {
        csv += std::to_string(stats.t_ms) + "," + t.checkpoint_id + "/" + t.task_id + "," + std::to_string(t.passing) +
               "," + std::to_string(stats.class_size) + "\n";
      }
    }
    for (const auto& e : m.errors) std::cerr << "warning: " << e << "\n";
  }
  write_output(out_path, csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classroom monitoring engine for web-programming exercises"};
  app.require_subcommand(1);

  std::string config, host = "127.0.0.1", log, speed = "max", out, checkpoint, format = "text";
  std::string reference = std::string(SPARK_FIXTURE_DIR) + "/todo/reference", starter, mutations, runner_cmd;
  int port = 8080;
  bool strict = false;
  SimulationOptions sim;

  auto* serve = app.add_subcommand("serve", "Run the HTTP service for a session");
  serve->add_option("--config", config, "Session file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--runner", runner_cmd, "External runner command (default: in-process static runner)");

  auto* replay = app.add_subcommand("replay", "Replay a log and write the final progress matrix");
  replay->add_option("--log", log, "Event log (.evlog)")->required()->check(CLI::ExistingFile);
  replay->add_option("--speed", speed, "Speed multiplier, or 'max'");
  replay->add_option("--config", config, "Session file")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out, "Output path for the matrix JSON ('-' for stdout)");

  auto* verify = app.add_subcommand("verify", "Grade the reference solution against the checkpoints");
  verify->add_option("--config", config, "Session file")->required()->check(CLI::ExistingFile);
  verify->add_option("--checkpoint", checkpoint, "Only this checkpoint");
  verify->add_flag("--strict", strict, "Count unsupported tasks as failures");
  verify->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  verify->add_option("--runner", runner_cmd, "External runner command (default: in-process static runner)");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic class log");
  simulate->add_option("--students", sim.students, "Class size")->check(CLI::Range(1, 10000));
  simulate->add_option("--events-per-student", sim.events_per_student, "Edits per student")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--start-ms", sim.start_ms, "Session start (epoch ms)");
  simulate->add_option("--reference", reference, "Reference workspace")->check(CLI::ExistingDirectory);
  simulate->add_option("--starter", starter, "Starter workspace (default: sibling 'starter')");
  simulate->add_option("--mutations", mutations, "Mutation list (default: sibling mutations.json)");
  simulate->add_option("--out", out, "Output .evlog ('-' for stdout)")->required();

  auto* stats = app.add_subcommand("stats", "Per-tick task pass counts as CSV");
  stats->add_option("--log", log, "Event log (.evlog)")->required()->check(CLI::ExistingFile);
  stats->add_option("--config", config, "Session file")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", out, "Output CSV ('-' for stdout)")->required();

  auto* runner = app.add_subcommand("runner", "Serve the static runner over the line protocol on stdio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*serve) return cmd_serve(config, host, port, runner_cmd);
    if (*replay) return cmd_replay(log, speed, config, out);
    if (*verify) return cmd_verify(config, checkpoint, strict, format, runner_cmd);
    if (*simulate) return cmd_simulate(sim, reference, starter, mutations, out);
    if (*stats) return cmd_stats(log, config, out);
    if (*runner) {
      StaticRunner r;
      serve_runner(std::cin, std::cout, r);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
