#pragma once

#include <filesystem>
#include <string>

#include "spark/session.hpp"
#include "spark/simulate.hpp"

namespace fixture {

inline std::filesystem::path dir(const std::string& name) { return std::filesystem::path(SPARK_FIXTURE_DIR) / name; }

inline spark::SessionConfig config(const std::string& name) { return spark::load_session_config(dir(name) / "session.json"); }

inline spark::SessionAssets assets(const std::string& name) { return spark::load_session_assets(config(name)); }

inline std::vector<spark::Mutation> mutations(const std::string& name) {
  return spark::parse_mutations(spark::read_text_file(dir(name) / "mutations.json"));
}

/// Seeded class log over a fixture, in ordering-key order.
inline spark::EventLog class_log(const std::string& name, const spark::SimulationOptions& opt) {
  const auto a = assets(name);
  spark::EventLog log;
  for (const auto& e : spark::simulate_class(a.starter, a.reference, mutations(name), opt)) log.append(e);
  return log;
}

inline spark::EditEvent ev(std::string student, std::string file, std::uint64_t offset, std::uint64_t del,
                           std::string ins, spark::TimestampMs t, std::uint64_t seq, std::string session = "s") {
  return spark::EditEvent{std::move(student), std::move(session), std::move(file), offset, del, std::move(ins), t, seq};
}

}  // namespace fixture
