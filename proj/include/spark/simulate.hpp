#pragma once

// Seeded synthetic classes: every student types a perturbed copy of the
// reference solution as keystroke events over a fixed-length session.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "spark/document_store.hpp"
#include "spark/error.hpp"
#include "spark/event_log.hpp"
#include "spark/utf8.hpp"

namespace spark {

/// A single textual edit of the reference that breaks exactly one task.
struct Mutation {
  std::string id;
  std::string file;
  std::string find;
  std::string replace;
  std::string fails;  // "checkpoint/task"
};

inline std::vector<Mutation> parse_mutations(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  const auto& list = j.is_object() ? j.at("mutations") : j;
  std::vector<Mutation> out;
  for (const auto& m : list) {
    out.push_back(Mutation{m.at("id").get<std::string>(), m.at("file").get<std::string>(),
                           m.at("find").get<std::string>(), m.at("replace").get<std::string>(),
                           m.value("fails", "")});
  }
  return out;
}

/// Applies `m` to the first occurrence of its find text. Throws when the
/// file or the text is absent.
inline FileMap apply_mutation(FileMap files, const Mutation& m) {
  auto it = files.find(m.file);
  if (it == files.end()) throw Error("mutation " + m.id + ": no file '" + m.file + "'");
  const auto at = it->second.find(m.find);
  if (at == std::string::npos) throw Error("mutation " + m.id + ": text not found in " + m.file);
  it->second.replace(at, m.find.size(), m.replace);
  return files;
}

struct SimulationOptions {
  std::size_t students = 22;
  std::size_t events_per_student = 810;
  std::uint64_t seed = 1;
  TimestampMs start_ms = 1'700'000'000'000;
  TimestampMs duration_ms = 20 * kMinuteMs;
  double mutation_rate = 0.3;
  std::string session_id = "session-1";
};

inline std::string student_name(std::size_t i, std::size_t n) {
  const auto width = std::max<std::size_t>(2, std::to_string(n).size());
  auto num = std::to_string(i + 1);
  return "student" + std::string(width - num.size(), '0') + num;
}

namespace detail {

/// One pending edit, before timestamps and seq numbers are assigned.
struct PlannedEdit {
  std::string file;
  std::uint64_t offset;
  std::uint64_t delete_count;
  std::string insert;
};

inline std::vector<std::string> split_scalars(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto n = std::max<std::size_t>(1, utf8::sequence_length(s, i));
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

/// Random composition of `total` into `parts` positive pieces.
inline std::vector<std::size_t> compose(std::size_t total, std::size_t parts, std::mt19937_64& rng) {
  if (parts == 0) return {};
  std::vector<std::size_t> cuts;
  if (parts > 1) {
    std::vector<std::size_t> pool(total - 1);
    std::iota(pool.begin(), pool.end(), 1);
    for (std::size_t i = 0; i + 1 < parts; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    cuts.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(parts - 1));
    std::sort(cuts.begin(), cuts.end());
  }
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (auto c : cuts) {
    sizes.push_back(c - prev);
    prev = c;
  }
  sizes.push_back(total - prev);
  return sizes;
}

inline char wrong_char(std::mt19937_64& rng) {
  static constexpr std::string_view kKeys = "qwertyuiopasdfghjklzxcvbnm;";
  return kKeys[std::uniform_int_distribution<std::size_t>(0, kKeys.size() - 1)(rng)];
}

/// Plans exactly `k` edits turning `starter` into `target`: per file, one
/// deletion of the differing middle, then typed chunks, plus typo pairs
/// (wrong key, backspace) and replace-typos (wrong key, then overwritten).
inline std::vector<PlannedEdit> plan_edits(const FileMap& starter, const FileMap& target, std::size_t k,
                                           std::mt19937_64& rng) {
  struct FileWork {
    std::string path;
    std::uint64_t prefix;  // scalars kept at the front
    std::uint64_t removed;
    std::vector<std::string> chars;  // scalars to type
  };
  std::vector<FileWork> work;
  std::size_t deletes = 0, total_chars = 0;
  for (const auto& [path, want] : target) {
    auto it = starter.find(path);
    const std::string have = it == starter.end() ? std::string() : it->second;
    const auto a = split_scalars(have);
    const auto b = split_scalars(want);
    std::size_t p = 0;
    while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
    std::size_t s = 0;
    while (s < a.size() - p && s < b.size() - p && a[a.size() - 1 - s] == b[b.size() - 1 - s]) ++s;
    FileWork w{path, p, a.size() - p - s, std::vector<std::string>(b.begin() + static_cast<std::ptrdiff_t>(p),
                                                                    b.end() - static_cast<std::ptrdiff_t>(s))};
    if (w.removed == 0 && w.chars.empty()) continue;
    deletes += w.removed > 0;
    total_chars += w.chars.size();
    work.push_back(std::move(w));
  }
  std::size_t typing_files = 0;
  for (const auto& w : work) typing_files += !w.chars.empty();
  if (k < deletes + typing_files) {
    throw std::invalid_argument("events per student must be at least " + std::to_string(deletes + typing_files));
  }
  // k = deletes + chunks + 2 * pairs + replaces, with typing_files <= chunks <= total_chars.
  const std::size_t budget = k - deletes;
  std::size_t pairs = budget / 25;
  std::size_t replaces = 0;
  auto chunks_for = [&] { return budget - 2 * pairs - replaces; };
  while (pairs > 0 && chunks_for() < typing_files) --pairs;
  if (chunks_for() > total_chars) {
    const std::size_t extra = chunks_for() - total_chars;
    pairs += extra / 2;
    replaces = extra % 2;
  }
  if (total_chars == 0) {
    pairs = 0;
    replaces = 0;
    if (budget != 0) throw std::invalid_argument("nothing to type; events per student must be " + std::to_string(deletes));
  }
  const std::size_t chunks = chunks_for();

  // Spread chunks over files in proportion to their text, at least one each.
  std::vector<std::size_t> per_file(work.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (work[i].chars.empty()) continue;
    per_file[i] = std::max<std::size_t>(1, chunks * work[i].chars.size() / std::max<std::size_t>(1, total_chars));
    per_file[i] = std::min(per_file[i], work[i].chars.size());
    assigned += per_file[i];
  }
  for (std::size_t i = 0; assigned != chunks; i = (i + 1) % work.size()) {
    if (work[i].chars.empty()) continue;
    if (assigned < chunks && per_file[i] < work[i].chars.size()) {
      ++per_file[i];
      ++assigned;
    } else if (assigned > chunks && per_file[i] > 1) {
      --per_file[i];
      --assigned;
    }
  }

  // Typos land after random chunks.
  std::vector<int> typo_after(chunks, 0);  // 0 none, 1 pair, 2 replace
  std::vector<std::size_t> slots(chunks);
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::size_t next_slot = 0;
  std::vector<std::size_t> typo_count(chunks, 0);
  for (std::size_t i = 0; i < pairs; ++i) ++typo_count[slots[next_slot++ % chunks]];
  if (replaces) typo_after[slots[next_slot++ % chunks]] = 2;

  std::vector<PlannedEdit> plan;
  std::size_t chunk_index = 0;
  for (std::size_t fi = 0; fi < work.size(); ++fi) {
    const auto& w = work[fi];
    if (w.removed > 0) plan.push_back(PlannedEdit{w.path, w.prefix, w.removed, ""});
    std::uint64_t cursor = w.prefix;
    const auto sizes = compose(w.chars.size(), per_file[fi], rng);
    std::size_t pos = 0;
    for (auto size : sizes) {
      std::string text;
      for (std::size_t c = 0; c < size; ++c) text += w.chars[pos + c];
      pos += size;
      const auto ci = chunk_index++;
      if (typo_after[ci] == 2) {
        // Last scalar typed wrong, then overwritten in place.
        std::string wrong = text.substr(0, text.size() - w.chars[pos - 1].size()) + wrong_char(rng);
        plan.push_back(PlannedEdit{w.path, cursor, 0, wrong});
        plan.push_back(PlannedEdit{w.path, cursor + size - 1, 1, w.chars[pos - 1]});
      } else {
        plan.push_back(PlannedEdit{w.path, cursor, 0, text});
      }
      cursor += size;
      for (std::size_t t = 0; t < typo_count[ci]; ++t) {
        plan.push_back(PlannedEdit{w.path, cursor, 0, std::string(1, wrong_char(rng))});
        plan.push_back(PlannedEdit{w.path, cursor, 1, ""});
      }
    }
  }
  return plan;
}

/// `n` non-decreasing instants, first at start and last at start + duration.
inline std::vector<TimestampMs> spread_times(std::size_t n, TimestampMs start, TimestampMs duration, std::mt19937_64& rng) {
  std::vector<TimestampMs> out;
  if (n == 0) return out;
  if (n == 1) return {start};
  std::exponential_distribution<double> gap(1.0);
  std::vector<double> acc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) acc[i] = acc[i - 1] + gap(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(start + static_cast<TimestampMs>(std::llround(acc[i] / acc[n - 1] * static_cast<double>(duration))));
  }
  out.back() = start + duration;
  return out;
}

}  // namespace detail

/// Events for the whole class, student by student, each student's events in
/// seq order. Deterministic in (inputs, options).
inline std::vector<EditEvent> simulate_class(const FileMap& starter, const FileMap& reference,
                                             const std::vector<Mutation>& mutations, const SimulationOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<EditEvent> out;
  out.reserve(opt.students * opt.events_per_student);
  for (std::size_t s = 0; s < opt.students; ++s) {
    FileMap target = reference;
    std::bernoulli_distribution mutate(opt.mutation_rate);
    for (const auto& m : mutations) {
      if (!mutate(rng)) continue;
      try {
        target = apply_mutation(target, m);
      } catch (const Error&) {
        // An earlier mutation already rewrote this text.
      }
    }
    const auto plan = detail::plan_edits(starter, target, opt.events_per_student, rng);
    const auto times = detail::spread_times(plan.size(), opt.start_ms, opt.duration_ms, rng);
    const auto id = student_name(s, opt.students);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      out.push_back(EditEvent{id, opt.session_id, plan[i].file, plan[i].offset, plan[i].delete_count, plan[i].insert,
                              times[i], static_cast<std::uint64_t>(i + 1)});
    }
  }
  return out;
}

}  // namespace spark
