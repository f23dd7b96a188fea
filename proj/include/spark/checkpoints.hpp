#pragma once

// Checkpoint / task / assertion model and its configuration format.
//
// A configuration is a JSON document {"checkpoints": [...]} (a bare array is
// accepted too). Assertions and interaction steps are tagged by "kind":
//
//   {"kind": "exists", "selector": "#todoList", "min_count": 1}
//   {"kind": "count", "selector": ".todoItem", "comparator": "=", "n": 1}
//   {"kind": "attribute", "selector": "#input", "attribute": "type", "expected": "text"}
//   {"kind": "text", "selector": "#addBtn", "expected": "Add", "mode": "exact"}
//   {"kind": "style", "selector": "#pageTitle", "property": "font-size", "expected": "25px"}
//   {"kind": "rule_declared", "selector": ".deleteBtn:hover", "property": "background-color", "expected": "darkred"}
//   {"kind": "ancestor", "selector": "#addBtn", "ancestor": "#inputContainer"}
//
//   {"kind": "click", "selector": "#addBtn"}
//   {"kind": "type_text", "selector": "#input", "text": "Buy milk"}
//   {"kind": "hover", "selector": ".deleteBtn"}
//   {"kind": "wait", "milliseconds": 200}

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "spark/error.hpp"
#include "spark/normalize.hpp"
#include "spark/selector.hpp"

namespace spark {

namespace step {
struct Click {
  std::string selector;
  friend bool operator==(const Click&, const Click&) = default;
};
struct TypeText {
  std::string selector;
  std::string text;
  friend bool operator==(const TypeText&, const TypeText&) = default;
};
struct Hover {
  std::string selector;
  friend bool operator==(const Hover&, const Hover&) = default;
};
struct Wait {
  std::uint64_t milliseconds = 0;
  friend bool operator==(const Wait&, const Wait&) = default;
};
}  // namespace step

using InteractionStep = std::variant<step::Click, step::TypeText, step::Hover, step::Wait>;

inline constexpr std::uint64_t kMaxWaitMs = 10'000;

enum class Comparator { Equal, AtLeast, AtMost };
enum class TextMode { Exact, Contains };

namespace check {
struct Exists {
  std::string selector;
  std::uint64_t min_count = 1;
  friend bool operator==(const Exists&, const Exists&) = default;
};
struct Count {
  std::string selector;
  Comparator comparator = Comparator::Equal;
  std::uint64_t n = 0;
  friend bool operator==(const Count&, const Count&) = default;
};
struct Attribute {
  std::string selector;
  std::string attribute;
  std::string expected;
  friend bool operator==(const Attribute&, const Attribute&) = default;
};
struct Text {
  std::string selector;
  std::string expected;
  TextMode mode = TextMode::Exact;
  friend bool operator==(const Text&, const Text&) = default;
};
struct Style {
  std::string selector;
  std::string property;
  std::string expected;
  friend bool operator==(const Style&, const Style&) = default;
};
/// A stylesheet rule with exactly this selector declares the property;
/// the only way to grade state pseudo-classes such as :hover.
struct RuleDeclared {
  std::string selector;
  std::string property;
  std::string expected;
  friend bool operator==(const RuleDeclared&, const RuleDeclared&) = default;
};
struct Ancestor {
  std::string selector;
  std::string ancestor;
  friend bool operator==(const Ancestor&, const Ancestor&) = default;
};
}  // namespace check

using Assertion = std::variant<check::Exists, check::Count, check::Attribute, check::Text, check::Style,
                               check::RuleDeclared, check::Ancestor>;

struct Task {
  std::string id;
  std::string description;
  std::vector<InteractionStep> interaction;
  std::vector<Assertion> assertions;

  /// Derived: interaction steps need a script-executing runner.
  bool requires_runtime() const noexcept { return !interaction.empty(); }
  friend bool operator==(const Task&, const Task&) = default;
};

struct Checkpoint {
  std::string id;
  std::string title;
  std::vector<Task> tasks;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct ConfigDiagnostic {
  std::string path;  // e.g. "checkpoint[1].task[2].assertions[0]"
  std::string message;
};

/// Every violation found in a configuration, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigDiagnostic> violations)
      : Error(render(violations)), violations_(std::move(violations)) {}
  const std::vector<ConfigDiagnostic>& violations() const noexcept { return violations_; }

 private:
  static std::string render(const std::vector<ConfigDiagnostic>& v) {
    std::string out = "invalid checkpoint configuration (" + std::to_string(v.size()) + " violation(s))";
    for (const auto& d : v) out += "\n  " + d.path + ": " + d.message;
    return out;
  }
  std::vector<ConfigDiagnostic> violations_;
};

struct ConfigParseResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<ConfigDiagnostic> diagnostics;  // non-fatal: unknown or derived fields
};

inline std::string_view kind_name(const Assertion& a) {
  static constexpr std::string_view kNames[] = {"exists", "count", "attribute", "text", "style", "rule_declared",
                                                "ancestor"};
  return kNames[a.index()];
}

inline std::string_view kind_name(const InteractionStep& s) {
  static constexpr std::string_view kNames[] = {"click", "type_text", "hover", "wait"};
  return kNames[s.index()];
}

inline const std::string& subject_selector(const Assertion& a) {
  return std::visit([](const auto& x) -> const std::string& { return x.selector; }, a);
}

inline std::string_view comparator_symbol(Comparator c) {
  switch (c) {
    case Comparator::Equal:
      return "=";
    case Comparator::AtLeast:
      return ">=";
    case Comparator::AtMost:
      return "<=";
  }
  return "=";
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const InteractionStep& s) {
  nlohmann::json j{{"kind", kind_name(s)}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, step::Wait>) {
          j["milliseconds"] = x.milliseconds;
        } else {
          j["selector"] = x.selector;
          if constexpr (std::is_same_v<T, step::TypeText>) j["text"] = x.text;
        }
      },
      s);
  return j;
}

inline nlohmann::json to_json(const Assertion& a) {
  nlohmann::json j{{"kind", kind_name(a)}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        j["selector"] = x.selector;
        if constexpr (std::is_same_v<T, check::Exists>) {
          j["min_count"] = x.min_count;
        } else if constexpr (std::is_same_v<T, check::Count>) {
          j["comparator"] = comparator_symbol(x.comparator);
          j["n"] = x.n;
        } else if constexpr (std::is_same_v<T, check::Attribute>) {
          j["attribute"] = x.attribute;
          j["expected"] = x.expected;
        } else if constexpr (std::is_same_v<T, check::Text>) {
          j["expected"] = x.expected;
          j["mode"] = x.mode == TextMode::Exact ? "exact" : "contains";
        } else if constexpr (std::is_same_v<T, check::Style> || std::is_same_v<T, check::RuleDeclared>) {
          j["property"] = x.property;
          j["expected"] = x.expected;
        } else if constexpr (std::is_same_v<T, check::Ancestor>) {
          j["ancestor"] = x.ancestor;
        }
      },
      a);
  return j;
}

inline nlohmann::json to_json(const Task& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.interaction) steps.push_back(to_json(s));
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& a : t.assertions) checks.push_back(to_json(a));
  return {{"id", t.id}, {"description", t.description}, {"interaction", steps}, {"assertions", checks}};
}

inline nlohmann::json to_json(const Checkpoint& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : c.tasks) tasks.push_back(to_json(t));
  return {{"id", c.id}, {"title", c.title}, {"tasks", tasks}};
}

inline std::string serialize_checkpoint_config(const std::vector<Checkpoint>& checkpoints) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checkpoints) list.push_back(to_json(c));
  return nlohmann::json{{"checkpoints", list}}.dump(2);
}

// ---------------------------------------------------------------------------
// Parsing and validation

namespace detail {

class ConfigReader {
 public:
  std::vector<ConfigDiagnostic> errors;
  std::vector<ConfigDiagnostic> warnings;

  void error(const std::string& path, std::string msg) { errors.push_back({path, std::move(msg)}); }

  void allow_only(const nlohmann::json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, _] : j.items()) {
      if (k == "requires_runtime") {
        warnings.push_back({path, "'requires_runtime' is derived from the interaction list; stored value ignored"});
      } else if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        warnings.push_back({path, "unknown field '" + k + "' ignored"});
      }
    }
  }

  std::string str(const nlohmann::json& j, const std::string& path, const char* key, bool required = true,
                  bool non_empty = false) {
    if (!j.contains(key)) {
      if (required) error(path, std::string("missing field '") + key + "'");
      return {};
    }
    if (!j[key].is_string()) {
      error(path, std::string("field '") + key + "' must be a string");
      return {};
    }
    auto v = j[key].get<std::string>();
    if (non_empty && v.empty()) error(path, std::string("field '") + key + "' must not be empty");
    return v;
  }

  std::uint64_t uns(const nlohmann::json& j, const std::string& path, const char* key, std::uint64_t fallback,
                    bool required) {
    if (!j.contains(key)) {
      if (required) error(path, std::string("missing field '") + key + "'");
      return fallback;
    }
    if (!j[key].is_number_unsigned()) {
      error(path, std::string("field '") + key + "' must be a non-negative integer");
      return fallback;
    }
    return j[key].get<std::uint64_t>();
  }

  std::string selector(const nlohmann::json& j, const std::string& path, const char* key) {
    auto s = str(j, path, key);
    if (j.contains(key) && j[key].is_string()) {
      try {
        parse_selector(s);
      } catch (const SelectorError& e) {
        error(path, std::string("field '") + key + "': " + e.what());
      }
    }
    return s;
  }

  void expected_style(const std::string& path, const std::string& property, const std::string& expected) {
    if (property.empty() || expected.empty()) return;
    if (!normalize_value_checked(property, expected).recognized) {
      error(path, "expected value '" + expected + "' is not a recognizable " + property + " value");
    }
  }

  InteractionStep step(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) {
      error(path, "interaction step must be an object");
      return step::Wait{};
    }
    const auto kind = str(j, path, "kind");
    if (kind == "click") {
      allow_only(j, path, {"kind", "selector"});
      return step::Click{selector(j, path, "selector")};
    }
    if (kind == "type_text") {
      allow_only(j, path, {"kind", "selector", "text"});
      return step::TypeText{selector(j, path, "selector"), str(j, path, "text")};
    }
    if (kind == "hover") {
      allow_only(j, path, {"kind", "selector"});
      return step::Hover{selector(j, path, "selector")};
    }
    if (kind == "wait") {
      allow_only(j, path, {"kind", "milliseconds"});
      const auto ms = uns(j, path, "milliseconds", 0, true);
      if (ms > kMaxWaitMs) error(path, "wait of " + std::to_string(ms) + " ms exceeds 10000 ms");
      return step::Wait{ms};
    }
    if (!kind.empty()) error(path, "unknown interaction kind '" + kind + "'");
    return step::Wait{};
  }

  Assertion assertion(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) {
      error(path, "assertion must be an object");
      return check::Exists{};
    }
    const auto kind = str(j, path, "kind");
    if (kind == "exists") {
      allow_only(j, path, {"kind", "selector", "min_count"});
      check::Exists a{selector(j, path, "selector"), uns(j, path, "min_count", 1, false)};
      if (a.min_count == 0) error(path, "min_count must be at least 1");
      return a;
    }
    if (kind == "count") {
      allow_only(j, path, {"kind", "selector", "comparator", "n"});
      check::Count a;
      a.selector = selector(j, path, "selector");
      const auto cmp = str(j, path, "comparator");
      if (cmp == "=" || cmp == "==") {
        a.comparator = Comparator::Equal;
      } else if (cmp == ">=" || cmp == "≥") {
        a.comparator = Comparator::AtLeast;
      } else if (cmp == "<=" || cmp == "≤") {
        a.comparator = Comparator::AtMost;
      } else if (j.contains("comparator")) {
        error(path, "comparator must be one of =, >=, <=");
      }
      a.n = uns(j, path, "n", 0, true);
      return a;
    }
    if (kind == "attribute") {
      allow_only(j, path, {"kind", "selector", "attribute", "expected"});
      return check::Attribute{selector(j, path, "selector"), ascii_lower(str(j, path, "attribute", true, true)),
                              str(j, path, "expected")};
    }
    if (kind == "text") {
      allow_only(j, path, {"kind", "selector", "expected", "mode"});
      check::Text a{selector(j, path, "selector"), str(j, path, "expected"), TextMode::Exact};
      const auto mode = str(j, path, "mode", false);
      if (mode == "contains") {
        a.mode = TextMode::Contains;
      } else if (!mode.empty() && mode != "exact") {
        error(path, "mode must be 'exact' or 'contains'");
      }
      return a;
    }
    if (kind == "style" || kind == "rule_declared") {
      allow_only(j, path, {"kind", "selector", "property", "expected"});
      auto sel = selector(j, path, "selector");
      auto prop = ascii_lower(str(j, path, "property", true, true));
      auto expected = str(j, path, "expected", true, true);
      expected_style(path, prop, expected);
      if (kind == "style") return check::Style{sel, prop, expected};
      return check::RuleDeclared{sel, prop, expected};
    }
    if (kind == "ancestor") {
      allow_only(j, path, {"kind", "selector", "ancestor"});
      return check::Ancestor{selector(j, path, "selector"), selector(j, path, "ancestor")};
    }
    if (!kind.empty()) error(path, "unknown assertion kind '" + kind + "'");
    return check::Exists{};
  }

  Task task(const nlohmann::json& j, const std::string& path) {
    Task t;
    if (!j.is_object()) {
      error(path, "task must be an object");
      return t;
    }
    allow_only(j, path, {"id", "description", "interaction", "assertions"});
    t.id = str(j, path, "id", true, true);
    t.description = str(j, path, "description", false);
    if (j.contains("interaction")) {
      if (!j["interaction"].is_array()) {
        error(path, "'interaction' must be an array");
      } else {
        for (std::size_t i = 0; i < j["interaction"].size(); ++i) {
          t.interaction.push_back(step(j["interaction"][i], path + ".interaction[" + std::to_string(i) + "]"));
        }
      }
    }
    if (!j.contains("assertions") || !j["assertions"].is_array()) {
      error(path, "'assertions' must be an array");
    } else {
      if (j["assertions"].empty()) error(path, "a task needs at least one assertion");
      for (std::size_t i = 0; i < j["assertions"].size(); ++i) {
        t.assertions.push_back(assertion(j["assertions"][i], path + ".assertions[" + std::to_string(i) + "]"));
      }
    }
    return t;
  }

  Checkpoint checkpoint(const nlohmann::json& j, const std::string& path) {
    Checkpoint c;
    if (!j.is_object()) {
      error(path, "checkpoint must be an object");
      return c;
    }
    allow_only(j, path, {"id", "title", "tasks"});
    c.id = str(j, path, "id", true, true);
    c.title = str(j, path, "title", false);
    if (!j.contains("tasks") || !j["tasks"].is_array()) {
      error(path, "'tasks' must be an array");
      return c;
    }
    if (j["tasks"].empty()) error(path, "a checkpoint needs at least one task");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j["tasks"].size(); ++i) {
      const auto tpath = path + ".task[" + std::to_string(i) + "]";
      c.tasks.push_back(task(j["tasks"][i], tpath));
      const auto& id = c.tasks.back().id;
      if (!id.empty() && !seen.insert(id).second) error(tpath, "duplicate task id '" + id + "'");
    }
    return c;
  }
};

}  // namespace detail

/// Parses and validates a configuration; throws ConfigError listing every violation.
inline ConfigParseResult parse_checkpoint_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::vector<ConfigDiagnostic>{{"$", std::string("not valid JSON: ") + e.what()}});
  }
  detail::ConfigReader reader;
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    reader.allow_only(doc, "$", {"checkpoints"});
    if (!doc.contains("checkpoints")) throw ConfigError(std::vector<ConfigDiagnostic>{{"$", "missing field 'checkpoints'"}});
    list = &doc["checkpoints"];
  }
  if (!list->is_array()) throw ConfigError(std::vector<ConfigDiagnostic>{{"$", "'checkpoints' must be an array"}});
  ConfigParseResult result;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto path = "checkpoint[" + std::to_string(i) + "]";
    result.checkpoints.push_back(reader.checkpoint((*list)[i], path));
    const auto& id = result.checkpoints.back().id;
    if (!id.empty() && !seen.insert(id).second) reader.error(path, "duplicate checkpoint id '" + id + "'");
  }
  if (!reader.errors.empty()) throw ConfigError(std::move(reader.errors));
  result.diagnostics = std::move(reader.warnings);
  return result;
}

/// Validates a single task given as JSON (used for provider replies).
inline Task parse_task_json(const nlohmann::json& j, const std::string& path = "task") {
  detail::ConfigReader reader;
  Task t = reader.task(j, path);
  if (!reader.errors.empty()) throw ConfigError(std::move(reader.errors));
  return t;
}

/// Validates a task built in memory by round-tripping it through the config reader.
inline void validate_task(const Task& t) { parse_task_json(to_json(t)); }

struct TaskRef {
  const Checkpoint* checkpoint = nullptr;
  const Task* task = nullptr;
};

/// Finds "task_id" or "checkpoint_id/task_id".
inline std::optional<TaskRef> find_task(const std::vector<Checkpoint>& checkpoints, std::string_view key) {
  const auto slash = key.find('/');
  for (const auto& c : checkpoints) {
    if (slash != std::string_view::npos && c.id != key.substr(0, slash)) continue;
    const auto want = slash == std::string_view::npos ? key : key.substr(slash + 1);
    for (const auto& t : c.tasks) {
      if (t.id == want) return TaskRef{&c, &t};
    }
  }
  return std::nullopt;
}

}  // namespace spark
