#pragma once

// Test suggestion: the prompt handed to a model, the provider seam, and the
// offline keyword heuristic.

#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "spark/checkpoints.hpp"
#include "spark/document_store.hpp"
#include "spark/error.hpp"
#include "spark/page.hpp"

namespace spark {

struct SuggestionRequest {
  std::string description;
  FileMap reference;
  /// Element the task is about, when the caller already knows it.
  std::optional<std::string> target_selector;
};

struct SuggestionResult {
  std::vector<InteractionStep> interaction;
  std::vector<Assertion> assertions;
  std::string provider;
  bool low_confidence = false;
};

inline nlohmann::json to_json(const SuggestionResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.interaction) steps.push_back(to_json(s));
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& a : r.assertions) checks.push_back(to_json(a));
  return {{"interaction", steps}, {"assertions", checks}, {"provider", r.provider}, {"low_confidence", r.low_confidence}};
}

inline constexpr std::string_view kPromptTemplate =
    "Generate Puppeteer code to achieve the required interaction and evaluation for:\n"
    "[taskDescription].\n"
    "The reference code answer is: [referenceCode].\n"
    "Evaluation should be done by getting the element, get the requirement from the element, and return if the "
    "requirement is met. If no interaction is needed, just evaluate.\n"
    "Do not reply with any natural language text, only the JavaScript code. Do not include any comment. A reply "
    "example is as follows: const selector = '';\nawait page.click(selector);\n";

inline constexpr std::string_view kReplyContract =
    "\nOutput contract (overrides the reply format above): reply only a single object with fields interaction and "
    "assertions in the checkpoint assertion schema.\n"
    "interaction: array of steps, each one of {\"kind\":\"click\",\"selector\":S}, "
    "{\"kind\":\"type_text\",\"selector\":S,\"text\":T}, {\"kind\":\"hover\",\"selector\":S}, "
    "{\"kind\":\"wait\",\"milliseconds\":N} with N <= 10000.\n"
    "assertions: non-empty array, each one of {\"kind\":\"exists\",\"selector\":S,\"min_count\":N}, "
    "{\"kind\":\"count\",\"selector\":S,\"comparator\":\"=\"|\">=\"|\"<=\",\"n\":N}, "
    "{\"kind\":\"attribute\",\"selector\":S,\"attribute\":A,\"expected\":V}, "
    "{\"kind\":\"text\",\"selector\":S,\"expected\":V,\"mode\":\"exact\"|\"contains\"}, "
    "{\"kind\":\"style\",\"selector\":S,\"property\":P,\"expected\":V}, "
    "{\"kind\":\"rule_declared\",\"selector\":S,\"property\":P,\"expected\":V}, "
    "{\"kind\":\"ancestor\",\"selector\":S,\"ancestor\":S}.\n"
    "Selectors use type, *, #id, .class, :hover, descendant and child combinators, and comma lists.\n";

/// Reference files rendered one after another, each under a "--- path ---" header.
inline std::string render_reference(const FileMap& files) {
  std::string out;
  for (const auto& [path, text] : files) {
    out += "\n--- " + path + " ---\n" + text;
    if (!text.empty() && text.back() != '\n') out += "\n";
  }
  return out;
}

inline std::string build_suggestion_prompt(std::string_view description, const FileMap& reference) {
  std::string prompt(kPromptTemplate);
  auto fill = [&](std::string_view slot, const std::string& value) {
    const auto at = prompt.find(slot);
    if (at != std::string::npos) prompt.replace(at, slot.size(), value);
  };
  // Reference first: a description containing "[referenceCode]" must stay verbatim.
  fill("[referenceCode]", render_reference(reference));
  fill("[taskDescription]", std::string(description));
  return prompt + std::string(kReplyContract);
}

class SuggestionProvider {
 public:
  virtual ~SuggestionProvider() = default;
  virtual std::string name() const = 0;
  virtual SuggestionResult propose(const SuggestionRequest& request) = 0;
};

/// Validates a provider's proposal as a task; schema violations become ProviderError.
inline SuggestionResult suggest_assertions(const SuggestionRequest& request, SuggestionProvider& provider) {
  SuggestionResult result = provider.propose(request);
  result.provider = provider.name();
  try {
    validate_task(Task{"suggested", request.description, result.interaction, result.assertions});
  } catch (const ConfigError& e) {
    throw ProviderError(provider.name() + " returned an invalid proposal: " + e.what());
  }
  return result;
}

/// Parses a model reply holding the contract object, tolerating surrounding
/// prose or code fences.
inline SuggestionResult parse_provider_reply(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw ProviderError("provider reply holds no object");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError(std::string("provider reply is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("assertions")) throw ProviderError("provider reply lacks 'assertions'");
  nlohmann::json task{{"id", "suggested"},
                      {"description", ""},
                      {"interaction", j.value("interaction", nlohmann::json::array())},
                      {"assertions", j["assertions"]}};
  try {
    Task t = parse_task_json(task, "reply");
    return SuggestionResult{std::move(t.interaction), std::move(t.assertions), "", false};
  } catch (const ConfigError& e) {
    throw ProviderError(std::string("provider reply violates the schema: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Keyword heuristic

class HeuristicProvider : public SuggestionProvider {
 public:
  std::string name() const override { return "heuristic"; }

  SuggestionResult propose(const SuggestionRequest& request) override {
    SuggestionResult out;
    const std::string text = ascii_lower(request.description);
    const auto page = load_page(request.reference);

    std::optional<std::string> target = request.target_selector;
    if (!target) target = first_token(request.description);

    struct Want {
      std::string property;
      std::string value;
      bool hover = false;
    };
    std::vector<Want> wants;

    // Everything after the word "hover" describes the hover state.
    const auto hover_at = text.find("hover");
    auto in_hover = [&](std::size_t pos) { return hover_at != std::string::npos && pos > hover_at; };

    static const std::regex border_re(R"((\d+(?:\.\d+)?px)\s+(solid|dashed|dotted|double)\s+(#[0-9a-f]{3,6}|[a-z]+))");
    std::string rest = text;
    for (std::sregex_iterator it(text.begin(), text.end(), border_re), end; it != end; ++it) {
      wants.push_back({"border", it->str(), in_hover(static_cast<std::size_t>(it->position()))});
      rest.replace(static_cast<std::size_t>(it->position()), static_cast<std::size_t>(it->length()),
                   static_cast<std::size_t>(it->length()), ' ');
    }

    static const std::regex px_re(R"((\d+(?:\.\d+)?)px)");
    for (std::sregex_iterator it(rest.begin(), rest.end(), px_re), end; it != end; ++it) {
      const auto pos = static_cast<std::size_t>(it->position());
      wants.push_back({length_property_near(rest, pos), it->str(), in_hover(pos)});
    }

    static const std::regex word_re(R"([a-z]+)");
    for (std::sregex_iterator it(rest.begin(), rest.end(), word_re), end; it != end; ++it) {
      const auto word = it->str();
      const auto pos = static_cast<std::size_t>(it->position());
      if (word == "bold") {
        wants.push_back({"font-weight", "bold", in_hover(pos)});
      } else if (detail::named_color(word)) {
        const bool background = rest.substr(0, pos).find("background") != std::string::npos;
        wants.push_back({background ? "background-color" : "color", word, in_hover(pos)});
      }
    }

    const bool present = target && page && !query_safe(*page, *target).empty();
    if (target && present) out.assertions.push_back(check::Exists{*target, 1});
    for (const auto& w : wants) {
      if (!target) break;
      if (w.hover || !present) {
        const std::string sel = w.hover ? hover_selector(*target) : *target;
        out.assertions.push_back(check::RuleDeclared{sel, w.property, w.value});
      } else {
        out.assertions.push_back(check::Style{*target, w.property, w.value});
      }
    }

    if (out.assertions.empty()) {
      out.low_confidence = true;
      out.assertions.push_back(check::Exists{fallback_selector(page), 1});
    }
    return out;
  }

 private:
  static std::optional<std::string> first_token(const std::string& s) {
    static const std::regex tok_re(R"((^|[^A-Za-z0-9_])([#.][A-Za-z_][A-Za-z0-9_-]*))");
    std::smatch m;
    if (!std::regex_search(s, m, tok_re)) return std::nullopt;
    return m[2].str();
  }

  static std::string length_property_near(const std::string& text, std::size_t pos) {
    // Closest preceding property word wins.
    static constexpr std::pair<std::string_view, std::string_view> kWords[] = {
        {"font size", "font-size"}, {"font-size", "font-size"}, {"width", "width"},  {"height", "height"},
        {"margin", "margin"},       {"padding", "padding"},     {"gap", "gap"},      {"radius", "border-radius"},
        {"border", "border-width"}, {"font", "font-size"},      {"size", "font-size"}};
    std::size_t best_at = std::string::npos;
    std::string_view best = "width";
    const auto head = text.substr(0, pos);
    for (const auto& [word, prop] : kWords) {
      const auto at = head.rfind(word);
      if (at == std::string::npos) continue;
      if (best_at == std::string::npos || at + word.size() > best_at) {
        best_at = at + word.size();
        best = prop;
      }
    }
    return std::string(best);
  }

  static std::string hover_selector(const std::string& target) {
    auto list = parse_selector(target);
    for (auto& alt : list.alternatives) {
      auto& pcs = alt.compounds.back().pseudo_classes;
      if (std::find(pcs.begin(), pcs.end(), "hover") == pcs.end()) pcs.push_back("hover");
    }
    return serialize(list);
  }

  static std::vector<NodeId> query_safe(const Page& page, const std::string& selector) {
    try {
      return query(parse_selector(selector), page.tree);
    } catch (const SelectorError&) {
      return {};
    }
  }

  static std::string fallback_selector(const std::optional<Page>& page) {
    if (page) {
      for (NodeId id : page->tree.elements()) {
        if (auto v = page->tree.attribute(id, "id"); v && !v->empty()) {
          const std::string sel = "#" + std::string(*v);
          try {
            parse_selector(sel);
            return sel;
          } catch (const SelectorError&) {
          }
        }
      }
    }
    return "body";
  }
};

}  // namespace spark
