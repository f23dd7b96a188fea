#pragma once

// Cascade resolution for one element and the canonical element serialization
// used for fingerprints.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "spark/css.hpp"
#include "spark/html.hpp"
#include "spark/normalize.hpp"
#include "spark/selector.hpp"

namespace spark {

enum class Origin { Inline, Rule, Inherited };

struct Provenance {
  Origin origin = Origin::Rule;
  std::size_t sheet = 0;  // meaningful for Origin::Rule
  std::size_t rule = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct StyleEntry {
  std::string value;  // canonical, see normalize_value
  Provenance provenance;

  friend bool operator==(const StyleEntry&, const StyleEntry&) = default;
};

using StyleMap = std::map<std::string, StyleEntry>;

inline bool is_inherited_property(std::string_view p) {
  return p == "font-size" || p == "font-weight" || p == "color" || p == "text-align";
}

/// Cascade rank of one applicable declaration; larger wins.
struct CascadeRank {
  bool important = false;
  bool is_inline = false;
  Specificity specificity;
  std::size_t sheet = 0;
  std::size_t rule = 0;
  std::size_t declaration = 0;

  auto tie() const { return std::tie(important, is_inline, specificity, sheet, rule, declaration); }
  friend bool operator<(const CascadeRank& a, const CascadeRank& b) { return a.tie() < b.tie(); }
};

/// Highest specificity among the alternatives of `list` that match `id`.
inline std::optional<Specificity> matching_specificity(const DomTree& tree, NodeId id, const SelectorList& list) {
  std::optional<Specificity> best;
  for (const auto& alt : list.alternatives) {
    if (matches(tree, id, alt)) {
      const auto s = specificity(alt);
      if (!best || *best < s) best = s;
    }
  }
  return best;
}

namespace detail {

inline StyleMap declared_style(NodeId id, std::span<const Stylesheet> sheets, const DomTree& tree) {
  std::map<std::string, std::pair<CascadeRank, StyleEntry>> winners;
  auto offer = [&](const Declaration& d, const CascadeRank& rank, const Provenance& prov) {
    auto it = winners.find(d.property);
    if (it == winners.end() || it->second.first < rank) {
      winners[d.property] = {rank, StyleEntry{normalize_value(d.property, d.value), prov}};
    }
  };
  for (std::size_t s = 0; s < sheets.size(); ++s) {
    for (std::size_t r = 0; r < sheets[s].rules.size(); ++r) {
      const auto& rule = sheets[s].rules[r];
      const auto spec = matching_specificity(tree, id, rule.selectors);
      if (!spec) continue;
      for (std::size_t k = 0; k < rule.declarations.size(); ++k) {
        const auto& d = rule.declarations[k];
        offer(d, CascadeRank{d.important, false, *spec, s, r, k}, Provenance{Origin::Rule, s, r});
      }
    }
  }
  if (auto style = tree.attribute(id, "style")) {
    std::vector<std::string> ignored;
    const auto decls = parse_declarations(*style, ignored);
    for (std::size_t k = 0; k < decls.size(); ++k) {
      offer(decls[k], CascadeRank{decls[k].important, true, {}, 0, 0, k}, Provenance{Origin::Inline, 0, 0});
    }
  }
  StyleMap out;
  for (auto& [prop, winner] : winners) out.emplace(prop, std::move(winner.second));
  return out;
}

}  // namespace detail

/// Winning value per declared property: importance, then inline, then
/// specificity, then source order. The four inherited properties fall back
/// to the nearest ancestor's computed value.
inline StyleMap computed_style(NodeId id, std::span<const Stylesheet> sheets, const DomTree& tree) {
  StyleMap style = detail::declared_style(id, sheets, tree);
  static constexpr std::string_view kInherited[] = {"color", "font-size", "font-weight", "text-align"};
  std::vector<std::string_view> missing;
  for (auto p : kInherited) {
    if (!style.contains(std::string(p))) missing.push_back(p);
  }
  for (NodeId up = tree.parent_element(id); up != kNoNode && !missing.empty(); up = tree.parent_element(up)) {
    const StyleMap above = detail::declared_style(up, sheets, tree);
    for (auto it = missing.begin(); it != missing.end();) {
      auto hit = above.find(std::string(*it));
      if (hit != above.end()) {
        style.emplace(hit->first, StyleEntry{hit->second.value, Provenance{Origin::Inherited, 0, 0}});
        it = missing.erase(it);
      } else {
        ++it;
      }
    }
  }
  return style;
}

struct StyleContext {
  const DomTree& tree;
  std::span<const Stylesheet> sheets;
  /// When set, only these properties appear in serialized style maps.
  std::optional<std::set<std::string>> properties;
};

namespace detail {

inline void quote_into(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

inline void serialize_into(std::string& out, NodeId id, const StyleContext& ctx) {
  const auto& n = ctx.tree.node(id);
  if (n.kind == NodeKind::Text) {
    const auto t = trim(n.text);
    if (!t.empty()) quote_into(out, t);
    return;
  }
  if (n.kind == NodeKind::Document) {
    for (NodeId c : n.children) serialize_into(out, c, ctx);
    return;
  }
  out += "<" + n.tag;
  auto attrs = n.attributes;
  std::sort(attrs.begin(), attrs.end());
  for (const auto& [k, v] : attrs) {
    out += " " + k + "=";
    quote_into(out, v);
  }
  out += " {";
  bool first = true;
  for (const auto& [prop, entry] : computed_style(id, ctx.sheets, ctx.tree)) {
    if (ctx.properties && !ctx.properties->contains(prop)) continue;
    if (!first) out += ";";
    first = false;
    out += prop + ":";
    quote_into(out, entry.value);
  }
  out += "}>";
  for (NodeId c : n.children) serialize_into(out, c, ctx);
  out += "</" + n.tag + ">";
}

}  // namespace detail

/// Deterministic serialization of `id` and its subtree: tag, sorted
/// attributes, sorted computed style, then children. Whitespace-only text
/// is dropped and other text trimmed.
inline std::string serialize_normalized(NodeId id, const StyleContext& ctx) {
  std::string out;
  detail::serialize_into(out, id, ctx);
  return out;
}

}  // namespace spark
