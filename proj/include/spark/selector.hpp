#pragma once

// Selector subset: compounds of type / * / #id / .class / :hover joined by
// descendant and child combinators, comma-separated into lists.

#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "spark/error.hpp"
#include "spark/html.hpp"

namespace spark {

struct Compound {
  std::string type;  // lowercased; empty when absent
  bool universal = false;
  std::vector<std::string> ids;
  std::vector<std::string> classes;
  std::vector<std::string> pseudo_classes;  // only "hover" parses

  friend bool operator==(const Compound&, const Compound&) = default;
};

enum class Combinator { Descendant, Child };

struct ComplexSelector {
  std::vector<Compound> compounds;        // left to right
  std::vector<Combinator> combinators;    // combinators[i] joins compounds[i] and compounds[i + 1]

  friend bool operator==(const ComplexSelector&, const ComplexSelector&) = default;
};

struct SelectorList {
  std::vector<ComplexSelector> alternatives;

  friend bool operator==(const SelectorList&, const SelectorList&) = default;
};

struct Specificity {
  int ids = 0;
  int classes = 0;  // classes and pseudo-classes
  int types = 0;

  friend auto operator<=>(const Specificity&, const Specificity&) = default;
};

inline Specificity specificity(const ComplexSelector& s) {
  Specificity out;
  for (const auto& c : s.compounds) {
    out.ids += static_cast<int>(c.ids.size());
    out.classes += static_cast<int>(c.classes.size() + c.pseudo_classes.size());
    out.types += c.type.empty() ? 0 : 1;
  }
  return out;
}

namespace detail {

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

class SelectorParser {
 public:
  explicit SelectorParser(std::string_view s) : s_(s) {}

  SelectorList parse_list() {
    SelectorList list;
    while (true) {
      list.alternatives.push_back(parse_complex());
      skip_ws();
      if (at_end()) break;
      if (s_[i_] != ',') fail("unexpected '" + std::string(1, s_[i_]) + "'");
      ++i_;
    }
    return list;
  }

 private:
  ComplexSelector parse_complex() {
    ComplexSelector cs;
    skip_ws();
    cs.compounds.push_back(parse_compound());
    while (true) {
      const bool had_ws = skip_ws();
      if (at_end() || s_[i_] == ',') break;
      if (s_[i_] == '>') {
        ++i_;
        skip_ws();
        cs.combinators.push_back(Combinator::Child);
      } else if (had_ws) {
        cs.combinators.push_back(Combinator::Descendant);
      } else {
        fail("unexpected '" + std::string(1, s_[i_]) + "'");
      }
      cs.compounds.push_back(parse_compound());
    }
    return cs;
  }

  Compound parse_compound() {
    Compound c;
    bool any = false;
    if (!at_end() && s_[i_] == '*') {
      c.universal = true;
      ++i_;
      any = true;
    } else if (!at_end() && std::isalpha(static_cast<unsigned char>(s_[i_]))) {
      c.type = ascii_lower(ident());
      any = true;
    }
    while (!at_end()) {
      const char ch = s_[i_];
      if (ch == '#') {
        ++i_;
        c.ids.push_back(ident());
      } else if (ch == '.') {
        ++i_;
        c.classes.push_back(ident());
      } else if (ch == ':') {
        ++i_;
        auto name = ascii_lower(ident());
        if (name != "hover") fail("unsupported pseudo-class ':" + name + "'");
        c.pseudo_classes.push_back(name);
      } else {
        break;
      }
      any = true;
    }
    if (!any) fail(at_end() ? "expected a compound selector" : "unexpected '" + std::string(1, s_[i_]) + "'");
    return c;
  }

  std::string ident() {
    const std::size_t start = i_;
    while (!at_end() && is_ident_char(s_[i_])) ++i_;
    if (i_ == start) fail("expected an identifier");
    return std::string(s_.substr(start, i_ - start));
  }

  bool skip_ws() {
    const std::size_t start = i_;
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    return i_ > start;
  }

  bool at_end() const { return i_ >= s_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    throw SelectorError("selector '" + std::string(s_) + "': " + why + " at offset " + std::to_string(i_));
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline SelectorList parse_selector(std::string_view text) { return detail::SelectorParser(text).parse_list(); }

inline std::string serialize(const Compound& c) {
  std::string out = c.universal ? "*" : c.type;
  for (const auto& id : c.ids) out += "#" + id;
  for (const auto& cls : c.classes) out += "." + cls;
  for (const auto& p : c.pseudo_classes) out += ":" + p;
  return out;
}

inline std::string serialize(const ComplexSelector& s) {
  std::string out;
  for (std::size_t i = 0; i < s.compounds.size(); ++i) {
    if (i > 0) out += s.combinators[i - 1] == Combinator::Child ? " > " : " ";
    out += serialize(s.compounds[i]);
  }
  return out;
}

inline std::string serialize(const SelectorList& list) {
  std::string out;
  for (std::size_t i = 0; i < list.alternatives.size(); ++i) {
    if (i > 0) out += ", ";
    out += serialize(list.alternatives[i]);
  }
  return out;
}

/// State pseudo-classes never match: there is no pointer in static evaluation.
inline bool matches_compound(const DomTree& tree, NodeId id, const Compound& c) {
  if (!tree.is_element(id)) return false;
  if (!c.pseudo_classes.empty()) return false;
  const auto& n = tree.node(id);
  if (!c.type.empty() && n.tag != c.type) return false;
  for (const auto& want : c.ids) {
    auto got = tree.attribute(id, "id");
    if (!got || *got != want) return false;
  }
  for (const auto& cls : c.classes) {
    if (!tree.has_class(id, cls)) return false;
  }
  return true;
}

namespace detail {

inline bool matches_from(const DomTree& tree, NodeId id, const ComplexSelector& s, std::size_t idx) {
  if (!matches_compound(tree, id, s.compounds[idx])) return false;
  if (idx == 0) return true;
  NodeId up = tree.parent_element(id);
  if (s.combinators[idx - 1] == Combinator::Child) {
    return up != kNoNode && matches_from(tree, up, s, idx - 1);
  }
  for (; up != kNoNode; up = tree.parent_element(up)) {
    if (matches_from(tree, up, s, idx - 1)) return true;
  }
  return false;
}

}  // namespace detail

inline bool matches(const DomTree& tree, NodeId id, const ComplexSelector& s) {
  return !s.compounds.empty() && detail::matches_from(tree, id, s, s.compounds.size() - 1);
}

inline bool matches(const DomTree& tree, NodeId id, const SelectorList& list) {
  for (const auto& alt : list.alternatives) {
    if (matches(tree, id, alt)) return true;
  }
  return false;
}

/// Matching elements in document order.
inline std::vector<NodeId> query(const SelectorList& selector, const DomTree& tree) {
  std::vector<NodeId> out;
  for (NodeId id : tree.elements()) {
    if (matches(tree, id, selector)) out.push_back(id);
  }
  return out;
}

}  // namespace spark
