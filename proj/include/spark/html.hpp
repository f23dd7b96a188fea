#pragma once

// Forgiving HTML parser for a bounded subset: elements, attributes, text,
// comments (dropped), raw-text <script>/<style> bodies, and the four basic
// entities. Recovery never aborts; each recovery is reported as a diagnostic.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spark {

enum class NodeKind { Document, Element, Text };

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

struct DomNode {
  NodeKind kind = NodeKind::Element;
  std::string tag;  // lowercased; empty for text and document
  std::vector<std::pair<std::string, std::string>> attributes;  // source order, names lowercased
  std::string text;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
};

inline bool is_void_element(std::string_view tag) {
  static constexpr std::string_view kVoid[] = {"area", "base", "br",   "col",   "embed",  "hr",    "img",
                                               "input", "link", "meta", "param", "source", "track", "wbr"};
  return std::find(std::begin(kVoid), std::end(kVoid), tag) != std::end(kVoid);
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Arena-backed tree; node 0 is the document root. Ids are assigned in
/// creation order, which the parser makes equal to document order.
class DomTree {
 public:
  DomTree() { nodes_.push_back(DomNode{NodeKind::Document, {}, {}, {}, kNoNode, {}}); }

  static constexpr NodeId root() { return 0; }
  const DomNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  NodeId add_element(NodeId parent, std::string tag,
                     std::vector<std::pair<std::string, std::string>> attributes = {}) {
    return add(parent, DomNode{NodeKind::Element, ascii_lower(tag), std::move(attributes), {}, parent, {}});
  }
  NodeId add_text(NodeId parent, std::string text) {
    return add(parent, DomNode{NodeKind::Text, {}, {}, std::move(text), parent, {}});
  }

  bool is_element(NodeId id) const { return nodes_.at(id).kind == NodeKind::Element; }

  std::optional<std::string_view> attribute(NodeId id, std::string_view name) const {
    for (const auto& [k, v] : nodes_.at(id).attributes) {
      if (k == name) return std::string_view(v);
    }
    return std::nullopt;
  }

  bool has_class(NodeId id, std::string_view cls) const {
    auto list = attribute(id, "class");
    if (!list) return false;
    std::size_t i = 0;
    const auto s = *list;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i && s.substr(i, j - i) == cls) return true;
      i = j;
    }
    return false;
  }

  /// Element ids in document (pre-)order.
  std::vector<NodeId> elements() const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{root()};
    while (!stack.empty()) {
      const NodeId id = stack.back();
      stack.pop_back();
      if (is_element(id)) out.push_back(id);
      const auto& kids = nodes_[id].children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return out;
  }

  /// Nearest element ancestor, or kNoNode.
  NodeId parent_element(NodeId id) const {
    const NodeId p = nodes_.at(id).parent;
    return (p != kNoNode && is_element(p)) ? p : kNoNode;
  }

  /// Concatenated descendant text with whitespace runs collapsed and ends trimmed.
  std::string text_content(NodeId id) const {
    std::string raw;
    collect_text(id, raw);
    std::string out;
    bool space = false;
    for (char c : raw) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        space = !out.empty();
      } else {
        if (space) out.push_back(' ');
        space = false;
        out.push_back(c);
      }
    }
    return out;
  }

 private:
  NodeId add(NodeId parent, DomNode n) {
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(n));
    nodes_.at(parent).children.push_back(id);
    return id;
  }

  void collect_text(NodeId id, std::string& out) const {
    const auto& n = nodes_[id];
    if (n.kind == NodeKind::Text) {
      out += n.text;
      return;
    }
    if (n.tag == "script" || n.tag == "style") return;
    for (NodeId c : n.children) collect_text(c, out);
  }

  std::vector<DomNode> nodes_;
};

struct HtmlParseResult {
  DomTree tree;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '&') {
      static constexpr std::pair<std::string_view, char> kEntities[] = {
          {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}};
      bool hit = false;
      for (const auto& [name, ch] : kEntities) {
        if (s.substr(i, name.size()) == name) {
          out.push_back(ch);
          i += name.size() - 1;
          hit = true;
          break;
        }
      }
      if (hit) continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < needle.size() && eq; ++k) {
      eq = std::tolower(static_cast<unsigned char>(hay[i + k])) == needle[k];
    }
    if (eq) return i;
  }
  return std::string_view::npos;
}

}  // namespace detail

inline HtmlParseResult parse_html(std::string_view src) {
  HtmlParseResult result;
  auto& tree = result.tree;
  auto& diags = result.diagnostics;
  std::vector<NodeId> open{DomTree::root()};
  std::size_t i = 0;

  auto emit_text = [&](std::string_view raw) {
    if (!raw.empty()) tree.add_text(open.back(), detail::decode_entities(raw));
  };

  while (i < src.size()) {
    if (src[i] != '<') {
      const std::size_t next = std::min(src.find('<', i), src.size());
      emit_text(src.substr(i, next - i));
      i = next;
      continue;
    }
    if (src.substr(i, 4) == "<!--") {
      const std::size_t close = src.find("-->", i + 4);
      if (close == std::string_view::npos) {
        diags.push_back("unterminated comment at offset " + std::to_string(i));
        i = src.size();
      } else {
        i = close + 3;
      }
      continue;
    }
    if (i + 1 < src.size() && (src[i + 1] == '!' || src[i + 1] == '?')) {
      const std::size_t close = src.find('>', i);
      i = close == std::string_view::npos ? src.size() : close + 1;
      continue;
    }
    if (i + 1 < src.size() && src[i + 1] == '/') {
      std::size_t j = i + 2;
      while (j < src.size() && detail::is_name_char(src[j])) ++j;
      const std::string name = ascii_lower(src.substr(i + 2, j - i - 2));
      const std::size_t close = src.find('>', j);
      i = close == std::string_view::npos ? src.size() : close + 1;
      if (name.empty()) {
        diags.push_back("malformed end tag ignored");
        continue;
      }
      if (is_void_element(name)) {
        diags.push_back("end tag </" + name + "> for void element ignored");
        continue;
      }
      auto it = std::find_if(open.rbegin(), open.rend() - 1,
                             [&](NodeId id) { return tree.node(id).tag == name; });
      if (it == open.rend() - 1) {
        diags.push_back("stray end tag </" + name + "> ignored");
        continue;
      }
      const auto keep = static_cast<std::size_t>(open.rend() - it) - 1;  // index of the matched element
      for (std::size_t k = open.size() - 1; k > keep; --k) {
        diags.push_back("unclosed <" + tree.node(open[k]).tag + "> auto-closed by </" + name + ">");
      }
      open.resize(keep);
      continue;
    }
    if (i + 1 >= src.size() || !std::isalpha(static_cast<unsigned char>(src[i + 1]))) {
      emit_text("<");
      ++i;
      continue;
    }

    // Start tag.
    std::size_t j = i + 1;
    while (j < src.size() && detail::is_name_char(src[j])) ++j;
    const std::string tag = ascii_lower(src.substr(i + 1, j - i - 1));
    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    bool terminated = false;
    while (j < src.size()) {
      while (j < src.size() && detail::is_space(src[j])) ++j;
      if (j >= src.size()) break;
      if (src[j] == '>') {
        ++j;
        terminated = true;
        break;
      }
      if (src.substr(j, 2) == "/>") {
        j += 2;
        self_closing = true;
        terminated = true;
        break;
      }
      if (src[j] == '/') {
        ++j;
        continue;
      }
      std::size_t k = j;
      while (k < src.size() && !detail::is_space(src[k]) && src[k] != '=' && src[k] != '>' &&
             src.substr(k, 2) != "/>") {
        ++k;
      }
      std::string name = ascii_lower(src.substr(j, k - j));
      std::string value;
      j = k;
      while (j < src.size() && detail::is_space(src[j])) ++j;
      if (j < src.size() && src[j] == '=') {
        ++j;
        while (j < src.size() && detail::is_space(src[j])) ++j;
        if (j < src.size() && (src[j] == '"' || src[j] == '\'')) {
          const char q = src[j];
          const std::size_t close = src.find(q, j + 1);
          if (close == std::string_view::npos) {
            diags.push_back("unterminated attribute value for '" + name + "'");
            value = detail::decode_entities(src.substr(j + 1));
            j = src.size();
          } else {
            value = detail::decode_entities(src.substr(j + 1, close - j - 1));
            j = close + 1;
          }
        } else {
          std::size_t e = j;
          while (e < src.size() && !detail::is_space(src[e]) && src[e] != '>') ++e;
          value = detail::decode_entities(src.substr(j, e - j));
          j = e;
        }
      }
      if (name.empty()) {
        ++j;
        continue;
      }
      const bool dup = std::any_of(attrs.begin(), attrs.end(), [&](const auto& a) { return a.first == name; });
      if (dup) {
        diags.push_back("duplicate attribute '" + name + "' on <" + tag + "> ignored");
      } else {
        attrs.emplace_back(std::move(name), std::move(value));
      }
    }
    if (!terminated) diags.push_back("unterminated start tag <" + tag + ">");
    i = j;

    const NodeId el = tree.add_element(open.back(), tag, std::move(attrs));
    if (is_void_element(tag) || self_closing) continue;

    if (tag == "script" || tag == "style") {
      const std::size_t close = detail::find_ci(src, "</" + tag, i);
      const std::size_t body_end = close == std::string_view::npos ? src.size() : close;
      if (body_end > i) tree.add_text(el, std::string(src.substr(i, body_end - i)));
      if (close == std::string_view::npos) {
        diags.push_back("unclosed <" + tag + "> auto-closed at end of input");
        i = src.size();
      } else {
        const std::size_t gt = src.find('>', close);
        i = gt == std::string_view::npos ? src.size() : gt + 1;
      }
      continue;
    }
    open.push_back(el);
  }

  for (std::size_t k = open.size() - 1; k > 0; --k) {
    diags.push_back("unclosed <" + tree.node(open[k]).tag + "> auto-closed at end of input");
  }
  return result;
}

}  // namespace spark
