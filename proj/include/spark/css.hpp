#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "spark/selector.hpp"

namespace spark {

struct Declaration {
  std::string property;  // lowercased
  std::string value;     // raw, trimmed, without !important
  bool important = false;

  friend bool operator==(const Declaration&, const Declaration&) = default;
};

struct Rule {
  std::string selector_text;
  SelectorList selectors;
  std::vector<Declaration> declarations;
  std::size_t source_index = 0;  // position among the sheet's kept rules
};

struct Stylesheet {
  std::vector<Rule> rules;
  std::size_t dropped = 0;
};

struct CssParseResult {
  Stylesheet sheet;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string strip_comments(std::string_view s, std::vector<std::string>& diags) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' || s[i] == '\'') {
      const char q = s[i];
      out.push_back(s[i]);
      for (++i; i < s.size() && s[i] != q; ++i) out.push_back(s[i]);
      if (i < s.size()) out.push_back(s[i]);
      continue;
    }
    if (s.substr(i, 2) == "/*") {
      const std::size_t close = s.find("*/", i + 2);
      if (close == std::string_view::npos) {
        diags.push_back("unterminated comment");
        break;
      }
      out.push_back(' ');
      i = close + 1;
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

/// Index just past the '}' closing the block opened at `open`, or npos.
inline std::size_t block_end(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"' || c == '\'') {
      const std::size_t close = s.find(c, i + 1);
      if (close == std::string_view::npos) return std::string_view::npos;
      i = close;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

inline bool valid_property_name(std::string_view p) {
  if (p.empty()) return false;
  for (char c : p) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

}  // namespace detail

/// Splits a declaration block body ("a: b; c: d !important") into declarations.
/// Malformed entries are skipped with a diagnostic.
inline std::vector<Declaration> parse_declarations(std::string_view body, std::vector<std::string>& diags) {
  std::vector<Declaration> out;
  std::size_t start = 0;
  int parens = 0;
  char quote = 0;
  auto flush = [&](std::size_t end) {
    const auto part = detail::trim(body.substr(start, end - start));
    start = end + 1;
    if (part.empty()) return;
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) {
      diags.push_back("declaration without ':' skipped: '" + std::string(part) + "'");
      return;
    }
    Declaration d;
    d.property = ascii_lower(detail::trim(part.substr(0, colon)));
    auto value = detail::trim(part.substr(colon + 1));
    const auto bang = value.rfind('!');
    if (bang != std::string_view::npos && ascii_lower(detail::trim(value.substr(bang + 1))) == "important") {
      d.important = true;
      value = detail::trim(value.substr(0, bang));
    }
    d.value = std::string(value);
    if (!detail::valid_property_name(d.property)) {
      diags.push_back("invalid property name '" + d.property + "' skipped");
      return;
    }
    if (d.value.empty()) {
      diags.push_back("empty value for '" + d.property + "' skipped");
      return;
    }
    out.push_back(std::move(d));
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '(') {
      ++parens;
    } else if (c == ')') {
      if (parens > 0) --parens;
    } else if (c == ';' && parens == 0) {
      flush(i);
    }
  }
  flush(body.size());
  return out;
}

inline CssParseResult parse_css(std::string_view text) {
  CssParseResult result;
  auto& diags = result.diagnostics;
  auto& sheet = result.sheet;
  const std::string src = detail::strip_comments(text, diags);
  const std::string_view s(src);
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (s[i] == '}') {
      diags.push_back("stray '}' at offset " + std::to_string(i));
      ++i;
      continue;
    }
    if (s[i] == '@') {
      std::size_t j = i;
      while (j < s.size() && s[j] != ';' && s[j] != '{') ++j;
      const std::string name(detail::trim(s.substr(i, j - i)));
      if (j < s.size() && s[j] == '{') {
        const std::size_t end = detail::block_end(s, j);
        i = end == std::string_view::npos ? s.size() : end;
      } else {
        i = j + 1;
      }
      diags.push_back("at-rule '" + name + "' skipped");
      ++sheet.dropped;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j] != '{' && s[j] != '}' && s[j] != ';') ++j;
    if (j >= s.size()) {
      diags.push_back("rule without a block dropped: '" + std::string(detail::trim(s.substr(i))) + "'");
      ++sheet.dropped;
      break;
    }
    if (s[j] != '{') {
      diags.push_back("malformed rule prelude dropped: '" + std::string(detail::trim(s.substr(i, j - i))) + "'");
      ++sheet.dropped;
      i = s[j] == ';' ? j + 1 : j;
      continue;
    }
    const std::size_t end = detail::block_end(s, j);
    const std::string prelude(detail::trim(s.substr(i, j - i)));
    if (end == std::string_view::npos) {
      diags.push_back("unterminated block for '" + prelude + "' dropped");
      ++sheet.dropped;
      break;
    }
    const auto body = s.substr(j + 1, end - j - 2);
    i = end;
    Rule rule;
    try {
      rule.selectors = parse_selector(prelude);
    } catch (const SelectorError& e) {
      diags.push_back(std::string("rule dropped: ") + e.what());
      ++sheet.dropped;
      continue;
    }
    rule.selector_text = prelude;
    rule.declarations = parse_declarations(body, diags);
    rule.source_index = sheet.rules.size();
    sheet.rules.push_back(std::move(rule));
  }
  return result;
}

}  // namespace spark
