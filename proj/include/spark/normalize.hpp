#pragma once

// Canonical forms for CSS values so that equivalent spellings compare equal:
// named and short-hex colors become 6-digit hex, numbers lose redundant
// zeros, font-weight keywords become numbers, whitespace collapses.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spark/html.hpp"

namespace spark {

namespace detail {

struct NamedColor {
  std::string_view name;
  std::string_view hex;
};

inline constexpr std::array<NamedColor, 148> kNamedColors{{
    {"aliceblue", "#f0f8ff"}, {"antiquewhite", "#faebd7"}, {"aqua", "#00ffff"},
    {"aquamarine", "#7fffd4"}, {"azure", "#f0ffff"}, {"beige", "#f5f5dc"},
    {"bisque", "#ffe4c4"}, {"black", "#000000"}, {"blanchedalmond", "#ffebcd"},
    {"blue", "#0000ff"}, {"blueviolet", "#8a2be2"}, {"brown", "#a52a2a"},
    {"burlywood", "#deb887"}, {"cadetblue", "#5f9ea0"}, {"chartreuse", "#7fff00"},
    {"chocolate", "#d2691e"}, {"coral", "#ff7f50"}, {"cornflowerblue", "#6495ed"},
    {"cornsilk", "#fff8dc"}, {"crimson", "#dc143c"}, {"cyan", "#00ffff"},
    {"darkblue", "#00008b"}, {"darkcyan", "#008b8b"}, {"darkgoldenrod", "#b8860b"},
    {"darkgray", "#a9a9a9"}, {"darkgreen", "#006400"}, {"darkgrey", "#a9a9a9"},
    {"darkkhaki", "#bdb76b"}, {"darkmagenta", "#8b008b"}, {"darkolivegreen", "#556b2f"},
    {"darkorange", "#ff8c00"}, {"darkorchid", "#9932cc"}, {"darkred", "#8b0000"},
    {"darksalmon", "#e9967a"}, {"darkseagreen", "#8fbc8f"}, {"darkslateblue", "#483d8b"},
    {"darkslategray", "#2f4f4f"}, {"darkslategrey", "#2f4f4f"}, {"darkturquoise", "#00ced1"},
    {"darkviolet", "#9400d3"}, {"deeppink", "#ff1493"}, {"deepskyblue", "#00bfff"},
    {"dimgray", "#696969"}, {"dimgrey", "#696969"}, {"dodgerblue", "#1e90ff"},
    {"firebrick", "#b22222"}, {"floralwhite", "#fffaf0"}, {"forestgreen", "#228b22"},
    {"fuchsia", "#ff00ff"}, {"gainsboro", "#dcdcdc"}, {"ghostwhite", "#f8f8ff"},
    {"gold", "#ffd700"}, {"goldenrod", "#daa520"}, {"gray", "#808080"},
    {"green", "#008000"}, {"greenyellow", "#adff2f"}, {"grey", "#808080"},
    {"honeydew", "#f0fff0"}, {"hotpink", "#ff69b4"}, {"indianred", "#cd5c5c"},
    {"indigo", "#4b0082"}, {"ivory", "#fffff0"}, {"khaki", "#f0e68c"},
    {"lavender", "#e6e6fa"}, {"lavenderblush", "#fff0f5"}, {"lawngreen", "#7cfc00"},
    {"lemonchiffon", "#fffacd"}, {"lightblue", "#add8e6"}, {"lightcoral", "#f08080"},
    {"lightcyan", "#e0ffff"}, {"lightgoldenrodyellow", "#fafad2"}, {"lightgray", "#d3d3d3"},
    {"lightgreen", "#90ee90"}, {"lightgrey", "#d3d3d3"}, {"lightpink", "#ffb6c1"},
    {"lightsalmon", "#ffa07a"}, {"lightseagreen", "#20b2aa"}, {"lightskyblue", "#87cefa"},
    {"lightslategray", "#778899"}, {"lightslategrey", "#778899"}, {"lightsteelblue", "#b0c4de"},
    {"lightyellow", "#ffffe0"}, {"lime", "#00ff00"}, {"limegreen", "#32cd32"},
    {"linen", "#faf0e6"}, {"magenta", "#ff00ff"}, {"maroon", "#800000"},
    {"mediumaquamarine", "#66cdaa"}, {"mediumblue", "#0000cd"}, {"mediumorchid", "#ba55d3"},
    {"mediumpurple", "#9370db"}, {"mediumseagreen", "#3cb371"}, {"mediumslateblue", "#7b68ee"},
    {"mediumspringgreen", "#00fa9a"}, {"mediumturquoise", "#48d1cc"}, {"mediumvioletred", "#c71585"},
    {"midnightblue", "#191970"}, {"mintcream", "#f5fffa"}, {"mistyrose", "#ffe4e1"},
    {"moccasin", "#ffe4b5"}, {"navajowhite", "#ffdead"}, {"navy", "#000080"},
    {"oldlace", "#fdf5e6"}, {"olive", "#808000"}, {"olivedrab", "#6b8e23"},
    {"orange", "#ffa500"}, {"orangered", "#ff4500"}, {"orchid", "#da70d6"},
    {"palegoldenrod", "#eee8aa"}, {"palegreen", "#98fb98"}, {"paleturquoise", "#afeeee"},
    {"palevioletred", "#db7093"}, {"papayawhip", "#ffefd5"}, {"peachpuff", "#ffdab9"},
    {"peru", "#cd853f"}, {"pink", "#ffc0cb"}, {"plum", "#dda0dd"},
    {"powderblue", "#b0e0e6"}, {"purple", "#800080"}, {"rebeccapurple", "#663399"},
    {"red", "#ff0000"}, {"rosybrown", "#bc8f8f"}, {"royalblue", "#4169e1"},
    {"saddlebrown", "#8b4513"}, {"salmon", "#fa8072"}, {"sandybrown", "#f4a460"},
    {"seagreen", "#2e8b57"}, {"seashell", "#fff5ee"}, {"sienna", "#a0522d"},
    {"silver", "#c0c0c0"}, {"skyblue", "#87ceeb"}, {"slateblue", "#6a5acd"},
    {"slategray", "#708090"}, {"slategrey", "#708090"}, {"snow", "#fffafa"},
    {"springgreen", "#00ff7f"}, {"steelblue", "#4682b4"}, {"tan", "#d2b48c"},
    {"teal", "#008080"}, {"thistle", "#d8bfd8"}, {"tomato", "#ff6347"},
    {"turquoise", "#40e0d0"}, {"violet", "#ee82ee"}, {"wheat", "#f5deb3"},
    {"white", "#ffffff"}, {"whitesmoke", "#f5f5f5"}, {"yellow", "#ffff00"},
    {"yellowgreen", "#9acd32"}
}};

inline std::optional<std::string_view> named_color(std::string_view name) {
  auto it = std::lower_bound(kNamedColors.begin(), kNamedColors.end(), name,
                             [](const NamedColor& c, std::string_view n) { return c.name < n; });
  if (it != kNamedColors.end() && it->name == name) return it->hex;
  return std::nullopt;
}

inline bool is_hex_digit(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

inline std::string hex_byte(int v) {
  static constexpr char kHex[] = "0123456789abcdef";
  return {kHex[(v >> 4) & 0xF], kHex[v & 0xF]};
}

/// Lowercased token -> "#rrggbb" when it spells an opaque color.
inline std::optional<std::string> parse_color(std::string_view tok) {
  if (auto hex = named_color(tok)) return std::string(*hex);
  if (!tok.empty() && tok[0] == '#') {
    const auto digits = tok.substr(1);
    if (!std::all_of(digits.begin(), digits.end(), is_hex_digit)) return std::nullopt;
    if (digits.size() == 3) {
      return std::string{'#', digits[0], digits[0], digits[1], digits[1], digits[2], digits[2]};
    }
    if (digits.size() == 6) return std::string(tok);
    return std::nullopt;
  }
  const bool rgba = tok.starts_with("rgba(");
  if ((tok.starts_with("rgb(") || rgba) && tok.ends_with(")")) {
    const auto inner = tok.substr(rgba ? 5 : 4, tok.size() - (rgba ? 6 : 5));
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
      if (i == inner.size() || inner[i] == ',') {
        auto p = inner.substr(start, i - start);
        while (!p.empty() && p.front() == ' ') p.remove_prefix(1);
        while (!p.empty() && p.back() == ' ') p.remove_suffix(1);
        parts.push_back(p);
        start = i + 1;
      }
    }
    if (parts.size() != 3 && parts.size() != 4) return std::nullopt;
    if (parts.size() == 4 && parts[3] != "1" && parts[3] != "1.0") return std::nullopt;
    std::string out = "#";
    for (std::size_t k = 0; k < 3; ++k) {
      int v = -1;
      auto [ptr, ec] = std::from_chars(parts[k].data(), parts[k].data() + parts[k].size(), v);
      if (ec != std::errc{} || ptr != parts[k].data() + parts[k].size() || v < 0 || v > 255) return std::nullopt;
      out += hex_byte(v);
    }
    return out;
  }
  return std::nullopt;
}

inline bool is_length_unit(std::string_view u) {
  static constexpr std::string_view kUnits[] = {"",   "px", "em", "rem", "%",  "vh", "vw", "vmin", "vmax", "pt",
                                                "pc", "cm", "mm", "in",  "ex", "ch", "fr", "s",    "ms",   "deg"};
  return std::find(std::begin(kUnits), std::end(kUnits), u) != std::end(kUnits);
}

struct NumberToken {
  std::string number;  // canonical
  std::string unit;
};

/// "25.0px" -> {"25", "px"}; "+.50em" -> {"0.5", "em"}; "-0" -> {"0", ""}.
inline std::optional<NumberToken> parse_number(std::string_view tok) {
  std::size_t i = 0;
  bool negative = false;
  if (i < tok.size() && (tok[i] == '+' || tok[i] == '-')) negative = tok[i++] == '-';
  const std::size_t int_start = i;
  while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
  std::string_view int_part = tok.substr(int_start, i - int_start);
  std::string_view frac;
  if (i < tok.size() && tok[i] == '.') {
    const std::size_t fs = ++i;
    while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
    frac = tok.substr(fs, i - fs);
  }
  if (int_part.empty() && frac.empty()) return std::nullopt;
  const auto unit = tok.substr(i);
  if (!is_length_unit(unit)) return std::nullopt;
  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);
  std::string number = int_part.empty() ? "0" : std::string(int_part);
  if (!frac.empty()) number += "." + std::string(frac);
  if (negative && number != "0") number = "-" + number;
  return NumberToken{number, std::string(unit)};
}

inline bool color_context(std::string_view property) {
  static constexpr std::string_view kShorthands[] = {
      "background", "border",     "border-top",  "border-right", "border-bottom", "border-left",
      "outline",    "box-shadow", "text-shadow", "text-decoration", "fill",       "stroke"};
  return property == "color" || property.ends_with("-color") ||
         std::find(std::begin(kShorthands), std::end(kShorthands), property) != std::end(kShorthands);
}

inline bool single_color_property(std::string_view property) {
  return property == "color" || property.ends_with("-color");
}

inline bool length_property(std::string_view property) {
  static constexpr std::string_view kProps[] = {"width",     "height",     "font-size", "min-width",
                                                "max-width", "min-height", "max-height"};
  return std::find(std::begin(kProps), std::end(kProps), property) != std::end(kProps);
}

/// Splits on whitespace outside parentheses and quotes. Inside parentheses,
/// whitespace runs collapse and vanish next to '(', ')' and ','.
inline std::vector<std::string> value_tokens(std::string_view v) {
  std::vector<std::string> out;
  std::string cur;
  int parens = 0;
  char quote = 0;
  bool pending_space = false;
  auto push = [&](char c) {
    if (pending_space && !cur.empty() && cur.back() != '(' && cur.back() != ',' && c != ')' && c != ',') {
      cur.push_back(' ');
    }
    pending_space = false;
    cur.push_back(c);
  };
  for (char c : v) {
    if (quote) {
      cur.push_back(c);
      if (c == quote) quote = 0;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (parens > 0) {
        pending_space = true;
      } else if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
      continue;
    }
    if (c == '"' || c == '\'') quote = c;
    if (c == '(') ++parens;
    if (c == ')' && parens > 0) --parens;
    push(c);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

struct NormalizedValue {
  std::string value;
  /// False when the property belongs to the typed set (colors, font-weight,
  /// sizes) but the value fell through as plain text.
  bool recognized = true;
};

inline NormalizedValue normalize_value_checked(std::string_view property, std::string_view raw) {
  const std::string prop = ascii_lower(property);
  const auto tokens = detail::value_tokens(ascii_lower(raw));
  static constexpr std::string_view kGlobal[] = {"inherit", "initial", "unset", "revert"};
  auto is_global = [](std::string_view t) { return std::find(std::begin(kGlobal), std::end(kGlobal), t) != std::end(kGlobal); };

  NormalizedValue out;
  const bool colorish = detail::color_context(prop);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    std::string canon = tok;
    if (prop == "font-weight" && tok == "bold") {
      canon = "700";
    } else if (prop == "font-weight" && tok == "normal") {
      canon = "400";
    } else if (auto color = colorish ? detail::parse_color(tok) : std::nullopt) {
      canon = *color;
    } else if (auto num = detail::parse_number(tok)) {
      canon = num->number + num->unit;
    }
    if (i > 0) out.value.push_back(' ');
    out.value += canon;
  }

  if (tokens.size() == 1 && is_global(tokens[0])) return out;
  if (detail::single_color_property(prop)) {
    out.recognized = tokens.size() == 1 && (detail::parse_color(tokens[0]) || tokens[0] == "transparent" ||
                                            tokens[0] == "currentcolor");
  } else if (prop == "font-weight") {
    auto num = tokens.size() == 1 ? detail::parse_number(tokens[0]) : std::nullopt;
    out.recognized = tokens.size() == 1 && (tokens[0] == "bold" || tokens[0] == "normal" ||
                                            tokens[0] == "bolder" || tokens[0] == "lighter" ||
                                            (num && num->unit.empty()));
  } else if (detail::length_property(prop)) {
    static constexpr std::string_view kKeywords[] = {
        "auto",   "none",    "fit-content", "max-content", "min-content", "smaller", "larger",
        "xx-small", "x-small", "small",     "medium",      "large",       "x-large", "xx-large"};
    auto num = tokens.size() == 1 ? detail::parse_number(tokens[0]) : std::nullopt;
    out.recognized =
        tokens.size() == 1 &&
        ((num && (!num->unit.empty() || num->number == "0")) ||
         std::find(std::begin(kKeywords), std::end(kKeywords), tokens[0]) != std::end(kKeywords));
  }
  return out;
}

/// Canonical spelling of `raw` for `property`. Idempotent.
inline std::string normalize_value(std::string_view property, std::string_view raw) {
  return normalize_value_checked(property, raw).value;
}

}  // namespace spark
