#pragma once

// Offsets on the wire count Unicode scalar values. Text is stored as UTF-8,
// so every splice has to translate scalar positions into byte positions.
// Malformed sequences count as one scalar per offending byte.

#include <cstddef>
#include <string>
#include <string_view>

namespace spark::utf8 {

/// Byte length of the sequence starting at `s[i]`, 1 for malformed input.
inline std::size_t sequence_length(std::string_view s, std::size_t i) noexcept {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (lead >= 0xF0 && lead <= 0xF4) {
    len = 4;
  } else if (lead >= 0xE0) {
    len = lead <= 0xEF ? 3 : 1;
  } else if (lead >= 0xC2 && lead <= 0xDF) {
    len = 2;
  }
  if (len == 1 || i + len > s.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

inline std::size_t scalar_length(std::string_view s) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i += sequence_length(s, i)) ++n;
  return n;
}

/// Byte index of scalar `index`, or npos when index > scalar_length(s).
inline std::size_t byte_offset(std::string_view s, std::size_t index) noexcept {
  std::size_t i = 0;
  for (std::size_t n = 0; n < index; ++n) {
    if (i >= s.size()) return std::string_view::npos;
    i += sequence_length(s, i);
  }
  return i;
}

/// True when `s` is well-formed UTF-8 (no overlongs, no surrogates).
inline bool valid(std::string_view s) noexcept {
  for (std::size_t i = 0; i < s.size();) {
    const auto lead = static_cast<unsigned char>(s[i]);
    if (lead < 0x80) {
      ++i;
      continue;
    }
    const std::size_t len = sequence_length(s, i);
    if (len == 1) return false;
    const auto second = static_cast<unsigned char>(s[i + 1]);
    if (lead == 0xE0 && second < 0xA0) return false;
    if (lead == 0xED && second > 0x9F) return false;
    if (lead == 0xF0 && second < 0x90) return false;
    if (lead == 0xF4 && second > 0x8F) return false;
    i += len;
  }
  return true;
}

}  // namespace spark::utf8
