#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Byte-level text helpers shared by the verifier, gateway and strategies.
// All offsets are byte offsets into UTF-8 text.
namespace ifkit::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
inline bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline char to_lower(char c) { return is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
std::string_view trim_right(std::string_view s);
std::string to_lower(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view s);
std::string join_lines(const std::vector<std::string_view>& lines);

/// Maximal runs of non-whitespace.
std::vector<std::string_view> words(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Decodes UTF-8 into code points; invalid bytes decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Line starts: offset 0 and every offset following a '\n'.
std::vector<std::size_t> line_starts(std::string_view s);

}  // namespace ifkit::text
