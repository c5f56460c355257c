#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ckg::text {

// Decodes UTF-8 into code points. Malformed bytes decode to U+FFFD one byte
// at a time so that no input is ever rejected.
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

// Splits `s` into its UTF-8 code point substrings.
std::vector<std::string_view> split_code_points(std::string_view s);

bool is_space(char32_t cp);

// Canonical form of a head or tail item, used for every uniqueness check:
//   1. all whitespace (ASCII, NBSP, ideographic) collapsed to one ASCII space
//      and trimmed,
//   2. leading list markers removed ("1.", "2、", "3)", "(4)", "-", "•", "*"),
//   3. trailing sentence punctuation removed (ASCII and full-width).
std::string normalize_item(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);

// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);
std::size_t count_occurrences(std::string_view s, std::string_view needle);

// 64-bit FNV-1a; stable across platforms, used for ids and feature hashing.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace ckg::text
