#include "ckg/text.hpp"

#include <algorithm>
#include <cstdio>

namespace ckg::text {

namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
};

Decoded decode_one(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (i + len > s.size()) return {0xFFFD, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

// Sentence-final punctuation stripped from the end of items.
bool is_trailing_punct(char32_t cp) {
  switch (cp) {
    case U'.': case U'!': case U'?': case U';': case U',':
    case U'。':
    case U'！':
    case U'？':
    case U'；':
    case U'，':
    case U'、':
    case U'…':
    case U'．':
      return true;
    default:
      return false;
  }
}

bool is_bullet(char32_t cp) {
  switch (cp) {
    case U'-': case U'*': case U'+':
    case U'•':
    case U'·':
    case U'–':
    case U'—':
    case U'●':
    case U'・':
      return true;
    default:
      return false;
  }
}

bool is_marker_terminator(char32_t cp) {
  switch (cp) {
    case U'.': case U')': case U':':
    case U'、':
    case U'）':
    case U'：':
    case U'．':
      return true;
    default:
      return false;
  }
}

bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

// Length in code points of a leading list marker, or 0.
std::size_t list_marker_length(const std::vector<char32_t>& cps) {
  if (cps.empty()) return 0;
  if (is_bullet(cps[0])) {
    // "-1" style negative numbers are not markers; a bullet must be followed
    // by a space or by non-digit content.
    if (cps.size() > 1 && is_digit(cps[1])) return 0;
    return 1;
  }
  std::size_t i = 0;
  const bool paren = cps[0] == U'(' || cps[0] == U'（';
  if (paren) i = 1;
  const std::size_t digits_begin = i;
  while (i < cps.size() && is_digit(cps[i])) ++i;
  if (i == digits_begin || i - digits_begin > 3) return 0;
  if (i >= cps.size()) return 0;
  if (paren) {
    if (cps[i] == U')' || cps[i] == U'）') return i + 1;
    return 0;
  }
  if (is_marker_terminator(cps[i])) {
    // "1.5公里" is a number, not a marker.
    if (cps[i] == U'.' && i + 1 < cps.size() && is_digit(cps[i + 1])) return 0;
    return i + 1;
  }
  return 0;
}

std::vector<char32_t> collapse_space(const std::vector<char32_t>& in) {
  std::vector<char32_t> out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char32_t cp : in) {
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return out;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto d = decode_one(s, i);
    out.push_back(d.cp);
    i += d.len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (char32_t cp : cps) out += encode_utf8(cp);
  return out;
}

std::vector<std::string_view> split_code_points(std::string_view s) {
  std::vector<std::string_view> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto d = decode_one(s, i);
    out.push_back(s.substr(i, d.len));
    i += d.len;
  }
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x00A0: case 0x2002: case 0x2003: case 0x2009: case 0x200B:
    case 0x3000: case 0xFEFF:
      return true;
    default:
      return false;
  }
}

std::string normalize_item(std::string_view s) {
  auto cps = collapse_space(decode_utf8(s));
  while (auto n = list_marker_length(cps)) {
    cps.erase(cps.begin(), cps.begin() + static_cast<std::ptrdiff_t>(n));
    while (!cps.empty() && cps.front() == U' ') cps.erase(cps.begin());
  }
  while (!cps.empty() && (is_trailing_punct(cps.back()) || cps.back() == U' ')) cps.pop_back();
  return encode_utf8(cps);
}

std::string trim(std::string_view s) {
  auto cps = decode_utf8(s);
  auto first = std::find_if_not(cps.begin(), cps.end(), is_space);
  auto last = std::find_if_not(cps.rbegin(), cps.rend(), is_space).base();
  if (first >= last) return {};
  return encode_utf8(std::vector<char32_t>(first, last));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::string replace_all(std::string_view s, std::string_view from, std::string_view to) {
  if (from.empty()) return std::string(s);
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (true) {
    auto hit = s.find(from, pos);
    if (hit == std::string_view::npos) {
      out.append(s.substr(pos));
      return out;
    }
    out.append(s.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace ckg::text
