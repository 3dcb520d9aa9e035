#include "herd/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace herd::metrics {

namespace {

// Decodes one UTF-8 code point starting at `i`, advancing `i`. Invalid bytes
// are passed through as their own code point so normalization never throws
// and stays idempotent on arbitrary input.
char32_t decode_utf8(std::string_view s, size_t& i) {
  const auto byte = [&](size_t j) { return static_cast<unsigned char>(s[j]); };
  const unsigned char b0 = byte(i);
  size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    i += 1;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    i += 1;
    return b0;
  }
  if (i + len > s.size()) {
    i += 1;
    return b0;
  }
  for (size_t j = 1; j < len; ++j) {
    if ((byte(i + j) & 0xC0) != 0x80) {
      i += 1;
      return b0;
    }
    cp = (cp << 6) | (byte(i + j) & 0x3F);
  }
  i += len;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
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
}

struct Range {
  char32_t lo, hi;
};

// Punctuation category ranges over the blocks common in benchmark text:
// ASCII, Latin-1 supplement, General Punctuation, CJK symbols, fullwidth.
constexpr Range kPunctuation[] = {
    {0x21, 0x23},     // ! " #
    {0x25, 0x2A},     // % & ' ( ) *
    {0x2C, 0x2F},     // , - . /
    {0x3A, 0x3B},     // : ;
    {0x3F, 0x40},     // ? @
    {0x5B, 0x5D},     // [ \ ]
    {0x5F, 0x5F},     // _
    {0x7B, 0x7B},     // {
    {0x7D, 0x7D},     // }
    {0xA1, 0xA1},     // inverted exclamation
    {0xA7, 0xA7},     // section sign
    {0xAB, 0xAB},     // left guillemet
    {0xB6, 0xB7},     // pilcrow, middle dot
    {0xBB, 0xBB},     // right guillemet
    {0xBF, 0xBF},     // inverted question mark
    {0x2010, 0x2027}, // dashes, quotes, daggers, bullet, ellipsis
    {0x2030, 0x2043}, // permille, primes, angle quotes, overline, hyphen bullet
    {0x2045, 0x2051},
    {0x2053, 0x2053},
    {0x2055, 0x205E},
    {0x3001, 0x3003}, // ideographic comma/full stop/ditto
    {0x3008, 0x3011}, // CJK brackets
    {0x3014, 0x301F},
    {0x30FB, 0x30FB}, // katakana middle dot
    {0xFD3E, 0xFD3F},
    {0xFE50, 0xFE52}, // small comma/period forms
    {0xFE54, 0xFE57},
    {0xFF01, 0xFF03},
    {0xFF05, 0xFF0A},
    {0xFF0C, 0xFF0F},
    {0xFF1A, 0xFF1B},
    {0xFF1F, 0xFF20},
    {0xFF3B, 0xFF3D},
    {0xFF3F, 0xFF3F},
    {0xFF5B, 0xFF5B},
    {0xFF5D, 0xFF5D},
    {0xFF5F, 0xFF65},
};

}  // namespace

Score::Score(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("score out of range [0,1]: " + std::to_string(value));
  }
}

bool is_punctuation(char32_t cp) {
  for (const Range& r : kPunctuation) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::string normalize_text(std::string_view text, const NormalizationOptions& opts) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  bool emitted = false;
  size_t i = 0;
  while (i < text.size()) {
    char32_t cp = decode_utf8(text, i);
    if (opts.lowercase && cp >= 'A' && cp <= 'Z') {
      cp = cp - 'A' + 'a';
    }
    if (opts.strip_punctuation && is_punctuation(cp)) {
      continue;
    }
    if (opts.collapse_whitespace && is_whitespace(cp)) {
      pending_space = emitted;  // leading whitespace is dropped entirely
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    encode_utf8(cp, out);
    emitted = true;
  }
  return out;
}

std::vector<std::string> normalize(std::string_view text, const NormalizationOptions& opts) {
  const std::string normalized = normalize_text(text, opts);
  std::vector<std::string> tokens;
  std::string current;
  size_t i = 0;
  const std::string_view view = normalized;
  while (i < view.size()) {
    const size_t start = i;
    const char32_t cp = decode_utf8(view, i);
    if (is_whitespace(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.append(view.substr(start, i - start));
    }
  }
  if (!current.empty()) {
    tokens.push_back(std::move(current));
  }
  return tokens;
}

Score token_f1(std::string_view prediction, std::string_view reference,
               const NormalizationOptions& opts) {
  const std::vector<std::string> pred = normalize(prediction, opts);
  const std::vector<std::string> ref = normalize(reference, opts);
  if (pred.empty() && ref.empty()) return Score(1.0);
  if (pred.empty() || ref.empty()) return Score(0.0);

  std::unordered_map<std::string, size_t> ref_counts;
  for (const std::string& t : ref) ++ref_counts[t];

  size_t overlap = 0;
  for (const std::string& t : pred) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return Score(0.0);

  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return Score(2.0 * precision * recall / (precision + recall));
}

}  // namespace herd::metrics
