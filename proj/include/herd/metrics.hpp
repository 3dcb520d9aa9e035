#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace herd::metrics {

struct NormalizationOptions {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool collapse_whitespace = true;

  bool operator==(const NormalizationOptions&) const = default;
};

inline constexpr NormalizationOptions kDefaultNormalization{};

// A score in [0, 1]. Construction outside the range (or NaN) throws.
class Score {
 public:
  explicit Score(double value);
  double value() const noexcept { return value_; }
  operator double() const noexcept { return value_; }

 private:
  double value_;
};

// True for code points this library treats as punctuation: the Unicode
// punctuation categories over ASCII, Latin-1, General Punctuation, CJK
// symbols and fullwidth forms.
bool is_punctuation(char32_t cp);

bool is_whitespace(char32_t cp);

// Applies the enabled transforms and returns the normalized string.
// Idempotent: normalize_text(normalize_text(t)) == normalize_text(t).
std::string normalize_text(std::string_view text, const NormalizationOptions& opts);

// Normalized token sequence: enabled transforms, then a whitespace split.
// Never produces empty tokens.
std::vector<std::string> normalize(std::string_view text, const NormalizationOptions& opts);

// Word-level F1 between the prediction and reference token multisets:
// overlap counts min-occurrences per token, precision = overlap/|P|,
// recall = overlap/|R|, F1 = harmonic mean. Both sides empty -> 1.0,
// exactly one side empty -> 0.0.
Score token_f1(std::string_view prediction, std::string_view reference,
               const NormalizationOptions& opts = kDefaultNormalization);

}  // namespace herd::metrics
