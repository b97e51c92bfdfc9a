#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sentinel {

struct TextStats {
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::size_t syllables = 0;
  std::size_t complex_words = 0;

  friend bool operator==(const TextStats&, const TextStats&) = default;
};

/// Vowel-group count with silent-e and -ed/-es corrections; at least 1.
std::size_t count_syllables(std::string_view word);

/// Sentences end at runs of . ! ? followed by whitespace or the end of text
/// (a trailing fragment counts too). Words are runs of ASCII letters, with
/// inner apostrophes. A complex word has 3+ syllables, is not capitalized
/// mid-sentence, and does not reach 3 syllables only through -es/-ed/-ing.
TextStats analyze_text(std::string_view text);

/// 206.835 - 1.015 words/sentences - 84.6 syllables/words
double flesch_reading_ease(const TextStats& stats);
/// 0.4 (words/sentences + 100 complex/words)
double gunning_fog(const TextStats& stats);

/// The rounded grade up to 12, then "college" (13-16) and "college graduate" (17+).
std::string fog_grade_band(double fog);

struct ReadabilityScores {
  TextStats stats;
  double flesch = 0.0;
  double fog = 0.0;
  std::string fog_band;
};

/// Throws InvalidArgument when the text has no words.
ReadabilityScores score_text(std::string_view text);

nlohmann::json to_json(const ReadabilityScores& scores);

}  // namespace sentinel
