#include "sentinel/readability.hpp"

#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "sentinel/error.hpp"

namespace sentinel {

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y':
      return true;
    default:
      return false;
  }
}
bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string lower_letters(std::string_view word) {
  std::string out;
  for (char c : word) {
    if (is_letter(c)) out += char(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::size_t count_syllables(std::string_view raw) {
  const std::string w = lower_letters(raw);
  if (w.empty()) return 0;
  if (w.size() <= 3) return 1;
  std::size_t groups = 0;
  bool prev = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !prev) ++groups;
    prev = v;
  }
  const std::size_t n = w.size();
  auto consonant = [&](std::size_t i) { return !is_vowel(w[i]); };
  if (w.back() == 'e' && !ends_with(w, "ee") && !(ends_with(w, "le") && consonant(n - 3))) {
    // Silent final e: "make", "ware".
    if (consonant(n - 2)) --groups;
  } else if (ends_with(w, "ed")) {
    // "jumped" but not "wanted", "needed".
    if (consonant(n - 3) && w[n - 3] != 't' && w[n - 3] != 'd') --groups;
  } else if (ends_with(w, "es")) {
    // "makes" but not "boxes", "pages", "wishes".
    const char c = w[n - 3];
    const bool sibilant = c == 's' || c == 'x' || c == 'z' || c == 'c' || c == 'g' ||
                          ends_with(w, "ches") || ends_with(w, "shes");
    if (consonant(n - 3) && !sibilant) --groups;
  }
  return groups == 0 ? 1 : groups;
}

TextStats analyze_text(std::string_view text) {
  TextStats st;
  bool sentence_has_words = false;
  bool at_sentence_start = true;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_letter(c)) {
      std::size_t j = i;
      while (j < n && (is_letter(text[j]) ||
                       (text[j] == '\'' && j + 1 < n && is_letter(text[j + 1]) && j > i))) {
        ++j;
      }
      const std::string_view word = text.substr(i, j - i);
      const std::size_t syl = count_syllables(word);
      ++st.words;
      st.syllables += syl;
      const bool capitalized = std::isupper(static_cast<unsigned char>(word.front())) != 0;
      if (syl >= 3 && !(capitalized && !at_sentence_start)) {
        const std::string lw = lower_letters(word);
        bool inflated = false;
        for (std::string_view suffix : {"ing", "ed", "es"}) {
          if (ends_with(lw, suffix) && lw.size() > suffix.size() + 2) {
            inflated = count_syllables(lw.substr(0, lw.size() - suffix.size())) < 3;
            break;
          }
        }
        if (!inflated) ++st.complex_words;
      }
      sentence_has_words = true;
      at_sentence_start = false;
      i = j;
      continue;
    }
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
      if (j == n || std::isspace(static_cast<unsigned char>(text[j])) != 0) {
        if (sentence_has_words) ++st.sentences;
        sentence_has_words = false;
        at_sentence_start = true;
      }
      i = j;
      continue;
    }
    ++i;
  }
  if (sentence_has_words) ++st.sentences;
  return st;
}

double flesch_reading_ease(const TextStats& s) {
  if (s.words == 0 || s.sentences == 0) {
    throw InvalidArgument("readability undefined for text without words or sentences");
  }
  return 206.835 - 1.015 * (double(s.words) / double(s.sentences)) -
         84.6 * (double(s.syllables) / double(s.words));
}

double gunning_fog(const TextStats& s) {
  if (s.words == 0 || s.sentences == 0) {
    throw InvalidArgument("readability undefined for text without words or sentences");
  }
  return 0.4 * (double(s.words) / double(s.sentences) +
                100.0 * double(s.complex_words) / double(s.words));
}

std::string fog_grade_band(double fog) {
  const long grade = std::lround(fog);
  if (grade >= 17) return "college graduate";
  if (grade >= 13) return "college";
  return fmt::format("{}", grade);
}

ReadabilityScores score_text(std::string_view text) {
  ReadabilityScores r;
  r.stats = analyze_text(text);
  r.flesch = flesch_reading_ease(r.stats);
  r.fog = gunning_fog(r.stats);
  r.fog_band = fog_grade_band(r.fog);
  return r;
}

nlohmann::json to_json(const ReadabilityScores& r) {
  return {{"sentences", r.stats.sentences},
          {"words", r.stats.words},
          {"syllables", r.stats.syllables},
          {"complex_words", r.stats.complex_words},
          {"flesch_reading_ease", r.flesch},
          {"gunning_fog", r.fog},
          {"fog_grade", r.fog_band}};
}

}  // namespace sentinel
