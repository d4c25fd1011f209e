#include "refine_loop/core/text.hpp"

#include <array>
#include <cctype>

#include <unicode/normalizer2.h>
#include <unicode/ustring.h>
#include <unicode/unistr.h>

#include "refine_loop/core/error.hpp"

namespace refine_loop {
namespace {

constexpr std::array<std::string_view, 14> kAbbreviations = {
    "e.g.", "i.e.", "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "cf.", "approx.", "fig."};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Typographic punctuation that tokenization drops alongside ASCII punctuation.
constexpr std::array<std::string_view, 7> kUnicodePunctuation = {
    "‘", "’", "“", "”", "–", "—", "…"};

constexpr std::array<std::string_view, 3> kUnicodeClosers = {"’", "”", "»"};

// Strips closing quotes/brackets from the end of a word.
std::string_view strip_closers(std::string_view word) {
  bool changed = true;
  while (changed && !word.empty()) {
    changed = false;
    const char last = word.back();
    if (last == '"' || last == '\'' || last == ')' || last == ']' || last == '}') {
      word.remove_suffix(1);
      changed = true;
      continue;
    }
    for (std::string_view closer : kUnicodeClosers) {
      if (word.ends_with(closer)) {
        word.remove_suffix(closer.size());
        changed = true;
        break;
      }
    }
  }
  return word;
}

std::string_view strip_openers(std::string_view word) {
  while (!word.empty() && (word.front() == '(' || word.front() == '[' || word.front() == '"' ||
                           word.front() == '\'' || word.front() == '{')) {
    word.remove_prefix(1);
  }
  return word;
}

bool is_abbreviation(std::string_view word) {
  const std::string lower = to_lower_ascii(strip_openers(word));
  for (std::string_view abbreviation : kAbbreviations) {
    if (lower == abbreviation) return true;
  }
  return false;
}

bool ends_sentence(std::string_view word) {
  const std::string_view core = strip_closers(word);
  if (core.empty()) return false;
  const char last = core.back();
  if (last != '.' && last != '?' && last != '!') return false;
  if (last == '.' && is_abbreviation(core)) return false;
  return true;
}

}  // namespace

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) raise(ErrorKind::InvalidValue, "ICU NFC normalizer unavailable");
  // fromUTF8 substitutes U+FFFD silently, so check strictly first.
  int32_t length = 0;
  UErrorCode check = U_ZERO_ERROR;
  u_strFromUTF8(nullptr, 0, &length, utf8.data(), static_cast<int32_t>(utf8.size()), &check);
  if (check == U_INVALID_CHAR_FOUND || check == U_ILLEGAL_CHAR_FOUND) raise(ErrorKind::InvalidValue, "invalid UTF-8 input");
  const icu::UnicodeString source = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  if (source.isBogus()) raise(ErrorKind::InvalidValue, "invalid UTF-8 input");
  if (normalizer->isNormalized(source, status) && U_SUCCESS(status)) return std::string(utf8);
  status = U_ZERO_ERROR;
  const icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) raise(ErrorKind::InvalidValue, "NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::span<const std::string_view> sentence_abbreviations() noexcept { return kAbbreviations; }

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  const std::vector<std::string> words = split_whitespace(text);
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!current.empty()) current.push_back(' ');
    current += words[i];
    if (i + 1 < words.size() && ends_sentence(words[i])) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  const std::string normalized = nfc(text);
  std::vector<std::string> words;
  std::string word;
  std::string_view rest(normalized);
  while (!rest.empty()) {
    bool skipped = false;
    for (std::string_view punct : kUnicodePunctuation) {
      if (rest.starts_with(punct)) {
        rest.remove_prefix(punct.size());
        skipped = true;
        break;
      }
    }
    if (skipped) continue;
    const char c = rest.front();
    rest.remove_prefix(1);
    if (is_space(c)) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else if (static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c))) {
      continue;
    } else if (c >= 'A' && c <= 'Z') {
      word.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) words.push_back(std::move(word));
  return words;
}

std::string join(std::span<const std::string> parts, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += separator;
    out += parts[i];
  }
  return out;
}

}  // namespace refine_loop
