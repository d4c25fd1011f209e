#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace refine_loop {

// Unicode NFC. Invalid UTF-8 raises InvalidValue.
std::string nfc(std::string_view utf8);

std::string trim(std::string_view text);

// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);

// Abbreviations that never end a sentence, lowercase, trailing period included.
std::span<const std::string_view> sentence_abbreviations() noexcept;

/// Rule-based sentence splitter. A boundary falls after '.', '?' or '!'
/// (optionally followed by closing quotes or brackets) when whitespace
/// follows, unless the word ending there is a known abbreviation. Joining the
/// output with single spaces reproduces normalize_whitespace(text).
std::vector<std::string> split_sentences(std::string_view text);

/// Word tokenization shared by WER and the redundancy oracle: NFC, ASCII
/// lowercase, ASCII punctuation removed, split on whitespace.
std::vector<std::string> tokenize_words(std::string_view text);

// Splits on whitespace without any normalization.
std::vector<std::string> split_whitespace(std::string_view text);

std::string join(std::span<const std::string> parts, std::string_view separator);

}  // namespace refine_loop
