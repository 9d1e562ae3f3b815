#pragma once

// Unicode helpers over UTF-8 std::string, backed by ICU.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::text {

std::string nfc(std::string_view s);
std::string casefold(std::string_view s);
/// Removes combining marks after canonical decomposition, then recomposes.
std::string strip_accents(std::string_view s);

bool is_whitespace(char32_t c);
bool is_punctuation(char32_t c);
bool is_word_char(char32_t c);

/// Decodes one code point starting at byte `i` and advances `i`.
/// Ill-formed bytes decode to U+FFFD and advance by at least one byte.
char32_t next_code_point(std::string_view s, std::size_t& i);
/// Code point ending right before byte `end`, or 0 when `end == 0`.
char32_t previous_code_point(std::string_view s, std::size_t end);

/// Maximal runs of non-whitespace code points.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

/// Replaces every run of whitespace by one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);
std::string_view trim(std::string_view s);

std::size_t code_point_count(std::string_view s);
/// Byte offset of the code point with index `cp_index`, or npos past the end.
std::size_t byte_offset_of(std::string_view s, std::size_t cp_index);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace faithsel::text
