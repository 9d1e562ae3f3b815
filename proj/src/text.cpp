#include "faithsel/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace faithsel::text {

namespace {

icu::UnicodeString to_icu(std::string_view s) {
  return icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

const icu::Normalizer2& normalizer(bool compose) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = compose ? icu::Normalizer2::getNFCInstance(status)
                                      : icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw std::runtime_error("ICU normalizer unavailable");
  }
  return *n;
}

icu::UnicodeString normalize(const icu::UnicodeString& u, bool compose) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = normalizer(compose).normalize(u, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  return out;
}

}  // namespace

std::string nfc(std::string_view s) { return to_utf8(normalize(to_icu(s), true)); }

std::string casefold(std::string_view s) {
  icu::UnicodeString u = to_icu(s);
  u.foldCase();
  return to_utf8(u);
}

std::string strip_accents(std::string_view s) {
  icu::UnicodeString decomposed = normalize(to_icu(s), false);
  icu::UnicodeString kept;
  for (int32_t i = 0; i < decomposed.length();) {
    UChar32 c = decomposed.char32At(i);
    if (u_charType(c) != U_NON_SPACING_MARK) kept.append(c);
    i += U16_LENGTH(c);
  }
  return to_utf8(normalize(kept, true));
}

bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }
bool is_punctuation(char32_t c) { return u_ispunct(static_cast<UChar32>(c)); }
bool is_word_char(char32_t c) {
  auto u = static_cast<UChar32>(c);
  return u_isalnum(u) || u_charType(u) == U_NON_SPACING_MARK;
}

char32_t next_code_point(std::string_view s, std::size_t& i) {
  auto len = static_cast<int32_t>(s.size());
  auto pos = static_cast<int32_t>(i);
  UChar32 c = 0;
  U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos, len, c);
  i = static_cast<std::size_t>(pos);
  return c < 0 ? U'\uFFFD' : static_cast<char32_t>(c);
}

char32_t previous_code_point(std::string_view s, std::size_t end) {
  if (end == 0) return 0;
  auto pos = static_cast<int32_t>(end);
  UChar32 c = 0;
  U8_PREV(reinterpret_cast<const uint8_t*>(s.data()), 0, pos, c);
  return c < 0 ? U'\uFFFD' : static_cast<char32_t>(c);
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < s.size()) {
    std::size_t at = i;
    char32_t c = next_code_point(s, i);
    if (is_whitespace(c)) {
      if (start != std::string_view::npos) {
        out.push_back(s.substr(start, at - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = at;
    }
  }
  if (start != std::string_view::npos) out.push_back(s.substr(start));
  return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  for (auto word : split_whitespace(s)) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    std::size_t i = begin;
    if (!is_whitespace(next_code_point(s, i))) break;
    begin = i;
  }
  std::size_t end = s.size();
  while (end > begin) {
    std::size_t i = end;
    // step back over one code point
    do {
      --i;
    } while (i > begin && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80);
    std::size_t probe = i;
    if (!is_whitespace(next_code_point(s, probe))) break;
    end = i;
  }
  return s.substr(begin, end - begin);
}

std::size_t code_point_count(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++n) next_code_point(s, i);
  return n;
}

std::size_t byte_offset_of(std::string_view s, std::size_t cp_index) {
  std::size_t i = 0;
  for (std::size_t n = 0; n < cp_index; ++n) {
    if (i >= s.size()) return std::string_view::npos;
    next_code_point(s, i);
  }
  return i;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace faithsel::text
