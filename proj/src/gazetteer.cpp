#include "faithsel/annotate.hpp"

#include "faithsel/error.hpp"
#include "faithsel/text.hpp"

#include <unicode/regex.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <istream>

namespace faithsel::annotate {

namespace {

struct Pattern {
  EntityType type;
  std::unique_ptr<icu::RegexPattern> regex;
};

std::unique_ptr<icu::RegexPattern> compile(const std::string& source, std::string* error) {
  UErrorCode status = U_ZERO_ERROR;
  UParseError parse_error;
  std::unique_ptr<icu::RegexPattern> p(icu::RegexPattern::compile(
      icu::UnicodeString::fromUTF8(source), UREGEX_CASE_INSENSITIVE, parse_error, status));
  if (U_FAILURE(status)) {
    if (error) *error = u_errorName(status);
    return nullptr;
  }
  return p;
}

// Words of the phrase escaped and joined by \s+, so "RER B" also matches
// "RER  B" or "RER\nB".
std::string literal_to_regex(std::string_view phrase) {
  std::string out;
  for (auto word : text::split_whitespace(phrase)) {
    if (!out.empty()) out += "\\s+";
    for (std::size_t i = 0; i < word.size();) {
      std::size_t start = i;
      char32_t c = text::next_code_point(word, i);
      if (!u_isalnum(static_cast<UChar32>(c)) && c < 0x80) out += '\\';
      out.append(word.substr(start, i - start));
    }
  }
  return out;
}

constexpr std::string_view kMonths =
    "janvier|f[ée]vrier|mars|avril|mai|juin|juillet|ao[uû]t|septembre|octobre|novembre|"
    "d[ée]cembre|january|february|march|april|may|june|july|august|september|october|"
    "november|december";

std::vector<Pattern> builtin_patterns() {
  const std::pair<EntityType::Kind, std::string> sources[] = {
      {EntityType::Kind::date,
       "\\d{1,2}(?:er)?\\s+(?:" + std::string(kMonths) + ")(?:\\s+\\d{4})?"},
      {EntityType::Kind::date, "\\d{1,2}/\\d{1,2}(?:/\\d{2,4})?"},
      {EntityType::Kind::date, "\\d{4}-\\d{2}-\\d{2}"},
      {EntityType::Kind::time, "\\d{1,2}\\s*(?:heures?|h)(?:\\s*\\d{2}(?:\\s*minutes?)?)?"},
      {EntityType::Kind::time, "\\d{1,2}:\\d{2}"},
      {EntityType::Kind::time, "\\d{1,2}\\s*(?:am|pm|o'clock)"},
      {EntityType::Kind::numeral, "\\d+(?:[.,]\\d+)?"},
  };
  std::vector<Pattern> out;
  for (const auto& [kind, source] : sources) {
    std::string error;
    auto regex = compile(source, &error);
    if (!regex) throw std::logic_error("built-in entity pattern failed: " + error);
    out.push_back(Pattern{EntityType(kind), std::move(regex)});
  }
  return out;
}

const std::vector<Pattern>& builtins() {
  static const std::vector<Pattern> patterns = builtin_patterns();
  return patterns;
}

struct Match {
  int32_t start = 0;  // UTF-16 code units
  int32_t end = 0;
  std::size_t priority = 0;
  const EntityType* type = nullptr;
};

bool word_at(const icu::UnicodeString& u, int32_t index) {
  UChar32 c = u.char32At(index);
  return u_isalnum(c) || u_charType(c) == U_NON_SPACING_MARK;
}

bool at_boundaries(const icu::UnicodeString& u, int32_t start, int32_t end) {
  if (start > 0 && word_at(u, start) && word_at(u, u.moveIndex32(start, -1))) return false;
  if (end < u.length() && word_at(u, u.moveIndex32(end, -1)) && word_at(u, end)) return false;
  return true;
}

std::vector<Match> find_all(const icu::UnicodeString& u, const std::vector<Pattern>& patterns) {
  std::vector<Match> out;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::RegexMatcher> m(patterns[p].regex->matcher(u, status));
    if (U_FAILURE(status)) continue;
    int64_t from = 0;
    while (from <= u.length() && m->find(from, status) && U_SUCCESS(status)) {
      auto s = static_cast<int32_t>(m->start(status));
      auto e = static_cast<int32_t>(m->end(status));
      if (e > s && at_boundaries(u, s, e)) out.push_back(Match{s, e, p, &patterns[p].type});
      from = u.moveIndex32(s, 1);
      if (from <= s) break;
    }
  }
  return out;
}

// Leftmost, then longest, then earliest pattern; no overlaps.
std::vector<Match> resolve(std::vector<Match> matches) {
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return a.priority < b.priority;
  });
  std::vector<Match> out;
  int32_t cursor = 0;
  for (const auto& m : matches) {
    if (m.start < cursor) continue;
    out.push_back(m);
    cursor = m.end;
  }
  return out;
}

}  // namespace

struct Gazetteer::Compiled {
  std::vector<Pattern> patterns;
};

Gazetteer::Gazetteer() : compiled_(std::make_shared<Compiled>()) {}
Gazetteer::~Gazetteer() = default;
Gazetteer::Gazetteer(Gazetteer&&) noexcept = default;
Gazetteer& Gazetteer::operator=(Gazetteer&&) noexcept = default;

Gazetteer::Gazetteer(const Gazetteer& other) : Gazetteer() {
  for (const auto& e : other.entries_) add(e);
}

Gazetteer& Gazetteer::operator=(const Gazetteer& other) {
  if (this != &other) *this = Gazetteer(other);
  return *this;
}

void Gazetteer::add(Entry entry) {
  if (text::trim(entry.pattern).empty()) {
    throw Error(Errc::invalid_argument, "empty gazetteer pattern");
  }
  std::string source = entry.is_regex ? entry.pattern : literal_to_regex(entry.pattern);
  std::string error;
  auto regex = compile(source, &error);
  if (!regex) {
    throw Error(Errc::invalid_argument,
                "gazetteer pattern '" + entry.pattern + "' does not compile: " + error);
  }
  compiled_->patterns.push_back(Pattern{entry.type, std::move(regex)});
  entries_.push_back(std::move(entry));
}

void Gazetteer::add_literal(EntityType type, std::string phrase) {
  add(Entry{std::move(type), std::move(phrase), false});
}

void Gazetteer::add_regex(EntityType type, std::string pattern) {
  add(Entry{std::move(type), std::move(pattern), true});
}

Gazetteer Gazetteer::parse(std::istream& in) {
  Gazetteer g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (auto tab = line.find('\t'); tab != std::string::npos; tab = line.find('\t', start)) {
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(line.substr(start));
    if (cols.size() != 3) {
      throw Error(Errc::schema_violation, "expected type<TAB>pattern<TAB>kind", line_no);
    }
    if (cols[2] != "literal" && cols[2] != "regex") {
      throw Error(Errc::schema_violation, "kind must be 'literal' or 'regex'", line_no);
    }
    try {
      g.add(Entry{EntityType::parse(cols[0]), cols[1], cols[2] == "regex"});
    } catch (const Error& e) {
      throw Error(Errc::schema_violation, e.detail(), line_no);
    }
  }
  return g;
}

Gazetteer Gazetteer::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open gazetteer " + path);
  return parse(in);
}

std::vector<EntitySpan> extract_spans(std::string_view input, const Gazetteer& gazetteer,
                                      const NormalizationConfig& config) {
  const icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(input.data(), static_cast<int32_t>(input.size())));

  std::vector<Match> chosen = resolve(find_all(u, gazetteer.compiled().patterns));
  std::vector<Match> extra;
  for (const auto& m : resolve(find_all(u, builtins()))) {
    bool overlaps = std::any_of(chosen.begin(), chosen.end(), [&](const Match& g) {
      return m.start < g.end && g.start < m.end;
    });
    if (!overlaps) extra.push_back(m);
  }
  chosen.insert(chosen.end(), extra.begin(), extra.end());
  std::sort(chosen.begin(), chosen.end(),
            [](const Match& a, const Match& b) { return a.start < b.start; });

  std::vector<EntitySpan> spans;
  for (const auto& m : chosen) {
    std::string surface;
    u.tempSubString(m.start, m.end - m.start).toUTF8String(surface);
    CharRange range{static_cast<std::size_t>(u.countChar32(0, m.start)),
                    static_cast<std::size_t>(u.countChar32(0, m.end))};
    spans.push_back(make_span(std::move(surface), *m.type, range, config));
  }
  return spans;
}

EntitySet extract_entities(std::string_view input, const Gazetteer& gazetteer,
                           const MatchConfig& config) {
  EntitySet set(config);
  for (auto& span : extract_spans(input, gazetteer, config.normalization)) {
    set.insert(std::move(span));
  }
  return set;
}

}  // namespace faithsel::annotate
