#include "faithsel/corpus.hpp"

#include "faithsel/error.hpp"
#include "faithsel/io.hpp"
#include "faithsel/text.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <unordered_set>

namespace faithsel::corpus {

using nlohmann::json;

namespace {

constexpr std::string_view kEnd = "<END>";

std::size_t skip_whitespace(std::string_view s, std::size_t i) {
  while (i < s.size()) {
    std::size_t next = i;
    if (!text::is_whitespace(text::next_code_point(s, next))) break;
    i = next;
  }
  return i;
}

// A `[label]` marker at the start of `s`, if any.
std::optional<std::size_t> leading_marker_length(std::string_view s) {
  if (s.empty() || s.front() != '[') return std::nullopt;
  auto close = s.find(']');
  if (close == std::string_view::npos || close == 1) return std::nullopt;
  auto label = s.substr(1, close - 1);
  if (label.find('[') != std::string_view::npos) return std::nullopt;
  for (std::size_t i = 0; i < label.size();) {
    if (text::is_whitespace(text::next_code_point(label, i))) return std::nullopt;
  }
  return close + 1;
}

}  // namespace

SpeakerRole SpeakerRole::parse(std::string_view label) {
  std::string folded = text::casefold(label);
  Kind kind = Kind::other;
  if (folded == "agent") {
    kind = Kind::agent;
  } else if (folded == "customer") {
    kind = Kind::customer;
  } else if (folded == "system" || folded == "null") {
    kind = Kind::system;
  }
  return {kind, std::string(label)};
}

std::string Transcript::plain_text() const {
  std::string out;
  for (const auto& turn : turns) {
    if (!out.empty()) out += ' ';
    out += turn.text;
  }
  return out;
}

std::size_t Transcript::word_count() const {
  std::size_t n = 0;
  for (const auto& turn : turns) n += text::word_count(turn.text);
  return n;
}

Split Split::parse(std::string_view label) {
  Split s;
  s.label = std::string(label);
  if (label == "hum") {
    s.kind = Kind::hum;
  } else if (label == "aug") {
    s.kind = Kind::aug;
  } else if (label == "test") {
    s.kind = Kind::test;
  }
  return s;
}

Transcript parse_turn_markup(std::string_view input) {
  Transcript out;
  std::size_t i = skip_whitespace(input, 0);
  while (i < input.size()) {
    const std::size_t segment = i;
    auto marker = leading_marker_length(input.substr(i));
    if (!marker) {
      throw Error(Errc::malformed_markup, "segment without [role] marker", segment);
    }
    std::string_view role = input.substr(i + 1, *marker - 2);
    i += *marker;
    auto end = input.find(kEnd, i);
    if (end == std::string_view::npos) {
      throw Error(Errc::malformed_markup, "segment not terminated by <END>", segment);
    }
    std::string_view body = text::trim(input.substr(i, end - i));
    if (leading_marker_length(body)) {
      throw Error(Errc::malformed_markup, "turn body starts with a second [role] marker",
                  static_cast<std::size_t>(body.data() - input.data()));
    }
    out.turns.push_back(Turn{SpeakerRole::parse(role), std::string(body)});
    i = skip_whitespace(input, end + kEnd.size());
  }
  return out;
}

std::string serialize_turn_markup(const Transcript& transcript) {
  std::string out;
  for (const auto& turn : transcript.turns) {
    const std::string& role = turn.speaker.label();
    if (role.empty() || role.find_first_of("[]") != std::string::npos ||
        text::split_whitespace(role).size() != 1 || text::trim(role).size() != role.size()) {
      throw Error(Errc::turn_contains_reserved_token,
                  "speaker label cannot be written as a [role] marker: '" + role + "'");
    }
    if (turn.text.find(kEnd) != std::string::npos) {
      throw Error(Errc::turn_contains_reserved_token, "turn text contains <END>");
    }
    if (leading_marker_length(text::trim(turn.text))) {
      throw Error(Errc::turn_contains_reserved_token, "turn text starts with a [role] marker");
    }
    if (!out.empty()) out += ' ';
    out += '[';
    out += role;
    out += "] ";
    if (!turn.text.empty()) {
      out += turn.text;
      out += ' ';
    }
    out += kEnd;
  }
  return out;
}

DialogRecord record_from_json(const json& obj, std::size_t line) {
  DialogRecord r;
  r.id = io::require_string(obj, "id", line);
  if (r.id.empty()) throw Error(Errc::schema_violation, "empty id", line);
  r.split = Split::parse(io::require_string(obj, "split", line));

  const json& turns = io::require(obj, "turns", line);
  if (!turns.is_array()) throw Error(Errc::schema_violation, "'turns' must be an array", line);
  for (const auto& t : turns) {
    if (!t.is_object()) throw Error(Errc::schema_violation, "turn must be an object", line);
    r.transcript.turns.push_back(Turn{SpeakerRole::parse(io::require_string(t, "speaker", line)),
                                      io::require_string(t, "text", line)});
  }
  r.reference_synopsis = io::optional_string(obj, "synopsis", line);
  r.reference_call_type = io::optional_string(obj, "call_type", line);

  if (auto it = obj.find("source"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(Errc::schema_violation, "'source' must be an object", line);
    std::string kind = io::require_string(*it, "kind", line);
    if (kind == "manual") {
      r.transcript.source.kind = TranscriptSource::Kind::manual;
    } else if (kind == "asr") {
      r.transcript.source.kind = TranscriptSource::Kind::asr;
      r.transcript.source.system_id = io::optional_string(*it, "system", line).value_or("");
    } else {
      throw Error(Errc::schema_violation, "source.kind must be 'manual' or 'asr'", line);
    }
  }

  static const std::unordered_set<std::string> known = {"id",       "split",     "turns",
                                                        "synopsis", "call_type", "source"};
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) r.extensions[it.key()] = it.value();
  }
  return r;
}

json record_to_json(const DialogRecord& r) {
  json obj = r.extensions.is_object() ? r.extensions : json::object();
  obj["id"] = r.id;
  obj["split"] = r.split.label;
  json turns = json::array();
  for (const auto& t : r.transcript.turns) {
    turns.push_back({{"speaker", t.speaker.label()}, {"text", t.text}});
  }
  obj["turns"] = std::move(turns);
  if (r.reference_synopsis) obj["synopsis"] = *r.reference_synopsis;
  if (r.reference_call_type) obj["call_type"] = *r.reference_call_type;
  json source = {{"kind", r.transcript.source.kind == TranscriptSource::Kind::asr ? "asr"
                                                                                   : "manual"}};
  if (r.transcript.source.kind == TranscriptSource::Kind::asr) {
    source["system"] = r.transcript.source.system_id;
  }
  obj["source"] = std::move(source);
  return obj;
}

std::vector<DialogRecord> load_corpus(std::istream& in) {
  std::vector<DialogRecord> records;
  std::unordered_set<std::string> seen;
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    DialogRecord r = record_from_json(obj, line);
    if (!seen.insert(r.id).second) {
      throw Error(Errc::duplicate_id, "dialog id '" + r.id + "' appears twice", line);
    }
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<DialogRecord> load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open corpus " + path);
  return load_corpus(in);
}

void save_corpus(std::span<const DialogRecord> records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

CorpusStats corpus_stats(std::span<const DialogRecord> records) {
  CorpusStats stats;
  stats.n_dialogs = records.size();
  if (records.empty()) return stats;
  double conv_words = 0.0;
  double turns = 0.0;
  double sum_words = 0.0;
  std::size_t with_synopsis = 0;
  for (const auto& r : records) {
    conv_words += static_cast<double>(r.transcript.word_count());
    turns += static_cast<double>(r.transcript.turns.size());
    if (r.reference_synopsis) {
      sum_words += static_cast<double>(text::word_count(*r.reference_synopsis));
      ++with_synopsis;
    }
  }
  const auto n = static_cast<double>(records.size());
  stats.mean_conv_len = conv_words / n;
  stats.mean_turns = turns / n;
  if (with_synopsis > 0) stats.mean_sum_len = sum_words / static_cast<double>(with_synopsis);
  return stats;
}

std::vector<std::string> wer_tokens(std::string_view input, bool fold_case) {
  std::string folded = fold_case ? text::casefold(input) : std::string(input);
  std::vector<std::string> out;
  for (auto w : text::split_whitespace(folded)) out.emplace_back(w);
  return out;
}

double word_error_rate(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty()) throw Error(Errc::empty_reference, "WER needs a nonempty reference");
  // Levenshtein distance, one row at a time.
  std::vector<std::size_t> prev(hyp.size() + 1);
  std::vector<std::size_t> cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[hyp.size()]) / static_cast<double>(ref.size());
}

}  // namespace faithsel::corpus
