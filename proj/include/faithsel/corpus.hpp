#pragma once

// Dialog records, the `[speaker] text <END>` turn markup, JSON-lines corpus
// storage, corpus statistics and word error rate.

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::corpus {

/// A speaker label. The original spelling is kept so that parsing and
/// re-serializing a role is the identity; `kind()` is the interpretation.
class SpeakerRole {
 public:
  enum class Kind { agent, customer, system, other };

  SpeakerRole() : SpeakerRole(Kind::other, "other") {}
  static SpeakerRole parse(std::string_view label);
  static SpeakerRole agent() { return {Kind::agent, "agent"}; }
  static SpeakerRole customer() { return {Kind::customer, "customer"}; }
  static SpeakerRole system() { return {Kind::system, "system"}; }

  Kind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }

  bool operator==(const SpeakerRole&) const = default;

 private:
  SpeakerRole(Kind kind, std::string label) : kind_(kind), label_(std::move(label)) {}

  Kind kind_;
  std::string label_;
};

struct Turn {
  SpeakerRole speaker;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct TranscriptSource {
  enum class Kind { manual, asr };
  Kind kind = Kind::manual;
  std::string system_id;  // only meaningful for asr

  bool operator==(const TranscriptSource&) const = default;
};

struct Transcript {
  std::vector<Turn> turns;
  TranscriptSource source;

  /// Turn texts joined by single spaces.
  std::string plain_text() const;
  std::size_t word_count() const;

  bool operator==(const Transcript&) const = default;
};

struct Split {
  enum class Kind { hum, aug, test, other };
  Kind kind = Kind::other;
  std::string label;

  static Split parse(std::string_view label);

  bool operator==(const Split&) const = default;
};

struct DialogRecord {
  std::string id;
  Transcript transcript;
  std::optional<std::string> reference_synopsis;
  std::optional<std::string> reference_call_type;
  Split split;
  /// Unknown top-level fields, carried through load/save untouched.
  nlohmann::json extensions = nlohmann::json::object();

  bool operator==(const DialogRecord&) const = default;
};

struct CorpusStats {
  std::size_t n_dialogs = 0;
  std::optional<double> mean_conv_len;
  std::optional<double> mean_sum_len;
  std::optional<double> mean_turns;
};

/// Parses `[role] body <END>` segments. Raises MalformedMarkup with the byte
/// offset of the offending segment.
Transcript parse_turn_markup(std::string_view text);
std::string serialize_turn_markup(const Transcript& transcript);

DialogRecord record_from_json(const nlohmann::json& obj, std::size_t line = 0);
nlohmann::json record_to_json(const DialogRecord& record);

std::vector<DialogRecord> load_corpus(std::istream& in);
std::vector<DialogRecord> load_corpus_file(const std::string& path);
void save_corpus(std::span<const DialogRecord> records, std::ostream& out);

CorpusStats corpus_stats(std::span<const DialogRecord> records);

std::vector<std::string> wer_tokens(std::string_view text, bool fold_case = true);
double word_error_rate(std::span<const std::string> hypothesis,
                       std::span<const std::string> reference);

}  // namespace faithsel::corpus
