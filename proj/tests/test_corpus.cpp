#include "faithsel/corpus.hpp"
#include "faithsel/error.hpp"
#include "faithsel/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace faithsel;
using namespace faithsel::corpus;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::io_error;
}

// Edit distance by plain recursion over all alignments.
std::size_t brute_edit(const std::vector<std::string>& a, std::size_t i,
                       const std::vector<std::string>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  std::size_t best = brute_edit(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  best = std::min(best, brute_edit(a, i + 1, b, j) + 1);
  best = std::min(best, brute_edit(a, i, b, j + 1) + 1);
  return best;
}

}  // namespace

TEST_CASE("turn markup parses speakers and bodies") {
  auto t = parse_turn_markup("[agent] bonjour <END> [customer]  oui  bonjour <END>");
  REQUIRE(t.turns.size() == 2);
  CHECK(t.turns[0].speaker.kind() == SpeakerRole::Kind::agent);
  CHECK(t.turns[0].text == "bonjour");
  CHECK(t.turns[1].speaker.label() == "customer");
  CHECK(t.turns[1].text == "oui  bonjour");
}

TEST_CASE("null speaker is a system role and keeps its label") {
  auto t = parse_turn_markup("[null] will answer you <END>");
  CHECK(t.turns[0].speaker.kind() == SpeakerRole::Kind::system);
  CHECK(serialize_turn_markup(t) == "[null] will answer you <END>");
  CHECK(SpeakerRole::parse("Conseiller").kind() == SpeakerRole::Kind::other);
}

TEST_CASE("empty turn body") {
  auto t = parse_turn_markup("[customer] <END> [agent] ok <END>");
  REQUIRE(t.turns.size() == 2);
  CHECK(t.turns[0].text.empty());
  CHECK(serialize_turn_markup(t) == "[customer] <END> [agent] ok <END>");
}

TEST_CASE("malformed markup reports byte offsets") {
  try {
    parse_turn_markup("[agent] bonjour <END> [customer] no terminator");
    FAIL("expected MalformedMarkup");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_markup);
    REQUIRE(e.location().has_value());
    CHECK(*e.location() == 22);
  }
  CHECK(code_of([] { parse_turn_markup("bonjour <END>"); }) == Errc::malformed_markup);
  CHECK(code_of([] { parse_turn_markup("[agent] [customer] x <END>"); }) == Errc::malformed_markup);
  CHECK(parse_turn_markup("   ").turns.empty());
}

TEST_CASE("serializer refuses reserved tokens") {
  Transcript t;
  t.turns.push_back({SpeakerRole::parse("agent"), "a <END> b"});
  CHECK(code_of([&] { serialize_turn_markup(t); }) == Errc::turn_contains_reserved_token);
  t.turns[0] = {SpeakerRole::parse("agent"), "[customer] hi"};
  CHECK(code_of([&] { serialize_turn_markup(t); }) == Errc::turn_contains_reserved_token);
  t.turns[0] = {SpeakerRole::parse("bad role"), "hi"};
  CHECK(code_of([&] { serialize_turn_markup(t); }) == Errc::turn_contains_reserved_token);
}

TEST_CASE("parse after serialize is the identity on generated transcripts") {
  std::mt19937 rng(7);
  const std::vector<std::string> roles = {"agent", "customer", "null", "system", "Conseiller"};
  const std::vector<std::string> words = {"bonjour", "RER", "B", "à", "Châtelet", "?", "ok",
                                          "l'horaire", "[x", "END", "<", ">", "été"};
  for (int n = 0; n < 200; ++n) {
    Transcript t;
    const int turns = static_cast<int>(rng() % 8);
    for (int i = 0; i < turns; ++i) {
      std::string body;
      const int len = static_cast<int>(rng() % 6);
      for (int w = 0; w < len; ++w) {
        if (w) body += ' ';
        body += words[rng() % words.size()];
      }
      if (body.rfind("[", 0) == 0) body = "x" + body;
      t.turns.push_back({SpeakerRole::parse(roles[rng() % roles.size()]), body});
    }
    CHECK(parse_turn_markup(serialize_turn_markup(t)) == t);
  }
}

TEST_CASE("the one-shot exemplar parses into 31 turns") {
  auto t = parse_turn_markup(io::read_file(FAITHSEL_TEST_DATA "/appendix_b_dialog.txt"));
  CHECK(t.turns.size() == 31);
  CHECK(t.turns.front().speaker.kind() == SpeakerRole::Kind::system);
  CHECK(t.turns[23].text.empty());
  CHECK(t.turns.back().text == "goodbye madam");
}

TEST_CASE("record JSON round trip keeps extension fields") {
  const std::string line =
      R"({"id":"d1","split":"aug","turns":[{"speaker":"agent","text":"bonjour"}],)"
      R"("synopsis":"s","call_type":"HORAIRE","source":{"kind":"asr","system":"whisper-l"},"origin":"chatgpt"})";
  auto r = record_from_json(nlohmann::json::parse(line));
  CHECK(r.split.kind == Split::Kind::aug);
  CHECK(r.transcript.source.kind == TranscriptSource::Kind::asr);
  CHECK(r.transcript.source.system_id == "whisper-l");
  CHECK(r.extensions["origin"] == "chatgpt");
  CHECK(record_from_json(record_to_json(r)) == r);
}

TEST_CASE("corpus loading errors") {
  std::istringstream dup(R"({"id":"a","split":"hum","turns":[]}
{"id":"a","split":"hum","turns":[]}
)");
  try {
    load_corpus(dup);
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_id);
    CHECK(e.location() == std::optional<std::size_t>(2));
  }
  std::istringstream missing(R"({"id":"a","turns":[]})");
  CHECK(code_of([&] { load_corpus(missing); }) == Errc::schema_violation);
  std::istringstream garbage("{not json");
  CHECK(code_of([&] { load_corpus(garbage); }) == Errc::schema_violation);
  CHECK(code_of([] { load_corpus_file("/nonexistent/corpus.jsonl"); }) == Errc::io_error);
}

TEST_CASE("corpus statistics") {
  std::istringstream in(R"({"id":"a","split":"hum","synopsis":"un deux trois","turns":[{"speaker":"agent","text":"a b"},{"speaker":"customer","text":"c"}]}
{"id":"b","split":"hum","turns":[{"speaker":"agent","text":"a b c d e"}]}
)");
  auto records = load_corpus(in);
  auto s = corpus_stats(records);
  CHECK(s.n_dialogs == 2);
  CHECK(*s.mean_conv_len == doctest::Approx(4.0));
  CHECK(*s.mean_turns == doctest::Approx(1.5));
  CHECK(*s.mean_sum_len == doctest::Approx(3.0));
  CHECK_FALSE(corpus_stats({}).mean_conv_len.has_value());
}

TEST_CASE("word error rate") {
  auto ref = wer_tokens("A b c");
  auto hyp = wer_tokens("a x c d");
  CHECK(word_error_rate(hyp, ref) == doctest::Approx(2.0 / 3.0));
  CHECK(word_error_rate(ref, ref) == 0.0);
  CHECK(word_error_rate({}, ref) == 1.0);
  CHECK(code_of([&] { word_error_rate(hyp, {}); }) == Errc::empty_reference);
  CHECK(wer_tokens("A b", false) == std::vector<std::string>{"A", "b"});
}

TEST_CASE("word error rate matches exhaustive alignment") {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int n = 0; n < 300; ++n) {
    std::vector<std::string> ref(1 + rng() % 6);
    std::vector<std::string> hyp(rng() % 7);
    for (auto& w : ref) w = vocab[rng() % vocab.size()];
    for (auto& w : hyp) w = vocab[rng() % vocab.size()];
    const double expected =
        static_cast<double>(brute_edit(hyp, 0, ref, 0)) / static_cast<double>(ref.size());
    CHECK(word_error_rate(hyp, ref) == expected);
  }
}
