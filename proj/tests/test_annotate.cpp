#include "faithsel/annotate.hpp"
#include "faithsel/error.hpp"

#include <doctest.h>

#include <sstream>

using namespace faithsel;
using namespace faithsel::annotate;

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

Gazetteer ratp_gazetteer() {
  std::istringstream in(
      "# type\tpattern\tkind\n"
      "location\tGare de Lyon\tliteral\n"
      "location\tLyon\tliteral\n"
      "location\tNation\tliteral\n"
      "location\tLa Défense\tliteral\n"
      "transport_line\tligne 13\tliteral\n"
      "transport_line\tRER [A-E]\tregex\n");
  return Gazetteer::parse(in);
}

std::vector<std::string> surfaces(const std::vector<EntitySpan>& spans) {
  std::vector<std::string> out;
  for (const auto& s : spans) out.push_back(s.surface);
  return out;
}

}  // namespace

TEST_CASE("entity normalization") {
  CHECK(normalize_entity("  Gare   de\tLYON ") == "gare de lyon");
  CHECK(normalize_entity("La Défense") == "la défense");
  CHECK(normalize_entity("La De\xCC\x81" "fense") == "la défense");
  CHECK(normalize_entity("La Défense", {true}) == "la defense");
  CHECK(normalize_entity("STRASSE") == normalize_entity("straße"));
}

TEST_CASE("entity types") {
  bool known = false;
  CHECK(EntityType::parse("location", &known).kind() == EntityType::Kind::location);
  CHECK(known);
  auto t = EntityType::parse("station", &known);
  CHECK_FALSE(known);
  CHECK(t.name() == "station");
}

TEST_CASE("set and multiset insertion") {
  EntitySet set;
  CHECK(set.insert(make_span("Nation", EntityType::Kind::location, std::nullopt)));
  CHECK_FALSE(set.insert(make_span("NATION", EntityType::Kind::location, std::nullopt)));
  CHECK(set.size() == 1);

  EntitySet typed(MatchConfig{{}, DedupKey::text_and_type, false});
  typed.insert(make_span("13", EntityType::Kind::numeral, std::nullopt));
  typed.insert(make_span("13", EntityType::Kind::transport_line, std::nullopt));
  CHECK(typed.size() == 2);

  EntitySet multi(MatchConfig{{}, DedupKey::text, true});
  multi.insert(make_span("Nation", EntityType::Kind::location, std::nullopt));
  multi.insert(make_span("nation", EntityType::Kind::location, std::nullopt));
  CHECK(multi.size() == 2);
  CHECK(multi.key_counts().at("nation") == 2);
}

TEST_CASE("intersection is count-bounded and config-checked") {
  const MatchConfig mc{{}, DedupKey::text, true};
  EntitySet a(mc);
  EntitySet b(mc);
  for (auto s : {"x", "x", "y"}) a.insert(make_span(s, EntityType::Kind::location, std::nullopt));
  b.insert(make_span("x", EntityType::Kind::location, std::nullopt));
  b.insert(make_span("z", EntityType::Kind::location, std::nullopt));
  CHECK(entity_intersection(a, b, DedupKey::text).size() == 1);

  EntitySet folded(MatchConfig{{true}, DedupKey::text, false});
  CHECK(code_of([&] { entity_intersection(a, folded, DedupKey::text); }) == Errc::config_mismatch);
}

TEST_CASE("gazetteer prefers the leftmost longest match") {
  auto g = ratp_gazetteer();
  auto spans = extract_spans("départ de gare de lyon vers Lyon et Nationale", g);
  CHECK(surfaces(spans) == std::vector<std::string>{"gare de lyon", "Lyon"});
  CHECK(spans[0].normalized == "gare de lyon");
  REQUIRE(spans[0].range.has_value());
  CHECK(spans[0].range->start == 10);
  CHECK(spans[0].range->end == 22);
}

TEST_CASE("offsets count code points") {
  auto g = ratp_gazetteer();
  auto spans = extract_spans("à la Défense", g);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].surface == "la Défense");
  CHECK(spans[0].range->start == 2);
  CHECK(spans[0].range->end == 12);
}

TEST_CASE("regex entries and built-in patterns") {
  auto g = ratp_gazetteer();
  auto spans = extract_spans("le RER B le 12 mars à 14h30, ligne 13, 3 tickets", g);
  REQUIRE(spans.size() == 5);
  CHECK(spans[0].surface == "RER B");
  CHECK(spans[0].type.kind() == EntityType::Kind::transport_line);
  CHECK(spans[1].surface == "12 mars");
  CHECK(spans[1].type.kind() == EntityType::Kind::date);
  CHECK(spans[2].surface == "14h30");
  CHECK(spans[2].type.kind() == EntityType::Kind::time);
  CHECK(spans[3].surface == "ligne 13");
  CHECK(spans[4].surface == "3");
  CHECK(spans[4].type.kind() == EntityType::Kind::numeral);
}

TEST_CASE("gazetteer file errors") {
  std::istringstream bad("location\tNation\n");
  CHECK(code_of([&] { Gazetteer::parse(bad); }) == Errc::schema_violation);
  std::istringstream bad_regex("location\t(unclosed\tregex\n");
  CHECK(code_of([&] { Gazetteer::parse(bad_regex); }) == Errc::schema_violation);
}

TEST_CASE("annotation files") {
  std::istringstream in(
      R"({"target_id":"d1","entities":[{"surface":"Gare de LYON","type":"location","start":3,"end":15},{"surface":"RER B","type":"ligne"}]}
{"target_id":"d1-c1","entities":[]}
)");
  auto set = load_entity_annotations(in);
  CHECK(set.unknown_type_count == 1);
  REQUIRE(set.by_target.count("d1"));
  const auto& d1 = set.by_target.at("d1");
  CHECK(d1.size() == 2);
  CHECK(d1.entities()[0].normalized == "gare de lyon");
  CHECK(set.by_target.at("d1-c1").empty());

  std::ostringstream out;
  save_entity_annotations(set.by_target, out);
  std::istringstream again(out.str());
  auto reread = load_entity_annotations(again);
  CHECK(reread.by_target.at("d1").entities() == d1.entities());

  std::istringstream dup(R"({"target_id":"a","entities":[]}
{"target_id":"a","entities":[]})");
  CHECK(code_of([&] { load_entity_annotations(dup); }) == Errc::duplicate_id);
  std::istringstream bad(R"({"target_id":"a","entities":{}})");
  CHECK(code_of([&] { load_entity_annotations(bad); }) == Errc::schema_violation);
}

TEST_CASE("token-boundary containment") {
  CHECK(contains_at_token_boundary("à la nation.", "nation"));
  CHECK_FALSE(contains_at_token_boundary("la nationale", "nation"));
  CHECK_FALSE(contains_at_token_boundary("ligne 130", "ligne 13"));
  CHECK(contains_at_token_boundary("rer b, puis", "rer b"));
  CHECK_FALSE(contains_at_token_boundary("abc", ""));
}

TEST_CASE("source index normalizes the transcript once") {
  corpus::Transcript t = corpus::parse_turn_markup(
      "[customer] je vais à La   DEFENSE <END> [agent] prenez le RER A <END>");
  SourceIndex idx(t);
  CHECK(idx.contains(make_span("la defense", EntityType::Kind::location, std::nullopt)));
  CHECK_FALSE(idx.contains(make_span("la défense", EntityType::Kind::location, std::nullopt)));
  SourceIndex folded(t, {true});
  CHECK(folded.contains(make_span("La Défense", EntityType::Kind::location, std::nullopt, {true})));
  CHECK(entity_in_source(make_span("RER A", EntityType::Kind::transport_line, std::nullopt), t));
}
