#include "faithsel/classify.hpp"
#include "faithsel/error.hpp"

#include <doctest.h>

#include <sstream>

using namespace faithsel;
using namespace faithsel::classify;

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

const Inventory kInv({"HORAIRE", "ITINERAIRE", "OBJET_PERDU"});

}  // namespace

TEST_CASE("inventory validation") {
  CHECK(code_of([] { Inventory({"A", "A"}); }) == Errc::invalid_argument);
  CHECK(code_of([] { Inventory({"A", ""}); }) == Errc::invalid_argument);
  CHECK(kInv.index_of("ITINERAIRE") == std::optional<std::size_t>(1));
  CHECK_FALSE(kInv.index_of("x").has_value());
}

TEST_CASE("distribution invariants") {
  CallTypeDistribution d(kInv, {0.2, 0.5, 0.3});
  CHECK(d.prob("ITINERAIRE") == 0.5);
  CHECK(code_of([] { CallTypeDistribution(kInv, {0.2, 0.5, 0.31}); }) == Errc::not_a_distribution);
  CHECK(code_of([] { CallTypeDistribution(kInv, {-0.1, 0.6, 0.5}); }) == Errc::not_a_distribution);
  CHECK(code_of([] { CallTypeDistribution(kInv, {0.5, 0.5}); }) == Errc::not_a_distribution);
  CHECK(code_of([&] { d.prob("x"); }) == Errc::unknown_label);

  auto ext = CallTypeDistribution::from_external(kInv, {0.2, 0.5, 0.3000005});
  double sum = 0.0;
  for (double p : ext.probs()) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([] { CallTypeDistribution::from_external(kInv, {0.2, 0.5, 0.31}); }) ==
        Errc::not_a_distribution);
}

TEST_CASE("argmax breaks ties by label order") {
  CHECK(argmax_calltype(CallTypeDistribution(kInv, {0.1, 0.45, 0.45})) == "ITINERAIRE");
  CHECK(argmax_calltype(CallTypeDistribution(Inventory({"Z", "A"}), {0.5, 0.5})) == "A");
}

TEST_CASE("distribution JSON") {
  auto d = distribution_from_json(
      nlohmann::json::parse(R"({"OBJET_PERDU":0.25,"HORAIRE":0.5,"ITINERAIRE":0.25})"), kInv);
  CHECK(d.probs() == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(distribution_from_json(distribution_to_json(d), kInv) == d);
  CHECK(code_of([] {
          distribution_from_json(nlohmann::json::parse(R"({"HORAIRE":0.5,"X":0.5})"), kInv);
        }) == Errc::unknown_label);
  CHECK(code_of([] {
          distribution_from_json(nlohmann::json::parse(R"({"HORAIRE":0.5,"ITINERAIRE":0.5})"), kInv);
        }) == Errc::not_a_distribution);
}

TEST_CASE("distribution files") {
  std::istringstream in(R"({"inventory":["HORAIRE","ITINERAIRE","OBJET_PERDU"]}
{"target_id":"d1","probs":{"HORAIRE":0.1,"ITINERAIRE":0.8,"OBJET_PERDU":0.1}}
)");
  auto set = load_distributions(in);
  CHECK(set.inventory == kInv);
  CHECK(set.by_target.at("d1").prob("ITINERAIRE") == 0.8);

  std::ostringstream out;
  save_distributions(set, out);
  std::istringstream again(out.str());
  CHECK(load_distributions(again, kInv).by_target.at("d1") == set.by_target.at("d1"));

  std::istringstream other(R"({"inventory":["A","B"]})");
  CHECK(code_of([&] { load_distributions(other, kInv); }) == Errc::inventory_mismatch);
  std::istringstream headless(R"({"target_id":"d1","probs":{}})");
  CHECK(code_of([&] { load_distributions(headless); }) == Errc::schema_violation);
}

TEST_CASE("naive Bayes posterior matches the closed form") {
  // Vocabulary {bus, retard, train, horaire}; A has 5 tokens (bus x3), B has 2.
  // P(A | "bus horaire") = (2/3 * 4/9 * 2/9) / (that + 1/3 * 1/6 * 2/6) = 32/41.
  const std::vector<LabeledText> examples = {
      {"bus retard bus", "A"}, {"Train horaire", "B"}, {"bus horaire", "A"}};
  auto model = train_nb(examples, 1.0);
  CHECK(model.inventory.labels() == std::vector<std::string>{"A", "B"});
  auto d = predict_distribution(model, "BUS horaire inconnu");
  CHECK(d.probs()[0] == doctest::Approx(32.0 / 41.0).epsilon(1e-12));
  CHECK(d.probs()[1] == doctest::Approx(9.0 / 41.0).epsilon(1e-12));

  auto prior_only = predict_distribution(model, "rien de connu");
  CHECK(prior_only.probs()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("naive Bayes survives long inputs") {
  const std::vector<LabeledText> examples = {{"a a a b", "X"}, {"b b b a", "Y"}};
  auto model = train_nb(examples, 0.5);
  std::string text;
  for (int i = 0; i < 5000; ++i) text += "a ";
  auto d = predict_distribution(model, text);
  CHECK(d.probs()[0] == 1.0);
  CHECK(d.probs()[1] >= 0.0);
}

TEST_CASE("naive Bayes training errors") {
  const std::vector<LabeledText> examples = {{"a", "X"}};
  CHECK(code_of([&] { train_nb(examples, 0.0); }) == Errc::invalid_argument);
  CHECK(code_of([] { train_nb({}, 1.0); }) == Errc::empty_corpus);
  CHECK(code_of([&] { train_nb(examples, 1.0, Inventory({"X", "Y"})); }) ==
        Errc::missing_label_examples);
  CHECK(code_of([&] { train_nb(examples, 1.0, Inventory({"Y"})); }) == Errc::unknown_label);
}

TEST_CASE("model files reload bit-identically") {
  const std::vector<LabeledText> examples = {
      {"bus retard bus", "A"}, {"train horaire", "B"}, {"bus horaire", "A"}};
  auto model = train_nb(examples, 0.7);
  const std::string saved = save_model(model);
  auto reloaded = load_model(saved);
  CHECK(save_model(reloaded) == saved);
  CHECK(predict_distribution(reloaded, "bus train") == predict_distribution(model, "bus train"));
  CHECK(code_of([] { load_model("{\"format\":\"other\"}"); }) == Errc::schema_violation);
  CHECK(code_of([] { load_model("not json"); }) == Errc::schema_violation);
}

TEST_CASE("distribution sources") {
  corpus::DialogRecord rec;
  rec.id = "d1";
  rec.transcript = corpus::parse_turn_markup("[customer] bus horaire <END>");
  ModelSource ms(train_nb(std::vector<LabeledText>{{"bus retard bus", "A"}, {"train horaire", "B"},
                                                   {"bus horaire", "A"}}));
  CHECK(ms.distribution_for(rec)->probs()[0] == doctest::Approx(32.0 / 41.0));

  DistributionSet set;
  set.inventory = kInv;
  TableSource empty(set);
  CHECK_FALSE(empty.distribution_for(rec).has_value());
}
