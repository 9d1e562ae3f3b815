#include "faithsel/error.hpp"
#include "faithsel/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace faithsel;
using namespace faithsel::metrics;
using annotate::EntityType;

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

annotate::EntitySet set_of(std::initializer_list<const char*> names, annotate::MatchConfig mc = {}) {
  annotate::EntitySet s(mc);
  for (auto n : names) s.insert(annotate::make_span(n, EntityType::Kind::location, std::nullopt, mc.normalization));
  return s;
}

std::vector<std::string> toks(std::initializer_list<const char*> t) { return {t.begin(), t.end()}; }

// Longest common subsequence by trying every subsequence of `a`.
std::size_t lcs_brute(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t len = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

}  // namespace

TEST_CASE("call-type accuracy") {
  CHECK(ct_accuracy(toks({"a", "b", "c", "d"}), toks({"a", "b", "c", "x"})) == 0.75);
  CHECK(code_of([] { ct_accuracy(toks({"a"}), toks({"a", "b"})); }) == Errc::length_mismatch);
  CHECK(code_of([] { ct_accuracy({}, {}); }) == Errc::empty_input);
}

TEST_CASE("entity precision, recall and F1") {
  auto s = ne_prf(set_of({"a", "b"}), set_of({"a", "c"}));
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);
  auto both_empty = ne_prf(set_of({}), set_of({}));
  CHECK(both_empty.f1 == 1.0);
  CHECK(ne_prf(set_of({}), set_of({"a"})).precision == 0.0);
  CHECK(ne_prf(set_of({"a"}), set_of({})).recall == 0.0);
  auto half = ne_prf(set_of({"a", "b"}), set_of({"a"}));
  CHECK(half.precision == 0.5);
  CHECK(ne_prf(set_of({"a"}), set_of({"a", "b"})).recall == 0.5);
  CHECK(code_of([] { ne_prf(set_of({"a"}), set_of({"a"}, {{true}, {}, false})); }) ==
        Errc::config_mismatch);
}

TEST_CASE("multiset entity overlap is count-bounded") {
  const annotate::MatchConfig mc{{}, annotate::DedupKey::text, true};
  auto s = ne_prf(set_of({"a", "a", "b"}, mc), set_of({"a", "c"}, mc));
  CHECK(s.precision == doctest::Approx(1.0 / 3.0));
  CHECK(s.recall == 0.5);
}

TEST_CASE("ROUGE tokenizer") {
  CHECK(rouge_tokens("Bonjour, le Monde!") == toks({"bonjour", ",", "le", "monde", "!"}));
  CHECK(rouge_tokens("«RER B»...") == toks({"«", "rer", "b", "»", ".", ".", "."}));
  CHECK(rouge_tokens("l'horaire   d'été") == toks({"l'horaire", "d'été"}));
  CHECK(rouge_tokens(" ... ") == toks({".", ".", "."}));
}

TEST_CASE("ROUGE-L values") {
  CHECK(rouge_l(toks({"a", "b", "c"}), toks({"a", "c", "d"})) == doctest::Approx(2.0 / 3.0));
  CHECK(rouge_l(toks({"a", "b"}), toks({"a", "b"}), 3.0) == 1.0);
  CHECK(rouge_l(toks({"a"}), toks({"b"})) == 0.0);
  CHECK(rouge_l({}, toks({"b"})) == 0.0);
  // P = 1/2, R = 1/4, beta = 2: 5PR / (R + 4P) = (5/8) / (9/4) = 5/18.
  CHECK(rouge_l(toks({"a", "x"}), toks({"a", "b", "c", "d"}), 2.0) == doctest::Approx(5.0 / 18.0));
  CHECK(code_of([] { rouge_l(toks({"a"}), toks({"a"}), 0.0); }) == Errc::invalid_argument);
}

TEST_CASE("LCS matches subset enumeration") {
  std::mt19937 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "c"};
  for (int n = 0; n < 300; ++n) {
    std::vector<std::string> a(rng() % 10);
    std::vector<std::string> b(rng() % 10);
    for (auto& w : a) w = vocab[rng() % vocab.size()];
    for (auto& w : b) w = vocab[rng() % vocab.size()];
    CHECK(lcs_length(a, b) == lcs_brute(a, b));
  }
}

namespace {

struct Fixture {
  classify::Inventory inv{{"HORAIRE", "ITINERAIRE"}};
  std::vector<corpus::DialogRecord> corpus;
  std::map<std::string, Summary> summaries;
  std::map<std::string, annotate::EntitySet> entities;
  std::map<std::string, classify::CallTypeDistribution> dists;

  Fixture() {
    auto rec = [](std::string id, std::string synopsis, std::string ct) {
      corpus::DialogRecord r;
      r.id = std::move(id);
      r.reference_synopsis = std::move(synopsis);
      r.reference_call_type = std::move(ct);
      return r;
    };
    corpus.push_back(rec("d2", "a b c d", "ITINERAIRE"));
    corpus.push_back(rec("d1", "x y", "HORAIRE"));
    summaries["d1"] = {"s1", "x y", {{"bertscore", 0.9}}};
    summaries["d2"] = {"s2", "a c", {}};
    entities["s1"] = set_of({"Nation"});
    entities["d1#ref"] = set_of({"Nation"});
    entities["s2"] = set_of({"Nation", "Roissy"});
    entities["d2#ref"] = set_of({"Roissy", "Châtelet"});
    dists.emplace("s1", classify::CallTypeDistribution(inv, {0.9, 0.1}));
    dists.emplace("s2", classify::CallTypeDistribution(inv, {0.6, 0.4}));
  }

  ReportInputs inputs() const { return {corpus, &summaries, &entities, &dists}; }
};

}  // namespace

TEST_CASE("two-dialog report aggregates") {
  Fixture f;
  auto report = build_report(f.inputs(), {"sys", 1.0, false, CtReference::annotated, 2});
  REQUIRE(report.per_dialog.size() == 2);
  CHECK(report.per_dialog[0].dialog_id == "d1");
  CHECK(report.per_dialog[0].rouge_l == 1.0);
  CHECK(report.per_dialog[0].ct_correct);
  // d2: LCS 2 of 2 / 4 tokens -> F = 2/3; predicted HORAIRE vs ITINERAIRE; NE 1/2 each.
  CHECK(report.per_dialog[1].rouge_l == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(report.per_dialog[1].ct_correct);
  CHECK(report.aggregate.n == 2);
  CHECK(report.aggregate.rouge_l_mean == doctest::Approx(5.0 / 6.0));
  CHECK(report.aggregate.ct_acc == 0.5);
  CHECK(report.aggregate.ne_p_mean == 0.75);
  CHECK(report.aggregate.ne_f1_mean == 0.75);
  CHECK(report.aggregate.external_means.at("bertscore") == 0.9);

  CHECK(report_tsv(report) ==
        "dialog_id\trouge_l\tct_correct\tne_p\tne_r\tne_f1\n"
        "d1\t1.0000\t1\t1.0000\t1.0000\t1.0000\n"
        "d2\t0.6667\t0\t0.5000\t0.5000\t0.5000\n");
  CHECK(aggregate_tsv(report) ==
        "system\tn\trouge_l\tbertscore\tct_acc\tne_p\tne_r\tne_f1\n"
        "sys\t2\t0.8333\t0.9000\t0.5000\t0.7500\t0.7500\t0.7500\n");
  auto j = report_to_json(report);
  CHECK(j["aggregate"]["rouge_l"] == 0.8333);
  CHECK(j["rouge_l_beta"] == 1.0);
}

TEST_CASE("aggregates equal recomputation from per-dialog rows") {
  Fixture f;
  auto report = build_report(f.inputs());
  auto again = aggregate(report.per_dialog);
  CHECK(again.rouge_l_mean == report.aggregate.rouge_l_mean);
  CHECK(again.ct_acc == report.aggregate.ct_acc);
}

TEST_CASE("missing artifacts") {
  Fixture f;
  f.entities.erase("s2");
  CHECK(code_of([&] { build_report(f.inputs()); }) == Errc::missing_artifact);
  ReportOptions partial;
  partial.partial = true;
  auto report = build_report(f.inputs(), partial);
  CHECK(report.per_dialog.size() == 1);
  CHECK(report.excluded == std::vector<std::string>{"d2"});
}

TEST_CASE("external score column is blank when absent") {
  Fixture f;
  f.summaries["d1"].external_scores.clear();
  auto tsv = aggregate_tsv(build_report(f.inputs()), false);
  CHECK(tsv == "system\t2\t0.8333\t\t0.5000\t0.7500\t0.7500\t0.7500\n");
}

TEST_CASE("reference labels outside the inventory") {
  Fixture f;
  f.corpus[0].reference_call_type = "OBJET_PERDU";
  CHECK(code_of([&] { build_report(f.inputs()); }) == Errc::inventory_mismatch);
}

TEST_CASE("dialog-classifier reference") {
  Fixture f;
  f.dists.emplace("d1", classify::CallTypeDistribution(f.inv, {0.2, 0.8}));
  f.dists.emplace("d2", classify::CallTypeDistribution(f.inv, {0.7, 0.3}));
  ReportOptions opts;
  opts.ct_reference = CtReference::dialog_classifier;
  auto report = build_report(f.inputs(), opts);
  CHECK_FALSE(report.per_dialog[0].ct_correct);
  CHECK(report.per_dialog[1].ct_correct);
}
