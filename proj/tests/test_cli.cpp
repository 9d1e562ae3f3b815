#include "faithsel/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = FAITHSEL_BIN;
const std::string kSmoke = FAITHSEL_TEST_DATA "/smoke";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("faithsel_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

Run run(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = env + " " + kBin + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = faithsel::io::read_file(out);
  r.err = faithsel::io::read_file(err);
  return r;
}

std::string write(const std::string& name, const std::string& content) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << content;
  return p.string();
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

std::string slurp(const std::string& p) { return faithsel::io::read_file(p); }

// Trained model, annotations, distributions and manifests for the smoke corpus.
void prepare_artifacts() {
  static bool done = false;
  if (done) return;
  const std::string corpus = " --corpus " + kSmoke + "/corpus.jsonl";
  const std::string cands = " --candidates " + kSmoke + "/candidates.jsonl";
  REQUIRE(run("classify train" + corpus + " --out " + path("model")).status == 0);
  REQUIRE(run("annotate" + corpus + cands + " --gazetteer " + kSmoke + "/gazetteer.tsv --out " +
              path("ann")).status == 0);
  REQUIRE(run("classify predict" + corpus + cands + " --model " + path("model/model.json") +
              " --out " + path("dist")).status == 0);
  REQUIRE(run("grid" + corpus + " --top-k 30:45:15 --greedy --beam 2:2 --out " + path("grid"))
              .status == 0);
  done = true;
}

std::string pool_args() {
  return " --corpus " + kSmoke + "/corpus.jsonl --candidates " + kSmoke +
         "/candidates.jsonl --manifest " + path("grid/manifests.jsonl") + " --annotations " +
         path("ann/annotations.jsonl");
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run("").status == 1);
  CHECK(run("frobnicate").status == 1);
  CHECK(run("stats --corpus x --bogus").status == 1);
  CHECK(run("stats").status == 1);
  CHECK(run("select --corpus x --manifest y --candidates z --criterion best").status == 1);
  CHECK(run("stats --corpus x --format xml").status == 1);
}

TEST_CASE("help lists every flag of every command") {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"stats", {"--corpus", "--format", "--out", "--config"}},
      {"wer", {"--corpus", "--hypothesis", "--out", "--config"}},
      {"annotate", {"--corpus", "--candidates", "--summaries", "--gazetteer", "--endpoint",
                    "--accent-fold", "--type-aware", "--multiset", "--jobs", "--out", "--config"}},
      {"classify train", {"--corpus", "--alpha", "--split", "--inventory", "--out", "--config"}},
      {"classify predict", {"--corpus", "--candidates", "--summaries", "--model", "--endpoint",
                            "--inventory", "--jobs", "--out", "--config"}},
      {"grid", {"--corpus", "--paper-defaults", "--mode", "--top-p", "--top-k", "--temperature",
                "--greedy", "--beam", "--samples", "--seed", "--condition", "--model",
                "--distributions", "--separator", "--out", "--config"}},
      {"prompt", {"--exemplar", "--exemplar-summary", "--target", "--template",
                  "--allow-empty-target", "--out", "--config"}},
      {"ingest", {"--corpus", "--manifest", "--candidates", "--annotations", "--gazetteer",
                  "--distributions", "--model", "--strict", "--partial", "--out", "--config"}},
      {"select", {"--corpus", "--manifest", "--candidates", "--annotations", "--gazetteer",
                  "--distributions", "--model", "--strict", "--partial", "--criterion",
                  "--epsilon", "--baseline-config", "--presence", "--jobs", "--out", "--config"}},
      {"evaluate", {"--corpus", "--summaries", "--selection", "--candidates", "--annotations",
                    "--gazetteer", "--distributions", "--model", "--beta", "--system",
                    "--ct-reference", "--partial", "--format", "--jobs", "--out", "--config"}},
  };
  for (const auto& [cmd, expected] : flags) {
    auto r = run(cmd + " --help");
    CHECK(r.status == 0);
    for (const auto& f : expected) {
      INFO(cmd << " " << f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("stats") {
  auto r = run("stats --corpus " + kSmoke + "/corpus.jsonl --format tsv");
  CHECK(r.status == 0);
  CHECK(r.out == "n_dialogs\tmean_conv_len\tmean_sum_len\tmean_turns\n5\t40.80\t16.20\t6.20\n");
  auto j = run("stats --corpus " + kSmoke + "/corpus.jsonl");
  CHECK(json::parse(j.out)["n_dialogs"] == 5);

  auto missing = run("stats --corpus " + path("absent.jsonl"));
  CHECK(missing.status == 2);
  CHECK(missing.err.find("absent.jsonl") != std::string::npos);
  auto bad = run("stats --corpus " + write("bad.jsonl", "{\"id\":\"a\"}\n"));
  CHECK(bad.status == 2);
  CHECK(bad.err.find("SchemaViolation") != std::string::npos);
}

TEST_CASE("config files and flag overrides") {
  const std::string cfg =
      write("run.ini", "corpus=\"" + kSmoke + "/corpus.jsonl\"\n[stats]\nformat=\"tsv\"\n");
  auto r = run("stats --config " + cfg);
  CHECK(r.status == 0);
  CHECK(r.out.rfind("n_dialogs\t", 0) == 0);
  auto overridden = run("stats --config " + cfg + " --format json");
  CHECK(overridden.out.front() == '{');
  auto env = run("stats", "FAITHSEL_CONFIG=" + cfg);
  CHECK(env.status == 0);
  CHECK(env.out.rfind("n_dialogs\t", 0) == 0);
  auto typo = run("stats --config " + write("typo.ini", "[stats]\nformat_x=1\n"));
  CHECK(typo.status == 1);

  CHECK(run("stats --config " + cfg + " --out " + path("stats_out")).status == 0);
  const std::string echoed = slurp(path("stats_out/faithsel.ini"));
  CHECK(echoed.find("format=\"tsv\"") != std::string::npos);
  CHECK(run("stats --config " + path("stats_out/faithsel.ini")).status == 0);
}

TEST_CASE("grid emits reference manifests and is idempotent") {
  const std::string args = "grid --corpus " + kSmoke + "/corpus.jsonl --paper-defaults --out " + path("g");
  REQUIRE(run(args).status == 0);
  const std::string first = slurp(path("g/manifests.jsonl"));
  std::istringstream in(first);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    CHECK(j["configs"].size() == 16);
    CHECK(j["expected_candidates"] == 21);
    ++n;
  }
  CHECK(n == 5);
  REQUIRE(run(args).status == 0);
  CHECK(slurp(path("g/manifests.jsonl")) == first);
  CHECK(fs::exists(path("g/faithsel.ini")));
  CHECK(run("grid --corpus " + kSmoke + "/corpus.jsonl --top-p 0.9:0.8:0.1").status == 2);
}

TEST_CASE("classifier training is bit-reproducible") {
  const std::string args = "classify train --corpus " + kSmoke + "/corpus.jsonl --alpha 1.0 --out ";
  REQUIRE(run(args + path("m1")).status == 0);
  REQUIRE(run(args + path("m2")).status == 0);
  CHECK(slurp(path("m1/model.json")) == slurp(path("m2/model.json")));
}

TEST_CASE("prompt building is deterministic") {
  const std::string target = write("target.txt", "[customer] bonjour <END> [agent] RATP bonjour <END>\n");
  const std::string args = "prompt --exemplar " FAITHSEL_TEST_DATA "/appendix_b_dialog.txt"
                           " --exemplar-summary " FAITHSEL_TEST_DATA "/appendix_b_summary.txt"
                           " --target " + target;
  auto a = run(args);
  auto b = run(args);
  CHECK(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("[customer] bonjour <END> [agent] RATP bonjour <END>") != std::string::npos);
  auto bad = run("prompt --exemplar " + write("bad.txt", "[agent] no end") +
                 " --exemplar-summary " + target + " --target " + target);
  CHECK(bad.status == 2);
  CHECK(bad.err.find("MalformedMarkup") != std::string::npos);
}

TEST_CASE("selection exit codes") {
  prepare_artifacts();
  auto missing = run("select" + pool_args());
  CHECK(missing.status == 3);
  CHECK(missing.err.find("MissingArtifact") != std::string::npos);

  auto partial = run("select" + pool_args() + " --partial");
  CHECK(partial.status == 0);
  CHECK(partial.out.empty());
  CHECK(partial.err.find("5 skipped") != std::string::npos);

  auto ok = run("select" + pool_args() + " --distributions " + path("dist/distributions.jsonl") +
                " --criterion baseline_first --baseline-config beam-s2-n2");
  CHECK(ok.status == 0);
  CHECK(json::parse(ok.out.substr(0, ok.out.find('\n')))["chosen"] == "d1-c3");

  auto strict = run("select --strict" + pool_args() + " --distributions " +
                    path("dist/distributions.jsonl") + " --candidates " +
                    write("few.jsonl", slurp(kSmoke + "/candidates.jsonl").substr(0, 200)));
  CHECK(strict.status != 0);
}

TEST_CASE("evaluation of perfect summaries") {
  std::ifstream corpus(kSmoke + "/corpus.jsonl");
  std::string line;
  std::string summaries;
  std::string dists = "{\"inventory\":[\"HORAIRE\",\"ITINERAIRE\",\"OBJET_PERDU\"]}\n";
  while (std::getline(corpus, line)) {
    auto d = json::parse(line);
    const std::string id = "ref-" + d["id"].get<std::string>();
    summaries += json{{"dialog_id", d["id"]}, {"summary_id", id}, {"text", d["synopsis"]}}.dump() + "\n";
    json probs = {{"HORAIRE", 0.0}, {"ITINERAIRE", 0.0}, {"OBJET_PERDU", 0.0}};
    probs[d["call_type"].get<std::string>()] = 1.0;
    dists += json{{"target_id", id}, {"probs", probs}}.dump() + "\n";
  }
  const std::string base = "evaluate --corpus " + kSmoke + "/corpus.jsonl --summaries " +
                           write("perfect.jsonl", summaries) + " --gazetteer " + kSmoke +
                           "/gazetteer.tsv --system perfect --format tsv";
  auto r = run(base + " --distributions " + write("perfect_dist.jsonl", dists) + " --out " + path("perfect"));
  CHECK(r.status == 0);
  CHECK(r.out ==
        "system\tn\trouge_l\tbertscore\tct_acc\tne_p\tne_r\tne_f1\n"
        "perfect\t5\t1.0000\t\t1.0000\t1.0000\t1.0000\t1.0000\n");
  CHECK(fs::exists(path("perfect/report.json")));
  CHECK(fs::exists(path("perfect/per_dialog.tsv")));

  std::string other = "{\"inventory\":[\"HORAIRE\",\"ITINERAIRE\"]}\n";
  for (int i = 1; i <= 5; ++i) {
    other += "{\"target_id\":\"ref-d" + std::to_string(i) + "\",\"probs\":{\"HORAIRE\":0.5,\"ITINERAIRE\":0.5}}\n";
  }
  auto mismatch = run(base + " --distributions " + write("other_dist.jsonl", other));
  CHECK(mismatch.status == 3);
  CHECK(mismatch.err.find("InventoryMismatch") != std::string::npos);
}
