// faithsel: command-line front end over the selection / evaluation library.
//
// Every subcommand reads files, writes into the directory named by --out
// (stdout when absent), and echoes its resolved options there as
// faithsel.ini. Exit status: 0 ok, 1 usage, 2 bad input, 3 missing artifact
// or inconsistent inputs.

#include "faithsel/annotate.hpp"
#include "faithsel/backend.hpp"
#include "faithsel/classify.hpp"
#include "faithsel/corpus.hpp"
#include "faithsel/criteria.hpp"
#include "faithsel/error.hpp"
#include "faithsel/genharness.hpp"
#include "faithsel/io.hpp"
#include "faithsel/metrics.hpp"
#include "faithsel/parallel.hpp"
#include "faithsel/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace faithsel;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by several subcommands. Each subcommand registers the
// subset it consumes so that --help lists exactly those.
struct Options {
  std::string corpus;
  std::vector<std::string> annotations;
  std::vector<std::string> distributions;
  std::string gazetteer;
  std::string model;
  std::string endpoint;
  std::string manifest;
  std::string candidates;
  std::string summaries;
  std::string selection;
  std::string out;
  std::string format = "json";
  std::size_t jobs = default_jobs();

  bool accent_fold = false;
  bool type_aware = false;
  bool multiset = false;
  bool strict = false;
  bool partial = false;

  // select
  std::string criterion = "combined";
  double epsilon = criteria::kDefaultEpsilon;
  std::string baseline_config;
  std::string presence = "containment";

  // evaluate
  double beta = 1.0;
  std::string system = "system";
  std::string ct_reference = "annotated";

  // classify
  double alpha = 1.0;
  std::string split;
  std::vector<std::string> inventory;

  // grid
  bool paper_defaults = false;
  std::string mode = "independent_sweeps";
  std::string top_p;
  std::string top_k;
  std::string temperature;
  bool greedy = false;
  std::string beam;
  int samples = 1;
  std::optional<std::int64_t> seed;
  bool condition = false;
  std::string separator{gen::kDefaultSeparator};

  // prompt
  std::string exemplar;
  std::string exemplar_summary;
  std::string target;
  std::string template_file;
  bool allow_empty_target = false;

  // wer
  std::string hypothesis;
};

// Options that must come from the command line or the config file. CLI11's
// own required() would fire before the config file is merged.
std::map<const CLI::App*, std::vector<CLI::Option*>> g_required;
std::map<const CLI::App*, std::string> g_config_path;

CLI::Option* need(CLI::App* cmd, CLI::Option* opt) {
  g_required[cmd].push_back(opt);
  opt->description(opt->get_description() + " (required)");
  return opt;
}

void add_config(CLI::App* cmd) {
  cmd->add_option("--config", g_config_path[cmd],
                  "INI/TOML file of option values (default: $FAITHSEL_CONFIG); flags override it");
}

void add_corpus(CLI::App* cmd, Options& o, bool required = true) {
  auto* opt = cmd->add_option("--corpus", o.corpus, "Dialog corpus (JSON lines)");
  if (required) need(cmd, opt);
}

void add_out(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "Output directory (stdout when omitted)");
}

void add_jobs(CLI::App* cmd, Options& o) {
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_matching(CLI::App* cmd, Options& o) {
  cmd->add_flag("--accent-fold", o.accent_fold, "Strip accents when normalizing entities");
  cmd->add_flag("--type-aware", o.type_aware, "Match entities on (text, type) rather than text");
  cmd->add_flag("--multiset", o.multiset, "Count repeated entity mentions");
}

void add_entity_sources(CLI::App* cmd, Options& o) {
  cmd->add_option("--annotations", o.annotations, "Entity annotation file (repeatable)");
  cmd->add_option("--gazetteer", o.gazetteer, "Gazetteer TSV used for targets lacking annotations");
  add_matching(cmd, o);
}

void add_distribution_sources(CLI::App* cmd, Options& o) {
  cmd->add_option("--distributions", o.distributions, "Call-type distribution file (repeatable)");
  cmd->add_option("--model", o.model, "Naive Bayes model used for targets lacking distributions");
}

annotate::MatchConfig match_config(const Options& o) {
  annotate::MatchConfig m;
  m.normalization.accent_fold = o.accent_fold;
  m.key = o.type_aware ? annotate::DedupKey::text_and_type : annotate::DedupKey::text;
  m.multiset = o.multiset;
  return m;
}

// ---- output -------------------------------------------------------------

class Output {
 public:
  Output(const Options& o, CLI::App* cmd) : dir_(o.out), cmd_(cmd) {}

  void put(const std::string& name, const std::string& content, bool to_stdout = true) {
    if (dir_.empty()) {
      if (to_stdout) std::cout << content << std::flush;
      return;
    }
    io::write_file_atomic(fs::path(dir_) / name, content);
  }

  void finish() {
    if (dir_.empty()) return;
    io::write_file_atomic(fs::path(dir_) / "faithsel.ini", cmd_->config_to_str(true, false));
  }

  bool to_directory() const { return !dir_.empty(); }

 private:
  std::string dir_;
  CLI::App* cmd_;
};

void prepare_out(const Options& o) {
  if (o.out.empty()) return;
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error(Errc::io_error, "cannot create output directory " + o.out + ": " + ec.message());
}

// ---- artifact assembly ---------------------------------------------------

struct Artifacts {
  annotate::MatchConfig match;
  std::map<std::string, annotate::EntitySet> entities;
  std::map<std::string, classify::CallTypeDistribution> distributions;
  std::optional<classify::Inventory> inventory;
  std::optional<annotate::Gazetteer> gazetteer;
  std::optional<classify::NBModel> model;

  void want_entities(const std::string& target, std::string_view text) {
    if (entities.count(target) || !gazetteer) return;
    entities.emplace(target, annotate::extract_entities(text, *gazetteer, match));
  }

  void want_distribution(const std::string& target, std::string_view text) {
    if (distributions.count(target) || !model) return;
    distributions.emplace(target, classify::predict_distribution(*model, text));
  }
};

Artifacts load_artifacts(const Options& o) {
  Artifacts a;
  a.match = match_config(o);
  for (const auto& path : o.annotations) {
    auto set = annotate::load_entity_annotations_file(path, a.match);
    if (set.unknown_type_count > 0) {
      std::cerr << "faithsel: " << path << ": " << set.unknown_type_count
                << " entities of unrecognized type kept as-is\n";
    }
    for (auto& [target, entities] : set.by_target) {
      if (!a.entities.emplace(target, std::move(entities)).second) {
        throw Error(Errc::duplicate_id, "target '" + target + "' annotated in several files");
      }
    }
  }
  for (const auto& path : o.distributions) {
    auto set = classify::load_distributions_file(path, a.inventory);
    if (!a.inventory) a.inventory = set.inventory;
    for (auto& [target, d] : set.by_target) {
      if (!a.distributions.emplace(target, std::move(d)).second) {
        throw Error(Errc::duplicate_id, "target '" + target + "' has distributions in several files");
      }
    }
  }
  if (!o.gazetteer.empty()) a.gazetteer = annotate::Gazetteer::load_file(o.gazetteer);
  if (!o.model.empty()) {
    a.model = classify::load_model(io::read_file(o.model));
    if (a.inventory && !(a.model->inventory == *a.inventory)) {
      throw Error(Errc::inventory_mismatch, "model inventory differs from the distribution files");
    }
    a.inventory = a.model->inventory;
  }
  return a;
}

std::vector<corpus::DialogRecord> load_corpus(const Options& o) {
  return corpus::load_corpus_file(o.corpus);
}

std::vector<gen::RawCandidate> read_raw_candidates(const std::string& content) {
  std::vector<gen::RawCandidate> out;
  std::istringstream in(content);
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    out.push_back(gen::candidate_from_json(obj, line));
  });
  return out;
}

criteria::Criterion parse_criterion_arg(const std::string& name) {
  return criteria::parse_criterion(name);
}

// ---- stats / wer ---------------------------------------------------------

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << *v;
  return os.str();
}

void cmd_stats(const Options& o, CLI::App* cmd) {
  const auto records = load_corpus(o);
  const auto s = corpus::corpus_stats(records);
  std::string content;
  if (o.format == "tsv") {
    content = "n_dialogs\tmean_conv_len\tmean_sum_len\tmean_turns\n" +
              std::to_string(s.n_dialogs) + "\t" + fmt_opt(s.mean_conv_len) + "\t" +
              fmt_opt(s.mean_sum_len) + "\t" + fmt_opt(s.mean_turns) + "\n";
  } else {
    json j = {{"n_dialogs", s.n_dialogs}};
    j["mean_conv_len"] = s.mean_conv_len ? json(*s.mean_conv_len) : json(nullptr);
    j["mean_sum_len"] = s.mean_sum_len ? json(*s.mean_sum_len) : json(nullptr);
    j["mean_turns"] = s.mean_turns ? json(*s.mean_turns) : json(nullptr);
    content = j.dump(2) + "\n";
  }
  prepare_out(o);
  Output out(o, cmd);
  out.put(o.format == "tsv" ? "stats.tsv" : "stats.json", content);
  out.finish();
}

void cmd_wer(const Options& o, CLI::App* cmd) {
  const auto refs = load_corpus(o);
  const auto hyps = corpus::load_corpus_file(o.hypothesis);
  std::map<std::string, const corpus::DialogRecord*> by_id;
  for (const auto& h : hyps) by_id.emplace(h.id, &h);

  std::string rows = "dialog_id\tref_words\twer\n";
  double errors = 0.0;
  std::size_t words = 0;
  for (const auto& r : refs) {
    auto h = by_id.find(r.id);
    if (h == by_id.end()) {
      throw Error(Errc::missing_artifact, "no hypothesis transcript for dialog '" + r.id + "'");
    }
    const auto ref = corpus::wer_tokens(r.transcript.plain_text());
    const auto hyp = corpus::wer_tokens(h->second->transcript.plain_text());
    const double w = corpus::word_error_rate(hyp, ref);
    errors += w * static_cast<double>(ref.size());
    words += ref.size();
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << r.id << '\t' << ref.size() << '\t' << w << '\n';
    rows += os.str();
  }
  std::ostringstream total;
  total.setf(std::ios::fixed);
  total.precision(4);
  total << "ALL\t" << words << '\t' << (words ? errors / static_cast<double>(words) : 0.0) << '\n';
  rows += total.str();
  prepare_out(o);
  Output out(o, cmd);
  out.put("wer.tsv", rows);
  out.finish();
}

// ---- annotate / classify -----------------------------------------------

struct Target {
  std::string id;
  std::string text;
};

// Transcripts, reference synopses, and optional candidate / summary texts.
std::vector<Target> collect_targets(const Options& o, bool include_dialogs) {
  std::vector<Target> targets;
  if (!o.corpus.empty()) {
    for (const auto& d : load_corpus(o)) {
      if (include_dialogs) targets.push_back({d.id, d.transcript.plain_text()});
      if (d.reference_synopsis) {
        targets.push_back({metrics::reference_target_id(d.id), *d.reference_synopsis});
      }
    }
  }
  if (!o.candidates.empty()) {
    for (auto& c : read_raw_candidates(io::read_file(o.candidates))) {
      targets.push_back({c.candidate_id, std::move(c.text)});
    }
  }
  if (!o.summaries.empty()) {
    std::istringstream in(io::read_file(o.summaries));
    io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
      const auto dialog = io::require_string(obj, "dialog_id", line);
      targets.push_back({io::optional_string(obj, "summary_id", line).value_or(dialog),
                         io::require_string(obj, "text", line)});
    });
  }
  if (targets.empty()) throw UsageError("nothing to process: give --corpus, --candidates or --summaries");
  return targets;
}

void cmd_annotate(const Options& o, CLI::App* cmd) {
  if (o.gazetteer.empty() == o.endpoint.empty()) {
    throw UsageError("annotate needs exactly one of --gazetteer or --endpoint");
  }
  const auto targets = collect_targets(o, true);
  const auto match = match_config(o);
  std::map<std::string, annotate::EntitySet> sets;
  if (!o.endpoint.empty()) {
    backend::BackendClient client(o.endpoint);
    std::vector<std::string> texts;
    for (const auto& t : targets) texts.push_back(t.text);
    auto results = backend::ner_remote(client, texts, match);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!sets.emplace(targets[i].id, std::move(results[i])).second) {
        throw Error(Errc::duplicate_id, "target '" + targets[i].id + "' appears twice");
      }
    }
  } else {
    const auto gaz = annotate::Gazetteer::load_file(o.gazetteer);
    std::vector<std::optional<annotate::EntitySet>> results(targets.size());
    parallel_for(targets.size(), o.jobs, [&](std::size_t i) {
      results[i] = annotate::extract_entities(targets[i].text, gaz, match);
    });
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!sets.emplace(targets[i].id, std::move(*results[i])).second) {
        throw Error(Errc::duplicate_id, "target '" + targets[i].id + "' appears twice");
      }
    }
  }
  std::ostringstream os;
  annotate::save_entity_annotations(sets, os);
  prepare_out(o);
  Output out(o, cmd);
  out.put("annotations.jsonl", os.str());
  out.finish();
  std::cerr << "annotate: " << sets.size() << " targets\n";
}

void cmd_classify_train(const Options& o, CLI::App* cmd) {
  std::vector<classify::LabeledText> examples;
  for (const auto& d : load_corpus(o)) {
    if (!o.split.empty() && d.split.label != o.split) continue;
    if (!d.reference_call_type) continue;
    examples.push_back({d.transcript.plain_text(), *d.reference_call_type});
  }
  std::optional<classify::Inventory> inventory;
  if (!o.inventory.empty()) inventory = classify::Inventory(o.inventory);
  const auto model = classify::train_nb(examples, o.alpha, inventory);
  prepare_out(o);
  Output out(o, cmd);
  out.put("model.json", classify::save_model(model));
  out.finish();
  std::cerr << "classify train: " << examples.size() << " examples, "
            << model.inventory.size() << " call types\n";
}

void cmd_classify_predict(const Options& o, CLI::App* cmd) {
  if (o.model.empty() == o.endpoint.empty()) {
    throw UsageError("classify predict needs exactly one of --model or --endpoint");
  }
  const auto targets = collect_targets(o, true);
  classify::DistributionSet set;
  std::vector<std::optional<classify::CallTypeDistribution>> results(targets.size());
  if (!o.endpoint.empty()) {
    backend::BackendClient client(o.endpoint);
    classify::Inventory inventory = o.inventory.empty()
                                        ? classify::Inventory(client.fetch_inventory())
                                        : classify::Inventory(o.inventory);
    std::vector<std::string> texts;
    for (const auto& t : targets) texts.push_back(t.text);
    auto dists = backend::classify_remote(client, inventory, texts);
    for (std::size_t i = 0; i < targets.size(); ++i) results[i] = std::move(dists[i]);
    set.inventory = inventory;
  } else {
    const auto model = classify::load_model(io::read_file(o.model));
    parallel_for(targets.size(), o.jobs, [&](std::size_t i) {
      results[i] = classify::predict_distribution(model, targets[i].text);
    });
    set.inventory = model.inventory;
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!set.by_target.emplace(targets[i].id, std::move(*results[i])).second) {
      throw Error(Errc::duplicate_id, "target '" + targets[i].id + "' appears twice");
    }
  }
  std::ostringstream os;
  classify::save_distributions(set, os);
  prepare_out(o);
  Output out(o, cmd);
  out.put("distributions.jsonl", os.str());
  out.finish();
  std::cerr << "classify predict: " << set.by_target.size() << " targets\n";
}

// ---- grid / prompt -------------------------------------------------------

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

double parse_number(const std::string& s, const std::string& flag) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(flag + ": '" + s + "' is not a number");
  }
}

// LO:HI:STEP; `closed` includes HI.
gen::DecimalRange parse_range(const std::string& s, const std::string& flag, bool closed) {
  auto parts = split_on(s, ':');
  if (parts.size() != 3) throw UsageError(flag + " expects LO:HI:STEP");
  return gen::DecimalRange{parse_number(parts[0], flag), parse_number(parts[1], flag),
                           parse_number(parts[2], flag), closed};
}

gen::GridSpec grid_spec(const Options& o) {
  gen::GridSpec spec = o.paper_defaults ? gen::GridSpec::paper_defaults() : gen::GridSpec{};
  if (!o.paper_defaults) spec.include_greedy = false;
  spec.mode = gen::parse_grid_mode(o.mode);
  if (!o.top_p.empty()) spec.top_p = parse_range(o.top_p, "--top-p", false);
  if (!o.top_k.empty()) spec.top_k = parse_range(o.top_k, "--top-k", false);
  if (!o.temperature.empty()) spec.temperature = parse_range(o.temperature, "--temperature", true);
  if (o.greedy) spec.include_greedy = true;
  if (!o.beam.empty()) {
    auto parts = split_on(o.beam, ':');
    if (parts.size() != 2) throw UsageError("--beam expects SIZE:NBEST");
    spec.beam = gen::Beam{static_cast<int>(parse_number(parts[0], "--beam")),
                          static_cast<int>(parse_number(parts[1], "--beam"))};
  }
  spec.n_samples_per_config = o.samples;
  spec.seed = o.seed;
  return spec;
}

void cmd_grid(const Options& o, CLI::App* cmd) {
  const auto records = load_corpus(o);
  const auto spec = grid_spec(o);

  std::optional<classify::TableSource> table;
  std::optional<classify::ModelSource> model;
  gen::ConditioningOptions conditioning;
  conditioning.separator = o.separator;
  if (o.condition) {
    if (!o.model.empty()) {
      model.emplace(classify::load_model(io::read_file(o.model)));
      conditioning.source = &*model;
    } else if (o.distributions.size() == 1) {
      table.emplace(classify::load_distributions_file(o.distributions.front()));
      conditioning.source = &*table;
    } else {
      throw UsageError("--condition needs --model or a single --distributions file");
    }
  }
  const auto manifests = gen::emit_manifests(records, spec, conditioning);
  std::ostringstream os;
  gen::save_manifests(manifests, os);
  prepare_out(o);
  Output out(o, cmd);
  out.put("manifests.jsonl", os.str());
  out.finish();
  if (!manifests.empty()) {
    std::cerr << "grid: " << manifests.size() << " dialogs, " << manifests.front().configs.size()
              << " configs, " << manifests.front().expected_candidates
              << " expected candidates per dialog\n";
  }
}

void cmd_prompt(const Options& o, CLI::App* cmd) {
  gen::PromptRequest req;
  req.exemplar_dialog = io::read_file(o.exemplar);
  req.exemplar_summary = std::string(faithsel::text::trim(io::read_file(o.exemplar_summary)));
  req.target_dialog = io::read_file(o.target);
  req.template_text = o.template_file.empty() ? std::string(gen::default_prompt_template())
                                              : io::read_file(o.template_file);
  req.allow_empty_target = o.allow_empty_target;
  const auto prompt = gen::build_augmentation_prompt(req);
  prepare_out(o);
  Output out(o, cmd);
  out.put("prompt.txt", prompt);
  out.finish();
}

// ---- ingest / select -----------------------------------------------------

struct Pools {
  std::vector<corpus::DialogRecord> records;
  gen::IngestResult ingest;
};

Pools assemble_pools(const Options& o) {
  Pools p;
  p.records = load_corpus(o);
  const auto manifests = gen::load_manifests_file(o.manifest);
  const std::string candidates = io::read_file(o.candidates);

  Artifacts a = load_artifacts(o);
  for (const auto& d : p.records) {
    const auto plain = d.transcript.plain_text();
    a.want_entities(d.id, plain);
    a.want_distribution(d.id, plain);
  }
  for (const auto& c : read_raw_candidates(candidates)) {
    a.want_entities(c.candidate_id, c.text);
    a.want_distribution(c.candidate_id, c.text);
  }

  gen::ArtifactMaps maps;
  maps.entities = &a.entities;
  maps.match = a.match;
  maps.distributions = &a.distributions;
  std::istringstream in(candidates);
  p.ingest = gen::ingest_candidates(manifests, in, p.records, maps, {o.strict, o.partial});
  for (const auto& w : p.ingest.warnings) std::cerr << "faithsel: warning: " << w << '\n';
  for (const auto& [dialog, why] : p.ingest.skipped) {
    std::cerr << "faithsel: skipped " << dialog << ": " << why << '\n';
  }
  return p;
}

void cmd_ingest(const Options& o, CLI::App* cmd) {
  const auto p = assemble_pools(o);
  std::string content;
  for (const auto& pool : p.ingest.pools) {
    json cands = json::array();
    for (const auto& c : pool.candidates) {
      cands.push_back({{"candidate_id", c.candidate_id},
                       {"config_id", c.decode_config_id},
                       {"n_entities", c.entities.size()}});
    }
    content += json{{"dialog_id", pool.dialog_id}, {"candidates", std::move(cands)}}.dump() + "\n";
  }
  prepare_out(o);
  Output out(o, cmd);
  out.put("pools.jsonl", content);
  out.finish();
  std::cerr << "ingest: " << p.ingest.pools.size() << " pools, " << p.ingest.skipped.size()
            << " skipped, " << p.ingest.warnings.size() << " warnings\n";
}

void cmd_select(const Options& o, CLI::App* cmd) {
  criteria::SelectionOptions sel;
  sel.epsilon = o.epsilon;
  sel.presence = o.presence == "membership" ? criteria::Presence::membership
                                            : criteria::Presence::containment;
  if (!o.baseline_config.empty()) sel.baseline_config = o.baseline_config;
  const auto criterion = parse_criterion_arg(o.criterion);

  auto p = assemble_pools(o);
  auto& pools = p.ingest.pools;
  std::sort(pools.begin(), pools.end(),
            [](const auto& a, const auto& b) { return a.dialog_id < b.dialog_id; });
  std::vector<std::optional<criteria::SelectionResult>> results(pools.size());
  parallel_for(pools.size(), o.jobs, [&](std::size_t i) {
    results[i] = criteria::select(pools[i], criterion, sel);
  });

  std::string content;
  std::size_t ties = 0;
  std::size_t entity_free = 0;
  for (const auto& r : results) {
    content += criteria::selection_to_json(*r).dump() + "\n";
    ties += r->tie_broken ? 1 : 0;
    entity_free += r->chosen_score().nehr.entity_free() ? 1 : 0;
  }
  prepare_out(o);
  Output out(o, cmd);
  out.put("selections.jsonl", content);
  out.finish();
  std::cerr << "select[" << o.criterion << "]: " << results.size() << " dialogs, " << ties
            << " tie-broken, " << entity_free << " entity-free choices, "
            << p.ingest.skipped.size() << " skipped\n";
}

// ---- evaluate ------------------------------------------------------------

std::map<std::string, metrics::Summary> evaluated_summaries(const Options& o) {
  std::map<std::string, metrics::Summary> out;
  auto add = [&](const std::string& dialog, metrics::Summary s, std::size_t line) {
    if (!out.emplace(dialog, std::move(s)).second) {
      throw Error(Errc::duplicate_id, "dialog '" + dialog + "' has several summaries", line);
    }
  };
  if (!o.summaries.empty()) {
    std::istringstream in(io::read_file(o.summaries));
    io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
      const auto dialog = io::require_string(obj, "dialog_id", line);
      metrics::Summary s{io::optional_string(obj, "summary_id", line).value_or(dialog),
                         io::require_string(obj, "text", line),
                         {}};
      if (auto it = obj.find("external_scores"); it != obj.end() && it->is_object()) {
        for (auto e = it->begin(); e != it->end(); ++e) {
          if (!e->is_number()) {
            throw Error(Errc::schema_violation, "external score '" + e.key() + "' is not a number", line);
          }
          s.external_scores[e.key()] = e->get<double>();
        }
      }
      add(dialog, std::move(s), line);
    });
    return out;
  }
  std::map<std::string, gen::RawCandidate> by_id;
  for (auto& c : read_raw_candidates(io::read_file(o.candidates))) {
    by_id.emplace(c.candidate_id, std::move(c));
  }
  std::istringstream in(io::read_file(o.selection));
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    const auto r = criteria::selection_from_json(obj, line);
    auto c = by_id.find(r.chosen);
    if (c == by_id.end()) {
      throw Error(Errc::missing_artifact, "selected candidate '" + r.chosen + "' not in --candidates", line);
    }
    add(r.dialog_id, {c->second.candidate_id, c->second.text, c->second.external_scores}, line);
  });
  return out;
}

void cmd_evaluate(const Options& o, CLI::App* cmd) {
  if (o.summaries.empty() == o.selection.empty()) {
    throw UsageError("evaluate needs exactly one of --summaries or --selection");
  }
  if (!o.selection.empty() && o.candidates.empty()) {
    throw UsageError("--selection needs --candidates for the summary texts");
  }
  const auto records = load_corpus(o);
  const auto summaries = evaluated_summaries(o);
  Artifacts a = load_artifacts(o);
  const bool classifier_ref = o.ct_reference == "dialog_classifier";
  for (const auto& d : records) {
    if (d.reference_synopsis) {
      a.want_entities(metrics::reference_target_id(d.id), *d.reference_synopsis);
    }
    if (classifier_ref) a.want_distribution(d.id, d.transcript.plain_text());
  }
  for (const auto& [dialog, s] : summaries) {
    a.want_entities(s.summary_id, s.text);
    a.want_distribution(s.summary_id, s.text);
  }

  metrics::ReportInputs inputs{records, &summaries, &a.entities, &a.distributions};
  metrics::ReportOptions opts;
  opts.system = o.system;
  opts.beta = o.beta;
  opts.partial = o.partial;
  opts.ct_reference = classifier_ref ? metrics::CtReference::dialog_classifier
                                     : metrics::CtReference::annotated;
  opts.jobs = o.jobs;
  const auto report = metrics::build_report(inputs, opts);

  prepare_out(o);
  Output out(o, cmd);
  if (out.to_directory()) {
    out.put("report.json", metrics::report_to_json(report).dump(2) + "\n");
    out.put("per_dialog.tsv", metrics::report_tsv(report));
    out.put("aggregate.tsv", metrics::aggregate_tsv(report));
  }
  if (o.format == "tsv") {
    std::cout << metrics::aggregate_tsv(report);
  } else {
    std::cout << metrics::report_to_json(report)["aggregate"].dump(2) << '\n';
  }
  out.finish();
  std::cerr << "evaluate: " << report.per_dialog.size() << " dialogs, " << report.excluded.size()
            << " excluded\n";
}

// Values from the config file fill options not given on the command line.
// Top-level keys may serve several subcommands, so unknown ones are ignored;
// keys under a section naming this subcommand must exist.
void merge_config(CLI::App* cmd, const std::vector<std::string>& section) {
  std::string path = g_config_path[cmd];
  if (path.empty()) {
    if (const char* env = std::getenv("FAITHSEL_CONFIG")) path = env;
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config file " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw Error(Errc::schema_violation, "config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--" || item.name == "config") continue;
    const bool scoped = !item.parents.empty();
    if (scoped && item.parents != section) continue;
    CLI::Option* opt = cmd->get_option_no_throw("--" + item.name);
    if (!opt) {
      if (scoped) throw UsageError("config file " + path + ": unknown option '" + item.name + "'");
      continue;
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError("config file " + path + ": " + item.name + ": " + e.what());
    }
  }
}

void check_required(CLI::App* cmd) {
  for (auto* opt : g_required[cmd]) {
    if (opt->count() == 0) throw UsageError(opt->get_name() + " is required");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Faithful summary selection and task-semantic evaluation"};
  app.require_subcommand(1);
  Options o;

  const std::vector<std::string> formats = {"json", "tsv"};

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  add_corpus(stats, o);
  stats->add_option("--format", o.format, "Output format")->check(CLI::IsMember(formats));
  add_out(stats, o);

  auto* wer = app.add_subcommand("wer", "Word error rate of hypothesis transcripts against --corpus");
  add_corpus(wer, o);
  need(wer, wer->add_option("--hypothesis", o.hypothesis, "Corpus of hypothesis (ASR) transcripts"));
  add_out(wer, o);

  auto* annotate_cmd = app.add_subcommand("annotate", "Extract entities from transcripts, synopses and summaries");
  add_corpus(annotate_cmd, o, false);
  annotate_cmd->add_option("--candidates", o.candidates, "Candidate summaries (JSON lines)");
  annotate_cmd->add_option("--summaries", o.summaries, "Fixed summaries (JSON lines)");
  annotate_cmd->add_option("--gazetteer", o.gazetteer, "Gazetteer TSV");
  annotate_cmd->add_option("--endpoint", o.endpoint, "Remote NER service base URL");
  add_matching(annotate_cmd, o);
  add_jobs(annotate_cmd, o);
  add_out(annotate_cmd, o);

  auto* classify_cmd = app.add_subcommand("classify", "Train or apply a call-type classifier");
  classify_cmd->require_subcommand(1);
  auto* train = classify_cmd->add_subcommand("train", "Train the naive Bayes classifier");
  add_corpus(train, o);
  train->add_option("--alpha", o.alpha, "Additive smoothing")->capture_default_str();
  train->add_option("--split", o.split, "Train only on dialogs of this split");
  train->add_option("--inventory", o.inventory, "Call-type labels, in order")->delimiter(',');
  add_out(train, o);
  auto* predict = classify_cmd->add_subcommand("predict", "Write call-type distributions");
  add_corpus(predict, o, false);
  predict->add_option("--candidates", o.candidates, "Candidate summaries (JSON lines)");
  predict->add_option("--summaries", o.summaries, "Fixed summaries (JSON lines)");
  predict->add_option("--model", o.model, "Trained model file");
  predict->add_option("--endpoint", o.endpoint, "Remote classifier base URL");
  predict->add_option("--inventory", o.inventory, "Expected inventory for the remote handshake")
      ->delimiter(',');
  add_jobs(predict, o);
  add_out(predict, o);

  auto* grid = app.add_subcommand("grid", "Emit generation manifests");
  add_corpus(grid, o);
  grid->add_flag("--paper-defaults", o.paper_defaults, "Start from the reference decoding grid");
  grid->add_option("--mode", o.mode, "Grid mode")
      ->check(CLI::IsMember({"independent_sweeps", "cross_product"}))
      ->capture_default_str();
  grid->add_option("--top-p", o.top_p, "Top-p values LO:HI:STEP, HI excluded");
  grid->add_option("--top-k", o.top_k, "Top-k values LO:HI:STEP, HI excluded");
  grid->add_option("--temperature", o.temperature, "Temperature values LO:HI:STEP, HI included");
  grid->add_flag("--greedy", o.greedy, "Add a greedy config");
  grid->add_option("--beam", o.beam, "Add a beam config SIZE:NBEST");
  grid->add_option("--samples", o.samples, "Samples per sampling config")->capture_default_str();
  grid->add_option("--seed", o.seed, "Sampling seed recorded in the configs");
  grid->add_flag("--condition", o.condition, "Prepend the predicted call type to each input");
  grid->add_option("--model", o.model, "Classifier used for --condition");
  grid->add_option("--distributions", o.distributions, "Dialog distributions used for --condition");
  grid->add_option("--separator", o.separator, "Call type / dialog separator")->capture_default_str();
  add_out(grid, o);

  auto* prompt = app.add_subcommand("prompt", "Build a one-shot augmentation prompt");
  need(prompt, prompt->add_option("--exemplar", o.exemplar, "Exemplar dialog in turn markup"));
  need(prompt, prompt->add_option("--exemplar-summary", o.exemplar_summary, "Exemplar summary text file"));
  need(prompt, prompt->add_option("--target", o.target, "Dialog to summarize, in turn markup"));
  prompt->add_option("--template", o.template_file, "Prompt template (built-in French one by default)");
  prompt->add_flag("--allow-empty-target", o.allow_empty_target, "Accept a target without turns");
  add_out(prompt, o);

  auto add_pool_inputs = [&](CLI::App* cmd) {
    add_corpus(cmd, o);
    need(cmd, cmd->add_option("--manifest", o.manifest, "Generation manifests"));
    need(cmd, cmd->add_option("--candidates", o.candidates, "Candidate summaries (JSON lines)"));
    add_entity_sources(cmd, o);
    add_distribution_sources(cmd, o);
    cmd->add_flag("--strict", o.strict, "Candidate count mismatches are errors");
    cmd->add_flag("--partial", o.partial, "Skip dialogs with missing artifacts");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate candidates against manifests and artifacts");
  add_pool_inputs(ingest);
  add_out(ingest, o);

  auto* select = app.add_subcommand("select", "Pick one candidate per dialog");
  add_pool_inputs(select);
  select->add_option("--criterion", o.criterion, "Selection criterion")
      ->check(CLI::IsMember({"baseline_first", "min_nehr", "min_kl", "combined"}))
      ->capture_default_str();
  select->add_option("--epsilon", o.epsilon, "KL smoothing constant")->capture_default_str();
  select->add_option("--baseline-config", o.baseline_config, "Config whose first candidate is the baseline");
  select->add_option("--presence", o.presence, "Entity presence test")
      ->check(CLI::IsMember({"containment", "membership"}))
      ->capture_default_str();
  add_jobs(select, o);
  add_out(select, o);

  auto* evaluate = app.add_subcommand("evaluate", "Score summaries against references");
  add_corpus(evaluate, o);
  evaluate->add_option("--summaries", o.summaries, "Fixed summaries (JSON lines)");
  evaluate->add_option("--selection", o.selection, "Selection results");
  evaluate->add_option("--candidates", o.candidates, "Candidates the selection refers to");
  add_entity_sources(evaluate, o);
  add_distribution_sources(evaluate, o);
  evaluate->add_option("--beta", o.beta, "ROUGE-L recall weight")->capture_default_str();
  evaluate->add_option("--system", o.system, "System name in the aggregate row")->capture_default_str();
  evaluate->add_option("--ct-reference", o.ct_reference, "Reference call type source")
      ->check(CLI::IsMember({"annotated", "dialog_classifier"}))
      ->capture_default_str();
  evaluate->add_flag("--partial", o.partial, "Skip dialogs with missing artifacts");
  evaluate->add_option("--format", o.format, "Stdout format")->check(CLI::IsMember(formats));
  add_jobs(evaluate, o);
  add_out(evaluate, o);

  for (auto* cmd : {stats, wer, annotate_cmd, train, predict, grid, prompt, ingest, select, evaluate}) {
    add_config(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const std::vector<std::pair<CLI::App*, std::vector<std::string>>> commands = {
        {stats, {"stats"}},       {wer, {"wer"}},       {annotate_cmd, {"annotate"}},
        {train, {"classify", "train"}}, {predict, {"classify", "predict"}},
        {grid, {"grid"}},         {prompt, {"prompt"}}, {ingest, {"ingest"}},
        {select, {"select"}},     {evaluate, {"evaluate"}}};
    for (const auto& [cmd, section] : commands) {
      if (!*cmd) continue;
      merge_config(cmd, section);
      check_required(cmd);
    }
    if (*stats) cmd_stats(o, stats);
    else if (*wer) cmd_wer(o, wer);
    else if (*annotate_cmd) cmd_annotate(o, annotate_cmd);
    else if (*train) cmd_classify_train(o, train);
    else if (*predict) cmd_classify_predict(o, predict);
    else if (*grid) cmd_grid(o, grid);
    else if (*prompt) cmd_prompt(o, prompt);
    else if (*ingest) cmd_ingest(o, ingest);
    else if (*select) cmd_select(o, select);
    else if (*evaluate) cmd_evaluate(o, evaluate);
  } catch (const UsageError& e) {
    std::cerr << "faithsel: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "faithsel: " << e.what() << '\n';
    return e.exit_status();
  } catch (const std::exception& e) {
    std::cerr << "faithsel: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
