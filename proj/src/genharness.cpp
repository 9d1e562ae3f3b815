#include "faithsel/genharness.hpp"

#include "faithsel/error.hpp"
#include "faithsel/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <unordered_map>

namespace faithsel::gen {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool near_integer(double x) {
  return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x));
}

}  // namespace

std::size_t DecodeConfig::candidate_count() const {
  return std::visit(overloaded{[](const Greedy&) -> std::size_t { return 1; },
                               [](const Beam& b) -> std::size_t {
                                 return static_cast<std::size_t>(b.n_best);
                               },
                               [](const Sample& s) -> std::size_t {
                                 return static_cast<std::size_t>(s.n_samples);
                               }},
                    strategy);
}

std::string make_config_id(const Strategy& strategy) {
  return std::visit(
      overloaded{[](const Greedy&) { return std::string("greedy"); },
                 [](const Beam& b) {
                   return "beam-s" + std::to_string(b.size) + "-n" + std::to_string(b.n_best);
                 },
                 [](const Sample& s) {
                   std::string id = "sample";
                   if (s.top_p) id += "-p" + shortest(*s.top_p);
                   if (s.top_k) id += "-k" + std::to_string(*s.top_k);
                   id += "-t" + shortest(s.temperature);
                   id += "-n" + std::to_string(s.n_samples);
                   if (s.seed) id += "-seed" + std::to_string(*s.seed);
                   return id;
                 }},
      strategy);
}

DecodeConfig make_config(Strategy strategy) {
  DecodeConfig c{make_config_id(strategy), std::move(strategy)};
  validate(c);
  return c;
}

void validate(const DecodeConfig& config) {
  auto bad = [&](const std::string& why) {
    return Error(Errc::invalid_range, "config '" + config.config_id + "': " + why);
  };
  if (config.config_id.empty()) throw bad("empty config id");
  if (const auto* b = std::get_if<Beam>(&config.strategy)) {
    if (b->size < 1 || b->n_best < 1) throw bad("beam size and n_best must be >= 1");
    if (b->n_best > b->size) throw bad("n_best exceeds beam size");
  } else if (const auto* s = std::get_if<Sample>(&config.strategy)) {
    if (s->n_samples < 1) throw bad("n_samples must be >= 1");
    if (!(s->temperature > 0.0) || !std::isfinite(s->temperature)) {
      throw bad("temperature must be > 0");
    }
    if (s->top_p && !(*s->top_p > 0.0 && *s->top_p <= 1.0)) throw bad("top_p must be in (0, 1]");
    if (s->top_k && *s->top_k < 1) throw bad("top_k must be >= 1");
    const bool deviates = s->top_p || s->top_k || s->temperature != 1.0;
    if (!deviates && !s->pure) throw bad("sampling config changes nothing and is not marked pure");
  }
}

std::vector<double> DecimalRange::values() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step)) {
    throw Error(Errc::invalid_range, "non-finite range bound");
  }
  if (!(step > 0.0)) throw Error(Errc::invalid_range, "step must be > 0");
  if (lo > hi) throw Error(Errc::invalid_range, "lower bound exceeds upper bound");

  std::vector<double> out;
  for (int digits = 0; digits <= 9; ++digits) {
    const double scale = std::pow(10.0, digits);
    if (!near_integer(lo * scale) || !near_integer(hi * scale) || !near_integer(step * scale)) {
      continue;
    }
    const auto first = std::llround(lo * scale);
    const auto last = std::llround(hi * scale);
    const auto inc = std::llround(step * scale);
    for (long long v = first; closed_upper ? v <= last : v < last; v += inc) {
      out.push_back(static_cast<double>(v) / scale);
    }
    if (out.empty()) throw Error(Errc::invalid_range, "range contains no value");
    return out;
  }
  // No short decimal form: index-based generation with a relative guard.
  const double guard = 1e-9 * step;
  for (std::size_t i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    if (closed_upper ? v > hi + guard : v >= hi - guard) break;
    out.push_back(v);
  }
  if (out.empty()) throw Error(Errc::invalid_range, "range contains no value");
  return out;
}

std::string_view grid_mode_name(GridMode mode) {
  return mode == GridMode::cross_product ? "cross_product" : "independent_sweeps";
}

GridMode parse_grid_mode(std::string_view name) {
  if (name == "independent_sweeps") return GridMode::independent_sweeps;
  if (name == "cross_product") return GridMode::cross_product;
  throw Error(Errc::invalid_argument, "unknown grid mode '" + std::string(name) + "'");
}

GridSpec GridSpec::paper_defaults() {
  GridSpec spec;
  spec.top_p = DecimalRange{0.70, 0.95, 0.05, false};
  spec.top_k = DecimalRange{30, 100, 15, false};
  spec.temperature = DecimalRange{0.7, 1.0, 0.1, true};
  spec.include_greedy = true;
  spec.beam = Beam{6, 6};
  spec.mode = GridMode::independent_sweeps;
  spec.n_samples_per_config = 1;
  return spec;
}

std::vector<DecodeConfig> expand_grid(const GridSpec& spec) {
  if (spec.n_samples_per_config < 1) {
    throw Error(Errc::invalid_range, "samples per config must be >= 1");
  }
  auto sample = [&](std::optional<double> p, std::optional<double> k, double t) {
    Sample s;
    s.top_p = p;
    if (k) {
      if (!near_integer(*k)) throw Error(Errc::invalid_range, "top-k values must be integers");
      s.top_k = static_cast<int>(std::llround(*k));
    }
    s.temperature = t;
    s.n_samples = spec.n_samples_per_config;
    s.seed = spec.seed;
    s.pure = !s.top_p && !s.top_k && s.temperature == 1.0;
    return make_config(s);
  };
  auto values = [](const std::optional<DecimalRange>& r) {
    return r ? r->values() : std::vector<double>{};
  };
  const auto ps = values(spec.top_p);
  const auto ks = values(spec.top_k);
  const auto ts = values(spec.temperature);

  std::vector<DecodeConfig> out;
  if (spec.mode == GridMode::independent_sweeps) {
    for (double p : ps) out.push_back(sample(p, std::nullopt, 1.0));
    for (double k : ks) out.push_back(sample(std::nullopt, k, 1.0));
    for (double t : ts) out.push_back(sample(std::nullopt, std::nullopt, t));
  } else if (!ps.empty() || !ks.empty() || !ts.empty()) {
    std::vector<std::optional<double>> p_axis(ps.begin(), ps.end());
    std::vector<std::optional<double>> k_axis(ks.begin(), ks.end());
    if (p_axis.empty()) p_axis.push_back(std::nullopt);
    if (k_axis.empty()) k_axis.push_back(std::nullopt);
    const std::vector<double> t_axis = ts.empty() ? std::vector<double>{1.0} : ts;
    for (const auto& p : p_axis) {
      for (const auto& k : k_axis) {
        for (double t : t_axis) out.push_back(sample(p, k, t));
      }
    }
  }
  if (spec.include_greedy) out.push_back(make_config(Greedy{}));
  if (spec.beam) out.push_back(make_config(*spec.beam));

  std::set<std::string> ids;
  for (const auto& c : out) {
    if (!ids.insert(c.config_id).second) {
      throw Error(Errc::invalid_range, "grid produces config '" + c.config_id + "' twice");
    }
  }
  return out;
}

std::size_t expected_candidates(std::span<const DecodeConfig> configs) {
  std::size_t n = 0;
  for (const auto& c : configs) n += c.candidate_count();
  return n;
}

json strategy_to_json(const Strategy& strategy) {
  return std::visit(overloaded{[](const Greedy&) { return json{{"type", "greedy"}}; },
                               [](const Beam& b) {
                                 return json{{"type", "beam"}, {"size", b.size},
                                             {"n_best", b.n_best}};
                               },
                               [](const Sample& s) {
                                 json j = {{"type", "sample"},
                                           {"temperature", s.temperature},
                                           {"n_samples", s.n_samples}};
                                 if (s.top_p) j["top_p"] = *s.top_p;
                                 if (s.top_k) j["top_k"] = *s.top_k;
                                 if (s.seed) j["seed"] = *s.seed;
                                 if (s.pure) j["pure"] = true;
                                 return j;
                               }},
                    strategy);
}

Strategy strategy_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw Error(Errc::schema_violation, "strategy must be an object", line);
  const std::string type = io::require_string(obj, "type", line);
  try {
    if (type == "greedy") return Greedy{};
    if (type == "beam") return Beam{obj.at("size").get<int>(), obj.at("n_best").get<int>()};
    if (type == "sample") {
      Sample s;
      s.temperature = obj.value("temperature", 1.0);
      s.n_samples = obj.value("n_samples", 1);
      if (obj.contains("top_p")) s.top_p = obj["top_p"].get<double>();
      if (obj.contains("top_k")) s.top_k = obj["top_k"].get<int>();
      if (obj.contains("seed")) s.seed = obj["seed"].get<std::int64_t>();
      s.pure = obj.value("pure", false);
      return s;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("strategy: ") + e.what(), line);
  }
  throw Error(Errc::schema_violation, "unknown strategy type '" + type + "'", line);
}

json manifest_to_json(const GenerationManifest& m) {
  json configs = json::array();
  for (const auto& c : m.configs) {
    configs.push_back({{"config_id", c.config_id}, {"strategy", strategy_to_json(c.strategy)}});
  }
  return {{"dialog_id", m.dialog_id},
          {"input", m.input_text},
          {"configs", std::move(configs)},
          {"expected_candidates", m.expected_candidates}};
}

GenerationManifest manifest_from_json(const json& obj, std::size_t line) {
  GenerationManifest m;
  m.dialog_id = io::require_string(obj, "dialog_id", line);
  m.input_text = io::require_string(obj, "input", line);
  const json& configs = io::require(obj, "configs", line);
  if (!configs.is_array()) throw Error(Errc::schema_violation, "'configs' must be an array", line);
  for (const auto& c : configs) {
    DecodeConfig dc{io::require_string(c, "config_id", line),
                    strategy_from_json(io::require(c, "strategy", line), line)};
    try {
      validate(dc);
    } catch (const Error& e) {
      throw Error(Errc::schema_violation, e.detail(), line);
    }
    m.configs.push_back(std::move(dc));
  }
  const json& expected = io::require(obj, "expected_candidates", line);
  if (!expected.is_number_unsigned()) {
    throw Error(Errc::schema_violation, "'expected_candidates' must be a count", line);
  }
  m.expected_candidates = expected.get<std::size_t>();
  if (m.expected_candidates != expected_candidates(m.configs)) {
    throw Error(Errc::schema_violation, "'expected_candidates' disagrees with the configs", line);
  }
  return m;
}

std::vector<GenerationManifest> load_manifests(std::istream& in) {
  std::vector<GenerationManifest> out;
  std::set<std::string> seen;
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    auto m = manifest_from_json(obj, line);
    if (!seen.insert(m.dialog_id).second) {
      throw Error(Errc::duplicate_id, "manifest for '" + m.dialog_id + "' appears twice", line);
    }
    out.push_back(std::move(m));
  });
  return out;
}

std::vector<GenerationManifest> load_manifests_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open manifest " + path);
  return load_manifests(in);
}

void save_manifests(std::span<const GenerationManifest> manifests, std::ostream& out) {
  for (const auto& m : manifests) out << manifest_to_json(m).dump() << '\n';
}

std::string build_conditioned_input(const corpus::Transcript& transcript,
                                    std::string_view call_type, std::string_view separator) {
  if (separator.empty()) throw Error(Errc::separator_collision, "separator is empty");
  if (call_type.find(separator) != std::string_view::npos) {
    throw Error(Errc::separator_collision,
                "call type '" + std::string(call_type) + "' contains the separator");
  }
  std::string out(call_type);
  out += separator;
  out += corpus::serialize_turn_markup(transcript);
  return out;
}

std::optional<corpus::Transcript> strip_conditioning(std::string_view input,
                                                     std::string_view call_type,
                                                     std::string_view separator) {
  const std::size_t prefix = call_type.size() + separator.size();
  if (input.size() < prefix || input.substr(0, call_type.size()) != call_type ||
      input.substr(call_type.size(), separator.size()) != separator) {
    return std::nullopt;
  }
  return corpus::parse_turn_markup(input.substr(prefix));
}

std::vector<GenerationManifest> emit_manifests(std::span<const corpus::DialogRecord> corpus,
                                               const GridSpec& spec,
                                               const ConditioningOptions& conditioning) {
  const auto configs = expand_grid(spec);
  const std::size_t expected = expected_candidates(configs);
  std::vector<GenerationManifest> out;
  out.reserve(corpus.size());
  for (const auto& dialog : corpus) {
    GenerationManifest m;
    m.dialog_id = dialog.id;
    m.configs = configs;
    m.expected_candidates = expected;
    if (conditioning.source) {
      auto d = conditioning.source->distribution_for(dialog);
      if (!d) {
        throw Error(Errc::missing_distribution,
                    "no call-type distribution for dialog '" + dialog.id + "'");
      }
      m.input_text = build_conditioned_input(dialog.transcript, classify::argmax_calltype(*d),
                                             conditioning.separator);
    } else {
      m.input_text = corpus::serialize_turn_markup(dialog.transcript);
    }
    out.push_back(std::move(m));
  }
  return out;
}

RawCandidate candidate_from_json(const json& obj, std::size_t line) {
  RawCandidate c;
  c.dialog_id = io::require_string(obj, "dialog_id", line);
  c.config_id = io::require_string(obj, "config_id", line);
  c.candidate_id = io::require_string(obj, "candidate_id", line);
  c.text = io::require_string(obj, "text", line);
  if (auto it = obj.find("external_scores"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) {
      throw Error(Errc::schema_violation, "'external_scores' must be an object", line);
    }
    for (auto s = it->begin(); s != it->end(); ++s) {
      if (!s->is_number()) {
        throw Error(Errc::schema_violation, "external score '" + s.key() + "' is not a number",
                    line);
      }
      c.external_scores[s.key()] = s->get<double>();
    }
  }
  return c;
}

json candidate_to_json(const RawCandidate& c) {
  json j = {{"dialog_id", c.dialog_id},
            {"config_id", c.config_id},
            {"candidate_id", c.candidate_id},
            {"text", c.text}};
  if (!c.external_scores.empty()) j["external_scores"] = c.external_scores;
  return j;
}

bool natural_less(std::string_view a, std::string_view b) {
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      auto da = a.substr(i, ie - i);
      auto db = b.substr(j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

std::vector<RawPool> read_candidates(std::span<const GenerationManifest> manifests,
                                     std::istream& in, const IngestOptions& options,
                                     std::vector<std::string>* warnings) {
  std::unordered_map<std::string, std::size_t> dialog_index;
  std::vector<std::unordered_map<std::string, std::size_t>> config_index(manifests.size());
  for (std::size_t d = 0; d < manifests.size(); ++d) {
    dialog_index.emplace(manifests[d].dialog_id, d);
    for (std::size_t c = 0; c < manifests[d].configs.size(); ++c) {
      config_index[d].emplace(manifests[d].configs[c].config_id, c);
    }
  }

  std::vector<std::vector<std::pair<std::size_t, RawCandidate>>> grouped(manifests.size());
  std::set<std::string> seen;
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    RawCandidate c = candidate_from_json(obj, line);
    auto d = dialog_index.find(c.dialog_id);
    if (d == dialog_index.end()) {
      throw Error(Errc::unknown_dialog, "candidate for unknown dialog '" + c.dialog_id + "'", line);
    }
    auto cfg = config_index[d->second].find(c.config_id);
    if (cfg == config_index[d->second].end()) {
      throw Error(Errc::unknown_config, "config '" + c.config_id + "' is not in the manifest of '" +
                                            c.dialog_id + "'",
                  line);
    }
    if (!seen.insert(c.candidate_id).second) {
      throw Error(Errc::duplicate_id, "candidate id '" + c.candidate_id + "' appears twice", line);
    }
    grouped[d->second].emplace_back(cfg->second, std::move(c));
  });

  std::vector<RawPool> pools;
  for (std::size_t d = 0; d < manifests.size(); ++d) {
    auto& items = grouped[d];
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return natural_less(a.second.candidate_id, b.second.candidate_id);
    });
    if (items.size() != manifests[d].expected_candidates) {
      std::string msg = "dialog '" + manifests[d].dialog_id + "' has " +
                        std::to_string(items.size()) + " candidates, manifest expects " +
                        std::to_string(manifests[d].expected_candidates);
      if (options.strict) throw Error(Errc::count_mismatch, msg);
      if (warnings) warnings->push_back(msg);
    }
    RawPool pool;
    pool.dialog_id = manifests[d].dialog_id;
    for (auto& [cfg, c] : items) pool.candidates.push_back(std::move(c));
    pools.push_back(std::move(pool));
  }
  return pools;
}

criteria::CandidatePool attach_artifacts(const RawPool& raw, const corpus::DialogRecord& dialog,
                                         const ArtifactMaps& artifacts) {
  auto missing = [&](const std::string& what) {
    return Error(Errc::missing_artifact, "dialog '" + raw.dialog_id + "' lacks " + what);
  };
  if (raw.candidates.empty()) throw missing("candidates");
  if (!artifacts.distributions) throw missing("call-type distributions");
  auto dialog_dist = artifacts.distributions->find(raw.dialog_id);
  if (dialog_dist == artifacts.distributions->end()) throw missing("a dialog distribution");

  criteria::CandidatePool pool{raw.dialog_id, {}, dialog_dist->second, dialog.transcript, {}};
  for (const auto& rc : raw.candidates) {
    auto dist = artifacts.distributions->find(rc.candidate_id);
    if (dist == artifacts.distributions->end()) {
      throw missing("a distribution for candidate '" + rc.candidate_id + "'");
    }
    annotate::EntitySet entities(artifacts.match);
    if (artifacts.entities) {
      auto e = artifacts.entities->find(rc.candidate_id);
      if (e == artifacts.entities->end()) {
        throw missing("entities for candidate '" + rc.candidate_id + "'");
      }
      entities = e->second;
    } else if (artifacts.gazetteer) {
      entities = annotate::extract_entities(rc.text, *artifacts.gazetteer, artifacts.match);
    } else {
      throw missing("entity annotations or a gazetteer");
    }
    pool.candidates.push_back(criteria::Candidate{rc.candidate_id, rc.text, rc.config_id,
                                                  std::move(entities), dist->second,
                                                  rc.external_scores});
  }
  if (artifacts.entities) {
    if (auto e = artifacts.entities->find(raw.dialog_id); e != artifacts.entities->end()) {
      pool.source_entities = e->second;
    }
  } else if (artifacts.gazetteer) {
    pool.source_entities = annotate::extract_entities(dialog.transcript.plain_text(),
                                                      *artifacts.gazetteer, artifacts.match);
  }
  return pool;
}

IngestResult ingest_candidates(std::span<const GenerationManifest> manifests, std::istream& in,
                               std::span<const corpus::DialogRecord> corpus,
                               const ArtifactMaps& artifacts, const IngestOptions& options) {
  std::unordered_map<std::string, const corpus::DialogRecord*> dialogs;
  for (const auto& d : corpus) dialogs.emplace(d.id, &d);

  IngestResult result;
  for (auto& raw : read_candidates(manifests, in, options, &result.warnings)) {
    auto d = dialogs.find(raw.dialog_id);
    if (d == dialogs.end()) {
      throw Error(Errc::unknown_dialog, "manifest dialog '" + raw.dialog_id + "' is not in the corpus");
    }
    try {
      result.pools.push_back(attach_artifacts(raw, *d->second, artifacts));
    } catch (const Error& e) {
      if (!options.partial || e.code() != Errc::missing_artifact) throw;
      result.skipped.emplace_back(raw.dialog_id, e.detail());
    }
  }
  return result;
}

}  // namespace faithsel::gen
