#include "faithsel/metrics.hpp"

#include "faithsel/error.hpp"
#include "faithsel/parallel.hpp"
#include "faithsel/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace faithsel::metrics {

using nlohmann::json;

double ct_accuracy(std::span<const std::string> predicted, std::span<const std::string> reference) {
  if (predicted.size() != reference.size()) {
    throw Error(Errc::length_mismatch, "predicted and reference label lists differ in length");
  }
  if (predicted.empty()) throw Error(Errc::empty_input, "no labels to compare");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == reference[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

NEScore ne_prf(const annotate::EntitySet& generated, const annotate::EntitySet& reference) {
  if (!(generated.config() == reference.config())) {
    throw Error(Errc::config_mismatch, "entity sets were built under different configurations");
  }
  if (generated.empty() && reference.empty()) return {1.0, 1.0, 1.0};
  if (generated.empty() || reference.empty()) return {0.0, 0.0, 0.0};

  const auto gen = generated.key_counts();
  const auto ref = reference.key_counts();
  std::size_t overlap = 0;
  for (const auto& [key, count] : gen) {
    auto it = ref.find(key);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  NEScore s;
  s.precision = static_cast<double>(overlap) / static_cast<double>(generated.size());
  s.recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

bool swap_duality_check(const annotate::EntitySet& generated, const annotate::EntitySet& reference) {
  return std::abs(ne_prf(generated, reference).precision -
                  ne_prf(reference, generated).recall) <= 1e-12;
}

std::vector<std::string> rouge_tokens(std::string_view input) {
  const std::string folded = text::casefold(input);
  std::vector<std::string> out;
  for (auto word : text::split_whitespace(folded)) {
    std::vector<std::string_view> cps;
    for (std::size_t i = 0; i < word.size();) {
      std::size_t start = i;
      text::next_code_point(word, i);
      cps.push_back(word.substr(start, i - start));
    }
    auto is_punct = [](std::string_view cp) {
      std::size_t i = 0;
      return text::is_punctuation(text::next_code_point(cp, i));
    };
    std::size_t lo = 0;
    while (lo < cps.size() && is_punct(cps[lo])) out.emplace_back(cps[lo++]);
    std::size_t hi = cps.size();
    while (hi > lo && is_punct(cps[hi - 1])) --hi;
    if (lo < hi) {
      const char* begin = cps[lo].data();
      const char* end = cps[hi - 1].data() + cps[hi - 1].size();
      out.emplace_back(begin, end);
    }
    for (std::size_t k = hi; k < cps.size(); ++k) out.emplace_back(cps[k]);
  }
  return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference,
               double beta) {
  if (!(beta > 0.0)) throw Error(Errc::invalid_argument, "beta must be > 0");
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

Aggregate aggregate(std::span<const DialogMetrics> per_dialog) {
  Aggregate a;
  a.n = per_dialog.size();
  if (a.n == 0) return a;
  std::size_t correct = 0;
  std::map<std::string, std::pair<double, std::size_t>> ext;
  for (const auto& d : per_dialog) {
    a.rouge_l_mean += d.rouge_l;
    a.ne_p_mean += d.ne.precision;
    a.ne_r_mean += d.ne.recall;
    a.ne_f1_mean += d.ne.f1;
    correct += d.ct_correct;
    for (const auto& [name, v] : d.external) {
      ext[name].first += v;
      ++ext[name].second;
    }
  }
  const auto n = static_cast<double>(a.n);
  a.rouge_l_mean /= n;
  a.ne_p_mean /= n;
  a.ne_r_mean /= n;
  a.ne_f1_mean /= n;
  a.ct_acc = static_cast<double>(correct) / n;
  for (const auto& [name, acc] : ext) {
    a.external_means[name] = acc.first / static_cast<double>(acc.second);
  }
  return a;
}

std::string reference_target_id(std::string_view dialog_id) {
  return std::string(dialog_id) + "#ref";
}

namespace {

struct Missing {
  std::string what;
};

template <typename Map>
const typename Map::mapped_type* find_in(const Map* map, const std::string& key) {
  if (map == nullptr) return nullptr;
  auto it = map->find(key);
  return it == map->end() ? nullptr : &it->second;
}

DialogMetrics evaluate_dialog(const corpus::DialogRecord& dialog, const ReportInputs& in,
                              const ReportOptions& opt) {
  const Summary* summary = find_in(in.summaries, dialog.id);
  if (!summary) throw Missing{"summary"};
  if (!dialog.reference_synopsis) throw Missing{"reference synopsis"};
  const auto* gen_entities = find_in(in.entities, summary->summary_id);
  if (!gen_entities) throw Missing{"entities for summary '" + summary->summary_id + "'"};
  const auto* ref_entities = find_in(in.entities, reference_target_id(dialog.id));
  if (!ref_entities) throw Missing{"entities for the reference synopsis"};
  const auto* gen_dist = find_in(in.distributions, summary->summary_id);
  if (!gen_dist) throw Missing{"call-type distribution for summary '" + summary->summary_id + "'"};

  DialogMetrics m;
  m.dialog_id = dialog.id;
  m.summary_id = summary->summary_id;
  m.predicted_call_type = classify::argmax_calltype(*gen_dist);
  if (opt.ct_reference == CtReference::annotated) {
    if (!dialog.reference_call_type) throw Missing{"reference call type"};
    m.reference_call_type = *dialog.reference_call_type;
    if (!gen_dist->inventory().index_of(m.reference_call_type)) {
      throw Error(Errc::inventory_mismatch, "reference call type '" + m.reference_call_type +
                                                "' of dialog '" + dialog.id +
                                                "' is not in the classifier inventory");
    }
  } else {
    const auto* dialog_dist = find_in(in.distributions, dialog.id);
    if (!dialog_dist) throw Missing{"call-type distribution for the dialog"};
    if (!(dialog_dist->inventory() == gen_dist->inventory())) {
      throw Error(Errc::inventory_mismatch, "dialog and summary distributions of '" + dialog.id +
                                                "' use different inventories");
    }
    m.reference_call_type = classify::argmax_calltype(*dialog_dist);
  }
  m.ct_correct = m.predicted_call_type == m.reference_call_type;
  m.rouge_l = rouge_l(rouge_tokens(summary->text), rouge_tokens(*dialog.reference_synopsis),
                      opt.beta);
  m.ne = ne_prf(*gen_entities, *ref_entities);
  m.external = summary->external_scores;
  return m;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<std::string> external_columns(const MetricReport& report) {
  std::set<std::string> names = {"bertscore"};
  for (const auto& [name, v] : report.aggregate.external_means) names.insert(name);
  return {names.begin(), names.end()};
}

}  // namespace

MetricReport build_report(const ReportInputs& inputs, const ReportOptions& options) {
  std::vector<const corpus::DialogRecord*> dialogs;
  for (const auto& d : inputs.corpus) dialogs.push_back(&d);
  std::sort(dialogs.begin(), dialogs.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<std::optional<DialogMetrics>> results(dialogs.size());
  std::vector<std::string> missing(dialogs.size());
  parallel_for(dialogs.size(), options.jobs, [&](std::size_t i) {
    try {
      results[i] = evaluate_dialog(*dialogs[i], inputs, options);
    } catch (const Missing& m) {
      missing[i] = m.what;
    }
  });

  MetricReport report;
  report.system = options.system;
  report.beta = options.beta;
  for (std::size_t i = 0; i < dialogs.size(); ++i) {
    if (results[i]) {
      report.per_dialog.push_back(std::move(*results[i]));
      continue;
    }
    if (!options.partial) {
      throw Error(Errc::missing_artifact,
                  "dialog '" + dialogs[i]->id + "' lacks " + missing[i]);
    }
    report.excluded.push_back(dialogs[i]->id);
  }
  report.aggregate = aggregate(report.per_dialog);
  return report;
}

json report_to_json(const MetricReport& report) {
  const auto& a = report.aggregate;
  json agg = {{"n", a.n},
              {"rouge_l", round4(a.rouge_l_mean)},
              {"ct_acc", round4(a.ct_acc)},
              {"ne_p", round4(a.ne_p_mean)},
              {"ne_r", round4(a.ne_r_mean)},
              {"ne_f1", round4(a.ne_f1_mean)}};
  for (const auto& name : external_columns(report)) {
    auto it = a.external_means.find(name);
    agg[name] = it == a.external_means.end() ? json(nullptr) : json(round4(it->second));
  }
  json dialogs = json::array();
  for (const auto& d : report.per_dialog) {
    json ext = json::object();
    for (const auto& [name, v] : d.external) ext[name] = round4(v);
    dialogs.push_back({{"dialog_id", d.dialog_id},
                       {"summary_id", d.summary_id},
                       {"rouge_l", round4(d.rouge_l)},
                       {"ct_correct", d.ct_correct},
                       {"predicted_call_type", d.predicted_call_type},
                       {"reference_call_type", d.reference_call_type},
                       {"ne_p", round4(d.ne.precision)},
                       {"ne_r", round4(d.ne.recall)},
                       {"ne_f1", round4(d.ne.f1)},
                       {"external", std::move(ext)}});
  }
  return {{"system", report.system},
          {"rouge_l_beta", report.beta},
          {"aggregate", std::move(agg)},
          {"excluded", report.excluded},
          {"per_dialog", std::move(dialogs)}};
}

std::string report_tsv(const MetricReport& report) {
  std::string out = "dialog_id\trouge_l\tct_correct\tne_p\tne_r\tne_f1\n";
  for (const auto& d : report.per_dialog) {
    out += d.dialog_id + '\t' + fixed4(d.rouge_l) + '\t' + (d.ct_correct ? "1" : "0") + '\t' +
           fixed4(d.ne.precision) + '\t' + fixed4(d.ne.recall) + '\t' + fixed4(d.ne.f1) + '\n';
  }
  return out;
}

std::string aggregate_tsv(const MetricReport& report, bool with_header) {
  const auto& a = report.aggregate;
  const auto ext = external_columns(report);
  std::string out;
  if (with_header) {
    out += "system\tn\trouge_l";
    for (const auto& name : ext) out += '\t' + name;
    out += "\tct_acc\tne_p\tne_r\tne_f1\n";
  }
  out += report.system + '\t' + std::to_string(a.n) + '\t' + fixed4(a.rouge_l_mean);
  for (const auto& name : ext) {
    auto it = a.external_means.find(name);
    out += '\t';
    if (it != a.external_means.end()) out += fixed4(it->second);
  }
  out += '\t' + fixed4(a.ct_acc) + '\t' + fixed4(a.ne_p_mean) + '\t' + fixed4(a.ne_r_mean) + '\t' +
         fixed4(a.ne_f1_mean) + '\n';
  return out;
}

}  // namespace faithsel::metrics
