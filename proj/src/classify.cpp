#include "faithsel/classify.hpp"

#include "faithsel/error.hpp"
#include "faithsel/io.hpp"
#include "faithsel/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

namespace faithsel::classify {

using nlohmann::json;

Inventory::Inventory(std::vector<std::string> labels) {
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw Error(Errc::invalid_argument, "empty call-type label");
    if (!seen.insert(l).second) {
      throw Error(Errc::invalid_argument, "duplicate call-type label '" + l + "'");
    }
  }
  labels_ = std::make_shared<const std::vector<std::string>>(std::move(labels));
}

std::optional<std::size_t> Inventory::index_of(std::string_view label) const {
  const auto& v = labels();
  auto it = std::find(v.begin(), v.end(), label);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

namespace {

void check_entries(const Inventory& inventory, const std::vector<double>& probs) {
  if (inventory.size() == 0) throw Error(Errc::not_a_distribution, "empty inventory");
  if (probs.size() != inventory.size()) {
    throw Error(Errc::not_a_distribution, "probability count does not match the inventory");
  }
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(Errc::not_a_distribution, "negative or non-finite probability");
    }
  }
}

double sum_of(const std::vector<double>& probs) {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

}  // namespace

CallTypeDistribution::CallTypeDistribution(Inventory inventory, std::vector<double> probs)
    : inventory_(std::move(inventory)), probs_(std::move(probs)) {
  check_entries(inventory_, probs_);
  if (std::abs(sum_of(probs_) - 1.0) > kSumTolerance) {
    throw Error(Errc::not_a_distribution, "probabilities do not sum to 1");
  }
}

CallTypeDistribution CallTypeDistribution::from_external(Inventory inventory,
                                                         std::vector<double> probs,
                                                         double tolerance) {
  check_entries(inventory, probs);
  const double total = sum_of(probs);
  if (std::abs(total - 1.0) > tolerance) {
    throw Error(Errc::not_a_distribution,
                "probabilities sum to " + std::to_string(total) + ", beyond tolerance");
  }
  if (total != 1.0) {
    for (double& p : probs) p /= total;
  }
  return CallTypeDistribution(std::move(inventory), std::move(probs));
}

double CallTypeDistribution::prob(std::string_view label) const {
  auto idx = inventory_.index_of(label);
  if (!idx) throw Error(Errc::unknown_label, "label '" + std::string(label) + "' not in inventory");
  return probs_[*idx];
}

const std::string& argmax_calltype(const CallTypeDistribution& d) {
  const auto& labels = d.inventory().labels();
  const auto& probs = d.probs();
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best] || (probs[i] == probs[best] && labels[i] < labels[best])) {
      best = i;
    }
  }
  return labels[best];
}

CallTypeDistribution distribution_from_json(const json& probs, const Inventory& inventory,
                                            std::size_t line) {
  if (!probs.is_object()) throw Error(Errc::schema_violation, "'probs' must be an object", line);
  std::vector<double> values(inventory.size(), 0.0);
  std::vector<bool> seen(inventory.size(), false);
  for (auto it = probs.begin(); it != probs.end(); ++it) {
    auto idx = inventory.index_of(it.key());
    if (!idx) throw Error(Errc::unknown_label, "label '" + it.key() + "' not in inventory", line);
    if (!it->is_number()) {
      throw Error(Errc::schema_violation, "probability for '" + it.key() + "' is not a number",
                  line);
    }
    values[*idx] = it->get<double>();
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw Error(Errc::not_a_distribution,
                  "label '" + inventory.labels()[i] + "' missing from probs", line);
    }
  }
  try {
    return CallTypeDistribution::from_external(inventory, std::move(values));
  } catch (const Error& e) {
    throw Error(e.code(), e.detail(), line);
  }
}

json distribution_to_json(const CallTypeDistribution& d) {
  json probs = json::object();
  for (std::size_t i = 0; i < d.probs().size(); ++i) {
    probs[d.inventory().labels()[i]] = d.probs()[i];
  }
  return probs;
}

DistributionSet load_distributions(std::istream& in, const std::optional<Inventory>& expected) {
  DistributionSet out;
  bool have_header = false;
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    if (!have_header) {
      const json& inv = io::require(obj, "inventory", line);
      if (!inv.is_array()) throw Error(Errc::schema_violation, "'inventory' must be an array", line);
      std::vector<std::string> labels;
      for (const auto& l : inv) {
        if (!l.is_string()) throw Error(Errc::schema_violation, "labels must be strings", line);
        labels.push_back(l.get<std::string>());
      }
      try {
        out.inventory = Inventory(std::move(labels));
      } catch (const Error& e) {
        throw Error(Errc::schema_violation, e.detail(), line);
      }
      if (expected && !(*expected == out.inventory)) {
        throw Error(Errc::inventory_mismatch,
                    "distribution file inventory differs from the declared inventory", line);
      }
      have_header = true;
      return;
    }
    std::string target = io::require_string(obj, "target_id", line);
    auto d = distribution_from_json(io::require(obj, "probs", line), out.inventory, line);
    if (!out.by_target.emplace(target, std::move(d)).second) {
      throw Error(Errc::duplicate_id, "target '" + target + "' appears twice", line);
    }
  });
  if (!have_header) throw Error(Errc::schema_violation, "missing inventory header line", 1);
  return out;
}

DistributionSet load_distributions_file(const std::string& path,
                                        const std::optional<Inventory>& expected) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open distributions " + path);
  return load_distributions(in, expected);
}

void save_distributions(const DistributionSet& set, std::ostream& out) {
  out << json{{"inventory", set.inventory.labels()}}.dump() << '\n';
  for (const auto& [target, d] : set.by_target) {
    if (!(d.inventory() == set.inventory)) {
      throw Error(Errc::inventory_mismatch, "distribution for '" + target + "' uses another inventory");
    }
    out << json{{"target_id", target}, {"probs", distribution_to_json(d)}}.dump() << '\n';
  }
}

std::vector<std::string> nb_tokens(std::string_view input) {
  std::string folded = text::casefold(input);
  std::vector<std::string> out;
  for (auto w : text::split_whitespace(folded)) out.emplace_back(w);
  return out;
}

double NBModel::prior(std::size_t label) const {
  const std::size_t total = std::accumulate(doc_counts.begin(), doc_counts.end(), std::size_t{0});
  return static_cast<double>(doc_counts[label]) / static_cast<double>(total);
}

double NBModel::log_likelihood(std::size_t label, std::string_view token) const {
  auto it = token_counts.find(token);
  const double count = it == token_counts.end() ? 0.0 : static_cast<double>(it->second[label]);
  const double vocab = static_cast<double>(token_counts.size());
  return std::log(count + alpha) -
         std::log(static_cast<double>(token_totals[label]) + alpha * vocab);
}

NBModel train_nb(std::span<const LabeledText> examples, double alpha,
                 const std::optional<Inventory>& inventory) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(Errc::invalid_argument, "smoothing constant alpha must be > 0");
  }
  if (examples.empty()) throw Error(Errc::empty_corpus, "no training examples");

  NBModel model;
  model.alpha = alpha;
  if (inventory) {
    model.inventory = *inventory;
  } else {
    std::set<std::string> labels;
    for (const auto& ex : examples) labels.insert(ex.label);
    model.inventory = Inventory(std::vector<std::string>(labels.begin(), labels.end()));
  }
  const std::size_t k = model.inventory.size();
  model.doc_counts.assign(k, 0);
  model.token_totals.assign(k, 0);

  for (const auto& ex : examples) {
    auto idx = model.inventory.index_of(ex.label);
    if (!idx) throw Error(Errc::unknown_label, "training label '" + ex.label + "' not in inventory");
    ++model.doc_counts[*idx];
    for (auto& tok : nb_tokens(ex.text)) {
      auto [it, inserted] = model.token_counts.try_emplace(std::move(tok));
      if (inserted) it->second.assign(k, 0);
      ++it->second[*idx];
      ++model.token_totals[*idx];
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (model.doc_counts[i] == 0) {
      throw Error(Errc::missing_label_examples,
                  "no training example for label '" + model.inventory.labels()[i] + "'");
    }
  }
  return model;
}

CallTypeDistribution predict_distribution(const NBModel& model, std::string_view input) {
  const std::size_t k = model.inventory.size();
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i) scores[i] = std::log(model.prior(i));
  for (const auto& tok : nb_tokens(input)) {
    if (!model.token_counts.contains(tok)) continue;
    for (std::size_t i = 0; i < k; ++i) scores[i] += model.log_likelihood(i, tok);
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s /= total;
  return CallTypeDistribution(model.inventory, std::move(scores));
}

std::string save_model(const NBModel& model) {
  json counts = json::object();
  for (const auto& [tok, c] : model.token_counts) counts[tok] = c;
  json doc = {{"format", "faithsel-nb"},
              {"version", NBModel::kFormatVersion},
              {"alpha", model.alpha},
              {"inventory", model.inventory.labels()},
              {"doc_counts", model.doc_counts},
              {"token_counts", std::move(counts)}};
  return doc.dump(1) + "\n";
}

NBModel load_model(std::string_view serialized) {
  json doc = json::parse(serialized, nullptr, false);
  auto bad = [](const std::string& what) { return Error(Errc::schema_violation, "model file: " + what); };
  if (doc.is_discarded() || !doc.is_object()) throw bad("not a JSON object");
  if (doc.value("format", "") != "faithsel-nb") throw bad("unknown format");
  if (doc.value("version", 0) != NBModel::kFormatVersion) throw bad("unsupported version");
  NBModel model;
  try {
    model.alpha = doc.at("alpha").get<double>();
    model.inventory = Inventory(doc.at("inventory").get<std::vector<std::string>>());
    model.doc_counts = doc.at("doc_counts").get<std::vector<std::size_t>>();
    const std::size_t k = model.inventory.size();
    if (model.doc_counts.size() != k) throw bad("doc_counts size");
    model.token_totals.assign(k, 0);
    for (const auto& [tok, c] : doc.at("token_counts").items()) {
      auto counts = c.get<std::vector<std::size_t>>();
      if (counts.size() != k) throw bad("token count size for '" + tok + "'");
      for (std::size_t i = 0; i < k; ++i) model.token_totals[i] += counts[i];
      model.token_counts.emplace(tok, std::move(counts));
    }
  } catch (const json::exception& e) {
    throw bad(e.what());
  }
  if (!(model.alpha > 0.0)) throw bad("alpha must be > 0");
  for (auto c : model.doc_counts) {
    if (c == 0) throw bad("label without training documents");
  }
  return model;
}

std::optional<CallTypeDistribution> ModelSource::distribution_for(
    const corpus::DialogRecord& dialog) const {
  return predict_distribution(model_, dialog.transcript.plain_text());
}

std::optional<CallTypeDistribution> TableSource::distribution_for(
    const corpus::DialogRecord& dialog) const {
  auto it = set_.by_target.find(dialog.id);
  if (it == set_.by_target.end()) return std::nullopt;
  return it->second;
}

}  // namespace faithsel::classify
