#include "faithsel/criteria.hpp"

#include "faithsel/error.hpp"
#include "faithsel/io.hpp"

#include <cmath>
#include <set>

namespace faithsel::criteria {

using nlohmann::json;

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::baseline_first: return "baseline_first";
    case Criterion::min_nehr: return "min_nehr";
    case Criterion::min_kl: return "min_kl";
    case Criterion::combined: return "combined";
  }
  return "baseline_first";
}

Criterion parse_criterion(std::string_view name) {
  for (auto c : {Criterion::baseline_first, Criterion::min_nehr, Criterion::min_kl,
                 Criterion::combined}) {
    if (criterion_name(c) == name) return c;
  }
  throw Error(Errc::invalid_argument, "unknown criterion '" + std::string(name) + "'");
}

int compare(const Nehr& a, const Nehr& b) {
  // An entity-free candidate scores 0/1.
  const unsigned long long lhs = a.misses * (b.total == 0 ? 1 : b.total);
  const unsigned long long rhs = b.misses * (a.total == 0 ? 1 : a.total);
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

double kl_divergence(const classify::CallTypeDistribution& summary,
                     const classify::CallTypeDistribution& dialog, double epsilon) {
  if (!(summary.inventory() == dialog.inventory())) {
    throw Error(Errc::inventory_mismatch, "summary and dialog distributions use different inventories");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(Errc::invalid_argument, "epsilon must be > 0");
  }
  const auto& g = summary.probs();
  const auto& r = dialog.probs();
  const double norm = 1.0 + epsilon * static_cast<double>(g.size());
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gs = (g[i] + epsilon) / norm;
    const double rs = (r[i] + epsilon) / norm;
    if (gs > 0.0) total += gs * std::log(gs / rs);
  }
  // rounding can leave a tiny negative value for equal inputs
  return total < 0.0 ? 0.0 : total;
}

Nehr nehr(const Candidate& candidate, const annotate::SourceIndex& source) {
  Nehr out;
  out.total = candidate.entities.size();
  for (const auto& e : candidate.entities.entities()) {
    if (!source.contains(e)) ++out.misses;
  }
  return out;
}

Nehr nehr(const Candidate& candidate, const corpus::Transcript& source) {
  return nehr(candidate,
              annotate::SourceIndex(source, candidate.entities.config().normalization));
}

Nehr nehr_membership(const Candidate& candidate, const annotate::EntitySet& source_entities) {
  if (candidate.entities.config().normalization != source_entities.config().normalization) {
    throw Error(Errc::config_mismatch, "candidate and source entities normalized differently");
  }
  std::set<std::string> keys;
  for (const auto& e : source_entities.entities()) keys.insert(candidate.entities.key_of(e));
  Nehr out;
  out.total = candidate.entities.size();
  for (const auto& e : candidate.entities.entities()) {
    if (!keys.contains(candidate.entities.key_of(e))) ++out.misses;
  }
  return out;
}

std::vector<CandidateScore> score_pool(const CandidatePool& pool, const SelectionOptions& options) {
  if (pool.candidates.empty()) {
    throw Error(Errc::invalid_argument, "candidate pool for '" + pool.dialog_id + "' is empty");
  }
  std::set<std::string_view> ids;
  for (const auto& c : pool.candidates) {
    if (!ids.insert(c.candidate_id).second) {
      throw Error(Errc::duplicate_id, "candidate '" + c.candidate_id + "' appears twice in pool '" +
                                          pool.dialog_id + "'");
    }
  }
  if (options.presence == Presence::membership && !pool.source_entities) {
    throw Error(Errc::missing_artifact,
                "membership presence needs transcript entities for '" + pool.dialog_id + "'");
  }
  const annotate::SourceIndex index(pool.source_transcript,
                                    pool.candidates.front().entities.config().normalization);
  std::vector<CandidateScore> scores;
  scores.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) {
    CandidateScore s;
    s.candidate_id = c.candidate_id;
    s.nehr = options.presence == Presence::membership ? nehr_membership(c, *pool.source_entities)
                                                      : nehr(c, index);
    s.kl = kl_divergence(c.distribution, pool.dialog_distribution, options.epsilon);
    scores.push_back(std::move(s));
  }
  return scores;
}

namespace {

SelectionResult make_result(const CandidatePool& pool, Criterion criterion,
                            std::vector<CandidateScore> scores, std::size_t chosen, bool tie) {
  SelectionResult r;
  r.dialog_id = pool.dialog_id;
  r.criterion = criterion;
  r.chosen = pool.candidates[chosen].candidate_id;
  r.chosen_index = chosen;
  r.per_candidate = std::move(scores);
  r.tie_broken = tie;
  return r;
}

// Lowest KL among `members` (pool indices, ascending), first in pool order on
// equality. Reports whether more than one member shares that KL.
std::pair<std::size_t, bool> argmin_kl(const std::vector<CandidateScore>& scores,
                                       const std::vector<std::size_t>& members) {
  std::size_t best = members.front();
  std::size_t ties = 1;
  for (std::size_t k = 1; k < members.size(); ++k) {
    const std::size_t i = members[k];
    if (scores[i].kl < scores[best].kl) {
      best = i;
      ties = 1;
    } else if (scores[i].kl == scores[best].kl) {
      ++ties;
    }
  }
  return {best, ties > 1};
}

std::vector<std::size_t> min_nehr_members(const std::vector<CandidateScore>& scores) {
  std::vector<std::size_t> members{0};
  for (std::size_t i = 1; i < scores.size(); ++i) {
    int c = compare(scores[i].nehr, scores[members.front()].nehr);
    if (c < 0) {
      members.assign(1, i);
    } else if (c == 0) {
      members.push_back(i);
    }
  }
  return members;
}

}  // namespace

SelectionResult select_baseline_first(const CandidatePool& pool, const SelectionOptions& options) {
  auto scores = score_pool(pool, options);
  std::size_t chosen = 0;
  if (options.baseline_config) {
    bool found = false;
    for (std::size_t i = 0; i < pool.candidates.size() && !found; ++i) {
      if (pool.candidates[i].decode_config_id == *options.baseline_config) {
        chosen = i;
        found = true;
      }
    }
    if (!found) {
      throw Error(Errc::missing_artifact, "pool '" + pool.dialog_id +
                                              "' has no candidate from baseline config '" +
                                              *options.baseline_config + "'");
    }
  }
  return make_result(pool, Criterion::baseline_first, std::move(scores), chosen, false);
}

SelectionResult select_min_nehr(const CandidatePool& pool, const SelectionOptions& options) {
  auto scores = score_pool(pool, options);
  auto members = min_nehr_members(scores);
  auto [chosen, kl_tie] = argmin_kl(scores, members);
  (void)kl_tie;
  const bool tie = members.size() > 1;
  return make_result(pool, Criterion::min_nehr, std::move(scores), chosen, tie);
}

SelectionResult select_min_kl(const CandidatePool& pool, const SelectionOptions& options) {
  auto scores = score_pool(pool, options);
  std::vector<std::size_t> all(scores.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto [chosen, tie] = argmin_kl(scores, all);
  return make_result(pool, Criterion::min_kl, std::move(scores), chosen, tie);
}

SelectionResult select_combined(const CandidatePool& pool, const SelectionOptions& options) {
  auto scores = score_pool(pool, options);
  auto [chosen, tie] = argmin_kl(scores, min_nehr_members(scores));
  return make_result(pool, Criterion::combined, std::move(scores), chosen, tie);
}

SelectionResult select(const CandidatePool& pool, Criterion criterion,
                       const SelectionOptions& options) {
  switch (criterion) {
    case Criterion::baseline_first: return select_baseline_first(pool, options);
    case Criterion::min_nehr: return select_min_nehr(pool, options);
    case Criterion::min_kl: return select_min_kl(pool, options);
    case Criterion::combined: return select_combined(pool, options);
  }
  return select_baseline_first(pool, options);
}

json selection_to_json(const SelectionResult& result) {
  json scores = json::object();
  for (const auto& s : result.per_candidate) {
    scores[s.candidate_id] = {{"nehr", s.nehr.value()}, {"kl", s.kl}};
  }
  return {{"dialog_id", result.dialog_id},
          {"criterion", criterion_name(result.criterion)},
          {"chosen", result.chosen},
          {"scores", std::move(scores)},
          {"tie_broken", result.tie_broken},
          {"chosen_entity_free", result.chosen_score().nehr.entity_free()}};
}

SelectionResult selection_from_json(const json& obj, std::size_t line) {
  SelectionResult r;
  r.dialog_id = io::require_string(obj, "dialog_id", line);
  try {
    r.criterion = parse_criterion(io::require_string(obj, "criterion", line));
  } catch (const Error& e) {
    throw Error(Errc::schema_violation, e.detail(), line);
  }
  r.chosen = io::require_string(obj, "chosen", line);
  if (auto it = obj.find("tie_broken"); it != obj.end() && it->is_boolean()) {
    r.tie_broken = it->get<bool>();
  }
  return r;
}

}  // namespace faithsel::criteria
