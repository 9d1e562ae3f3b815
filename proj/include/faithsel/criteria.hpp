#pragma once

// Candidate selection: KL divergence between summary and dialog call-type
// distributions, named-entity hallucination rate (NEHR), and the selection
// strategies built from them.

#include "faithsel/annotate.hpp"
#include "faithsel/classify.hpp"
#include "faithsel/corpus.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::criteria {

inline constexpr double kDefaultEpsilon = 1e-10;

struct Candidate {
  std::string candidate_id;
  std::string text;
  std::string decode_config_id;
  annotate::EntitySet entities;
  classify::CallTypeDistribution distribution;
  std::map<std::string, double> external_scores;
};

struct CandidatePool {
  std::string dialog_id;
  std::vector<Candidate> candidates;
  classify::CallTypeDistribution dialog_distribution;
  corpus::Transcript source_transcript;
  /// Entities of the transcript; only needed for membership presence.
  std::optional<annotate::EntitySet> source_entities;
};

enum class Criterion { baseline_first, min_nehr, min_kl, combined };

std::string_view criterion_name(Criterion c);
Criterion parse_criterion(std::string_view name);

/// Hallucination rate kept as the integer pair it is computed from, so that
/// equal rates compare equal exactly.
struct Nehr {
  std::size_t misses = 0;
  std::size_t total = 0;

  double value() const {
    return total == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(total);
  }
  /// The candidate had no entities; its rate is 0 by convention.
  bool entity_free() const noexcept { return total == 0; }
};

/// Three-way comparison of misses/total ratios by cross-multiplication.
int compare(const Nehr& a, const Nehr& b);

enum class Presence {
  /// Normalized token-boundary substring of the transcript.
  containment,
  /// Key present in the pool's source entity set.
  membership,
};

struct SelectionOptions {
  double epsilon = kDefaultEpsilon;
  Presence presence = Presence::containment;
  /// Config whose first candidate is the baseline; the pool's first
  /// candidate when unset.
  std::optional<std::string> baseline_config;
};

struct CandidateScore {
  std::string candidate_id;
  Nehr nehr;
  double kl = 0.0;
};

struct SelectionResult {
  std::string dialog_id;
  Criterion criterion = Criterion::baseline_first;
  std::string chosen;
  std::size_t chosen_index = 0;
  std::vector<CandidateScore> per_candidate;  // pool order
  bool tie_broken = false;

  const CandidateScore& chosen_score() const { return per_candidate.at(chosen_index); }
};

/// D(G || R) in nats, on add-epsilon smoothed and renormalized inputs.
double kl_divergence(const classify::CallTypeDistribution& summary,
                     const classify::CallTypeDistribution& dialog,
                     double epsilon = kDefaultEpsilon);

Nehr nehr(const Candidate& candidate, const corpus::Transcript& source);
Nehr nehr(const Candidate& candidate, const annotate::SourceIndex& source);
Nehr nehr_membership(const Candidate& candidate, const annotate::EntitySet& source_entities);

/// NEHR and KL of every candidate, in pool order. Validates the pool.
std::vector<CandidateScore> score_pool(const CandidatePool& pool,
                                       const SelectionOptions& options = {});

SelectionResult select_baseline_first(const CandidatePool& pool,
                                      const SelectionOptions& options = {});
SelectionResult select_min_nehr(const CandidatePool& pool, const SelectionOptions& options = {});
SelectionResult select_min_kl(const CandidatePool& pool, const SelectionOptions& options = {});
SelectionResult select_combined(const CandidatePool& pool, const SelectionOptions& options = {});
SelectionResult select(const CandidatePool& pool, Criterion criterion,
                       const SelectionOptions& options = {});

nlohmann::json selection_to_json(const SelectionResult& result);
SelectionResult selection_from_json(const nlohmann::json& obj, std::size_t line = 0);

}  // namespace faithsel::criteria
