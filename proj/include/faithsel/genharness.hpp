#pragma once

// Generation harness: decoding-parameter grids, per-dialog generation
// manifests, call-type conditioned inputs, the few-shot augmentation prompt,
// and ingestion of generator output into candidate pools.

#include "faithsel/annotate.hpp"
#include "faithsel/classify.hpp"
#include "faithsel/corpus.hpp"
#include "faithsel/criteria.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace faithsel::gen {

struct Greedy {
  bool operator==(const Greedy&) const = default;
};

struct Beam {
  int size = 1;
  int n_best = 1;
  bool operator==(const Beam&) const = default;
};

struct Sample {
  std::optional<double> top_p;
  std::optional<int> top_k;
  double temperature = 1.0;
  int n_samples = 1;
  std::optional<std::int64_t> seed;
  /// Plain ancestral sampling: no knob moved from its default.
  bool pure = false;
  bool operator==(const Sample&) const = default;
};

using Strategy = std::variant<Greedy, Beam, Sample>;

struct DecodeConfig {
  std::string config_id;
  Strategy strategy;

  /// Candidates this config yields per dialog.
  std::size_t candidate_count() const;
  bool operator==(const DecodeConfig&) const = default;
};

/// Deterministic id derived from the strategy's parameters.
std::string make_config_id(const Strategy& strategy);
DecodeConfig make_config(Strategy strategy);
/// Raises InvalidRange on out-of-range parameters.
void validate(const DecodeConfig& config);

/// Values lo, lo + step, ... below hi (or up to hi when closed). Generated
/// from integer indices at a decimal scale, so 0.70 + 3 * 0.05 is exactly
/// the double nearest 0.85.
struct DecimalRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;
  bool closed_upper = false;

  std::vector<double> values() const;
};

enum class GridMode { independent_sweeps, cross_product };

std::string_view grid_mode_name(GridMode mode);
GridMode parse_grid_mode(std::string_view name);

struct GridSpec {
  std::optional<DecimalRange> top_p;
  std::optional<DecimalRange> top_k;
  std::optional<DecimalRange> temperature;
  bool include_greedy = false;
  std::optional<Beam> beam;
  GridMode mode = GridMode::independent_sweeps;
  int n_samples_per_config = 1;
  std::optional<std::int64_t> seed;

  /// top-p in [0.70, 0.95) step 0.05, top-k in [30, 100) step 15,
  /// temperature in [0.7, 1.0] step 0.1, greedy, beam 6 keeping 6.
  static GridSpec paper_defaults();
};

std::vector<DecodeConfig> expand_grid(const GridSpec& spec);
std::size_t expected_candidates(std::span<const DecodeConfig> configs);

nlohmann::json strategy_to_json(const Strategy& strategy);
Strategy strategy_from_json(const nlohmann::json& obj, std::size_t line = 0);

struct GenerationManifest {
  std::string dialog_id;
  std::string input_text;
  std::vector<DecodeConfig> configs;
  std::size_t expected_candidates = 0;
};

nlohmann::json manifest_to_json(const GenerationManifest& manifest);
GenerationManifest manifest_from_json(const nlohmann::json& obj, std::size_t line = 0);
std::vector<GenerationManifest> load_manifests(std::istream& in);
std::vector<GenerationManifest> load_manifests_file(const std::string& path);
void save_manifests(std::span<const GenerationManifest> manifests, std::ostream& out);

inline constexpr std::string_view kDefaultSeparator = " <SEP> ";

/// `call_type + separator + markup(transcript)`.
std::string build_conditioned_input(const corpus::Transcript& transcript,
                                    std::string_view call_type, std::string_view separator);
/// Inverse of build_conditioned_input for a known label and separator.
std::optional<corpus::Transcript> strip_conditioning(std::string_view input,
                                                     std::string_view call_type,
                                                     std::string_view separator);

std::string_view default_prompt_template();

struct PromptRequest {
  std::string exemplar_dialog;   // turn markup
  std::string exemplar_summary;
  std::string target_dialog;     // turn markup
  /// Must contain {EXEMPLAR_DIALOG}, {EXEMPLAR_SUMMARY} and {TARGET_DIALOG}.
  std::string template_text = std::string(default_prompt_template());
  bool allow_empty_target = false;
};

/// Dialogs are validated and inserted in canonical markup; placeholders are
/// substituted in a single pass.
std::string build_augmentation_prompt(const PromptRequest& request);

struct ConditioningOptions {
  /// When set, inputs are prefixed with the argmax call type of the dialog.
  const classify::DistributionSource* source = nullptr;
  std::string separator = std::string(kDefaultSeparator);
};

std::vector<GenerationManifest> emit_manifests(std::span<const corpus::DialogRecord> corpus,
                                               const GridSpec& spec,
                                               const ConditioningOptions& conditioning = {});

struct RawCandidate {
  std::string dialog_id;
  std::string config_id;
  std::string candidate_id;
  std::string text;
  std::map<std::string, double> external_scores;
};

struct RawPool {
  std::string dialog_id;
  std::vector<RawCandidate> candidates;  // manifest config order, then natural id order
};

RawCandidate candidate_from_json(const nlohmann::json& obj, std::size_t line = 0);
nlohmann::json candidate_to_json(const RawCandidate& candidate);

/// "c2" < "c10": digit runs compare by value.
bool natural_less(std::string_view a, std::string_view b);

struct IngestOptions {
  /// Candidate count differing from the manifest is an error, not a warning.
  bool strict = false;
  /// Pools with missing artifacts are skipped instead of failing the run.
  bool partial = false;
};

/// Groups candidate lines by dialog in manifest order. Raises UnknownDialog,
/// UnknownConfig, DuplicateId, and CountMismatch (strict only).
std::vector<RawPool> read_candidates(std::span<const GenerationManifest> manifests,
                                     std::istream& in, const IngestOptions& options,
                                     std::vector<std::string>* warnings = nullptr);

struct ArtifactMaps {
  /// Candidate entities by candidate id; extracted with `gazetteer` if null.
  const std::map<std::string, annotate::EntitySet>* entities = nullptr;
  const annotate::Gazetteer* gazetteer = nullptr;
  annotate::MatchConfig match;
  /// Candidate distributions by candidate id, dialog distributions by dialog id.
  const std::map<std::string, classify::CallTypeDistribution>* distributions = nullptr;
};

/// Raises MissingArtifact when an entity set or distribution is absent.
criteria::CandidatePool attach_artifacts(const RawPool& raw, const corpus::DialogRecord& dialog,
                                         const ArtifactMaps& artifacts);

struct IngestResult {
  std::vector<criteria::CandidatePool> pools;
  /// (dialog_id, reason) of pools dropped under partial mode.
  std::vector<std::pair<std::string, std::string>> skipped;
  std::vector<std::string> warnings;
};

IngestResult ingest_candidates(std::span<const GenerationManifest> manifests, std::istream& in,
                               std::span<const corpus::DialogRecord> corpus,
                               const ArtifactMaps& artifacts, const IngestOptions& options = {});

}  // namespace faithsel::gen
