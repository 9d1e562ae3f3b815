#pragma once

// Summary evaluation: call-type accuracy, entity precision/recall/F1,
// ROUGE-L, and per-dialog / corpus reports.

#include "faithsel/annotate.hpp"
#include "faithsel/classify.hpp"
#include "faithsel/corpus.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::metrics {

struct NEScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

double ct_accuracy(std::span<const std::string> predicted, std::span<const std::string> reference);

/// Both empty scores (1, 1, 1); exactly one empty scores (0, 0, 0). Sets must
/// share their match configuration (ConfigMismatch otherwise).
NEScore ne_prf(const annotate::EntitySet& generated, const annotate::EntitySet& reference);

/// precision(gen, ref) == recall(ref, gen) to 1e-12.
bool swap_duality_check(const annotate::EntitySet& generated, const annotate::EntitySet& reference);

/// Case-folded whitespace tokens with leading and trailing punctuation split
/// off, one token per punctuation character.
std::vector<std::string> rouge_tokens(std::string_view text);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
/// LCS-based F-measure; 0 when either side is empty.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference,
               double beta = 1.0);

struct DialogMetrics {
  std::string dialog_id;
  std::string summary_id;
  double rouge_l = 0.0;
  bool ct_correct = false;
  std::string predicted_call_type;
  std::string reference_call_type;
  NEScore ne;
  std::map<std::string, double> external;
};

struct Aggregate {
  std::size_t n = 0;
  double rouge_l_mean = 0.0;
  double ct_acc = 0.0;
  double ne_p_mean = 0.0;
  double ne_r_mean = 0.0;
  double ne_f1_mean = 0.0;
  /// Means over the dialogs that carry the score.
  std::map<std::string, double> external_means;
};

Aggregate aggregate(std::span<const DialogMetrics> per_dialog);

struct MetricReport {
  std::string system;
  double beta = 1.0;
  std::vector<DialogMetrics> per_dialog;  // sorted by dialog_id
  Aggregate aggregate;
  std::vector<std::string> excluded;     // dialogs skipped under partial mode
};

enum class CtReference { annotated, dialog_classifier };

struct Summary {
  std::string summary_id;
  std::string text;
  std::map<std::string, double> external_scores;
};

/// Annotation / distribution target id of a dialog's reference synopsis.
std::string reference_target_id(std::string_view dialog_id);

struct ReportInputs {
  std::span<const corpus::DialogRecord> corpus;
  /// dialog_id -> evaluated summary
  const std::map<std::string, Summary>* summaries = nullptr;
  /// target_id -> entities (summary ids and reference_target_id(dialog))
  const std::map<std::string, annotate::EntitySet>* entities = nullptr;
  /// target_id -> call-type distribution (summary ids, and dialog ids when
  /// the reference label comes from the dialog classifier)
  const std::map<std::string, classify::CallTypeDistribution>* distributions = nullptr;
};

struct ReportOptions {
  std::string system = "system";
  double beta = 1.0;
  bool partial = false;
  CtReference ct_reference = CtReference::annotated;
  std::size_t jobs = 1;
};

/// Raises MissingArtifact(dialog, what) unless `partial` is set, in which
/// case such dialogs are excluded and listed.
MetricReport build_report(const ReportInputs& inputs, const ReportOptions& options = {});

/// Presentation helpers; numbers are rounded to 4 decimals here only.
nlohmann::json report_to_json(const MetricReport& report);
std::string report_tsv(const MetricReport& report);
std::string aggregate_tsv(const MetricReport& report, bool with_header = true);

}  // namespace faithsel::metrics
