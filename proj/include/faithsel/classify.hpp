#pragma once

// Call-type distributions: validation, ingestion, a multinomial naive Bayes
// reference classifier, and sources of dialog-level distributions.

#include "faithsel/corpus.hpp"

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::classify {

/// Ordered, duplicate-free set of call-type labels shared by every
/// distribution of one experiment.
class Inventory {
 public:
  Inventory() : labels_(std::make_shared<const std::vector<std::string>>()) {}
  explicit Inventory(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const noexcept { return *labels_; }
  std::size_t size() const noexcept { return labels_->size(); }
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool operator==(const Inventory& other) const { return labels() == other.labels(); }

 private:
  std::shared_ptr<const std::vector<std::string>> labels_;
};

class CallTypeDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kIngestTolerance = 1e-6;

  /// Requires nonnegative entries summing to 1 within kSumTolerance.
  CallTypeDistribution(Inventory inventory, std::vector<double> probs);

  /// For values produced elsewhere: renormalizes when the sum is off by at
  /// most `tolerance`, raises NotADistribution beyond that.
  static CallTypeDistribution from_external(Inventory inventory, std::vector<double> probs,
                                            double tolerance = kIngestTolerance);

  const Inventory& inventory() const noexcept { return inventory_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double prob(std::string_view label) const;

  bool operator==(const CallTypeDistribution&) const = default;

 private:
  Inventory inventory_;
  std::vector<double> probs_;
};

/// Label of maximal probability; ties go to the lexicographically smallest
/// label name.
const std::string& argmax_calltype(const CallTypeDistribution& d);

/// Parses a `{label: prob}` object against `inventory`.
CallTypeDistribution distribution_from_json(const nlohmann::json& probs,
                                            const Inventory& inventory, std::size_t line = 0);
nlohmann::json distribution_to_json(const CallTypeDistribution& d);

struct DistributionSet {
  Inventory inventory;
  std::map<std::string, CallTypeDistribution> by_target;
};

/// Header `{"inventory": [...]}` followed by `{"target_id", "probs"}` lines.
/// With `expected`, a differing header raises InventoryMismatch.
DistributionSet load_distributions(std::istream& in,
                                   const std::optional<Inventory>& expected = std::nullopt);
DistributionSet load_distributions_file(const std::string& path,
                                        const std::optional<Inventory>& expected = std::nullopt);
void save_distributions(const DistributionSet& set, std::ostream& out);

struct LabeledText {
  std::string text;
  std::string label;
};

/// Multinomial naive Bayes with add-alpha smoothing over case-folded
/// whitespace tokens. Counts are kept as integers so a saved model reloads
/// bit-identically.
struct NBModel {
  static constexpr int kFormatVersion = 1;

  Inventory inventory;
  double alpha = 1.0;
  std::vector<std::size_t> doc_counts;
  std::vector<std::size_t> token_totals;
  std::map<std::string, std::vector<std::size_t>, std::less<>> token_counts;

  double prior(std::size_t label) const;
  double log_likelihood(std::size_t label, std::string_view token) const;
};

std::vector<std::string> nb_tokens(std::string_view text);

/// Inventory defaults to the sorted distinct labels of `examples`.
NBModel train_nb(std::span<const LabeledText> examples, double alpha = 1.0,
                 const std::optional<Inventory>& inventory = std::nullopt);
CallTypeDistribution predict_distribution(const NBModel& model, std::string_view text);

std::string save_model(const NBModel& model);
NBModel load_model(std::string_view serialized);

/// Where dialog-level (transcript) distributions come from when conditioning
/// or selecting.
class DistributionSource {
 public:
  virtual ~DistributionSource() = default;
  virtual std::optional<CallTypeDistribution> distribution_for(
      const corpus::DialogRecord& dialog) const = 0;
};

class ModelSource : public DistributionSource {
 public:
  explicit ModelSource(NBModel model) : model_(std::move(model)) {}
  std::optional<CallTypeDistribution> distribution_for(
      const corpus::DialogRecord& dialog) const override;

 private:
  NBModel model_;
};

class TableSource : public DistributionSource {
 public:
  explicit TableSource(DistributionSet set) : set_(std::move(set)) {}
  std::optional<CallTypeDistribution> distribution_for(
      const corpus::DialogRecord& dialog) const override;

 private:
  DistributionSet set_;
};

}  // namespace faithsel::classify
