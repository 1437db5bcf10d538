#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hlv/backend.hpp"
#include "hlv/dataset.hpp"
#include "hlv/error.hpp"
#include "hlv/prompting.hpp"
#include "hlv/types.hpp"

namespace hlv {

enum class TransformMethod {
  Normalize,
  Softmax,
};

enum class NegativeScorePolicy {
  Error,
  ClampEpsilon,
};

std::string_view to_string(TransformMethod m) noexcept;
TransformMethod parse_transform_method(std::string_view name);
std::string_view to_string(NegativeScorePolicy p) noexcept;
NegativeScorePolicy parse_negative_policy(std::string_view name);

/// Replacement value for non-positive raw logits under ClampEpsilon.
inline constexpr double kClampEpsilon = 1e-6;
inline constexpr double kDefaultTemperature = 20.0;

struct TransformConfig {
  TransformMethod method = TransformMethod::Normalize;
  double temperature = kDefaultTemperature;
  NegativeScorePolicy negative_policy = NegativeScorePolicy::ClampEpsilon;

  void validate() const;
};

struct OptionProbs {
  Probs probs{};
  bool clamped = false;
};

/// Proportional normalization. Log-probabilities are exponentiated first;
/// raw logits are divided directly, with non-positive components handled by
/// `policy`.
OptionProbs normalize_scores(const OptionScores& scores, NegativeScorePolicy policy);

/// Temperature softmax, stabilized by subtracting the maximum score.
Probs softmax_scores(const OptionScores& scores, double temperature);

OptionProbs transform_scores(const OptionScores& scores, const TransformConfig& config);

/// Moves each option probability onto the label its letter stands for.
JudgmentDistribution map_to_labels(const Probs& option_probs, const OptionMapping& mapping);

struct EstimationConfig {
  PromptType prompt_type = PromptType::WithoutExplanations;
  ExplanationMode mode = ExplanationMode::None;
  /// Batch size for KAtATime; ignored otherwise.
  std::size_t k = 0;
  TransformConfig transform;
  /// Indices into option_mappings(); empty means all six.
  std::vector<std::size_t> mapping_indices;
  std::string template_version{kDefaultTemplateVersion};

  void validate() const;
  std::vector<OptionMapping> mappings() const;
  nlohmann::json to_json() const;
  static EstimationConfig from_json(const nlohmann::json& j);
  /// Short digest of to_json(); names output files.
  std::string digest() const;
};

struct TraceRecord {
  std::size_t mapping_index = 0;
  OptionMapping mapping = OptionMapping::identity();
  std::size_t batch_index = 0;
  ExplanationBatch batch;
  std::string prompt_digest;
  OptionScores scores;
  Probs option_probs{};
  JudgmentDistribution label_distribution = JudgmentDistribution::uniform();
  bool clamped = false;
};

struct EstimationTrace {
  std::string item_id;
  std::vector<TraceRecord> records;
  JudgmentDistribution mjd = JudgmentDistribution::uniform();
  std::size_t floored_responses = 0;
  std::size_t clamped_records = 0;
};

/// Queries every (mapping, batch) pair and averages the mapped distributions
/// in mapping-major, batch-minor order, then renormalizes.
EstimationTrace estimate_mjd(const NliItem& item, const ExplanationSet* explanations,
                             const EstimationConfig& config, Backend& backend);

struct EstimationInput {
  NliItem item;
  std::optional<ExplanationSet> explanations;
};

std::vector<EstimationInput> estimation_inputs(const PairedDataset& paired);
std::vector<EstimationInput> estimation_inputs(const LabeledDataset& dataset);

struct ItemFailure {
  std::string item_id;
  std::string message;
  ErrorKind kind = ErrorKind::Backend;
};

struct DatasetEstimate {
  /// Ordered by item id.
  std::vector<EstimationTrace> traces;
  std::vector<ItemFailure> failures;
};

/// Runs estimate_mjd per item on up to `workers` threads. Failures are
/// collected rather than thrown.
DatasetEstimate estimate_dataset(std::vector<EstimationInput> inputs, const EstimationConfig& config,
                                 Backend& backend, int workers = 1);

/// One JSON record per item: id, config_digest, distribution, flags. Failed
/// items appear as records with an "error" field and no distribution. A
/// non-null `inputs` object is copied into every record.
std::string mjd_jsonl(const DatasetEstimate& estimate, const std::string& config_digest,
                      const nlohmann::json& inputs = nullptr);

/// Every per-(mapping, batch) record, one JSON object per line.
std::string trace_jsonl(const DatasetEstimate& estimate, const std::string& config_digest);

}  // namespace hlv
