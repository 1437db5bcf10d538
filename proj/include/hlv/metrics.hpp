#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlv/types.hpp"

namespace hlv {

enum class LogBase {
  Natural,
  Two,
};

std::string_view to_string(LogBase b) noexcept;
LogBase parse_log_base(std::string_view name);

enum class SmoothingTarget {
  QOnly,
  Both,
};

struct SmoothingConfig {
  double epsilon = 1e-4;
  SmoothingTarget applied_to = SmoothingTarget::QOnly;
  bool renormalize = true;

  /// Requires 0 < epsilon < 0.1.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Adds epsilon to every component and optionally renormalizes.
Probs smooth(const Probs& p, const SmoothingConfig& smoothing);

struct MetricConfig {
  SmoothingConfig smoothing;
  LogBase kl_base = LogBase::Natural;
  LogBase jsd_base = LogBase::Two;

  nlohmann::json to_json() const;
  std::string digest() const;
};

/// KL(P || Q) after smoothing. Terms with P(x) = 0 contribute nothing.
double kl(const JudgmentDistribution& p, const JudgmentDistribution& q,
          const SmoothingConfig& smoothing, LogBase base = LogBase::Natural);

/// Jensen-Shannon distance: the square root of the JS divergence. In base 2
/// it lies in [0, 1].
double jsd(const JudgmentDistribution& p, const JudgmentDistribution& q,
           LogBase base = LogBase::Two);

double tvd(const JudgmentDistribution& p, const JudgmentDistribution& q);

double entropy(const JudgmentDistribution& p, LogBase base = LogBase::Natural);

/// -sum P log Q with Q smoothed (and P too when the smoothing says so).
double soft_cross_entropy(const JudgmentDistribution& p, const JudgmentDistribution& q,
                          const SmoothingConfig& smoothing, LogBase base = LogBase::Natural);

/// Rows of label distributions sharing one id order (ascending).
struct DistributionMatrix {
  std::vector<std::string> ids;
  std::vector<JudgmentDistribution> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::vector<Probs> points() const;

  static DistributionMatrix from_table(const std::map<std::string, JudgmentDistribution>& table);
};

/// Restricts both tables to the ids of `mjd`; every one of them must exist in
/// `hjd`. Throws DataError naming up to 20 missing ids otherwise.
std::pair<DistributionMatrix, DistributionMatrix> align_tables(
    const std::map<std::string, JudgmentDistribution>& hjd,
    const std::map<std::string, JudgmentDistribution>& mjd);

/// Sample distance correlation (double-centered Euclidean distance matrices,
/// V-statistic). Zero when either sample has zero distance variance.
/// Rows need not lie on the simplex.
double distance_correlation(std::span<const Probs> x, std::span<const Probs> y);
double distance_correlation(const DistributionMatrix& x, const DistributionMatrix& y);

struct ClassificationScores {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  std::array<double, 3> per_class_f1{};
  std::array<std::size_t, 3> support{};
};

/// Per-class F1 from the confusion matrix. Weighted by gold support; macro
/// averages all three classes (absent classes count as 0).
ClassificationScores classification_scores(const std::map<std::string, NliLabel>& predictions,
                                           const std::map<std::string, NliLabel>& golds);

struct PairwiseError {
  std::string id;
  std::array<double, 3> abs_diff{};
  double norm = 0.0;
};

std::vector<PairwiseError> pairwise_errors(const DistributionMatrix& hjd,
                                           const DistributionMatrix& mjd);

struct InstanceMetrics {
  std::string id;
  double kl = 0.0;
  double jsd = 0.0;
  double tvd = 0.0;
};

struct ClassificationBlock {
  ClassificationScores scores;
  double soft_cross_entropy = 0.0;
  std::size_t argmax_ties = 0;
};

struct MetricReport {
  std::vector<InstanceMetrics> per_instance;
  double mean_kl = 0.0;
  double mean_jsd = 0.0;
  double mean_tvd = 0.0;
  double distance_correlation = 0.0;
  std::optional<ClassificationBlock> classification;
  MetricConfig config;
  std::optional<std::uint64_t> split_seed;
  /// role -> {path, sha256}
  std::map<std::string, std::pair<std::string, std::string>> inputs;

  nlohmann::json to_json() const;
  /// id,kl,jsd,tvd rows preceded by '#'-prefixed provenance lines.
  std::string to_csv() const;
};

/// Fills every report field for aligned HJD (P) and MJD (Q) matrices. With
/// `classify`, hard predictions are the MJD argmax and golds the HJD argmax.
MetricReport dataset_report(const DistributionMatrix& hjd, const DistributionMatrix& mjd,
                            const MetricConfig& config, bool classify = false);

}  // namespace hlv
