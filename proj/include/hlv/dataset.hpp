#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hlv/types.hpp"

namespace hlv {

struct NliItem {
  std::string id;
  std::string premise;
  std::string hypothesis;
};

struct ExplanationAnnotation {
  std::string annotator;
  NliLabel label = NliLabel::Entailment;
  std::string text;
};

struct ExplanationSet {
  std::string item_id;
  std::vector<ExplanationAnnotation> explanations;

  std::size_t size() const noexcept { return explanations.size(); }
};

struct LabeledDataset {
  std::vector<NliItem> items;
  std::map<std::string, JudgmentDistribution> distributions;
  std::map<std::string, ExplanationSet> explanations;
  std::optional<int> annotator_count;

  /// Throws DataError when an invariant (unique ids, non-empty text, keys
  /// referencing items) is violated.
  void validate() const;

  const NliItem* find(const std::string& id) const;
  std::size_t explanation_count(const std::string& id) const;
};

enum class DatasetFormat {
  ChaosNli,
  VariErr,
  Canonical,
};

/// Which distribution a source file contributes. ChaosNLI files carry three:
/// the crowd HJD, the original single gold label and the original five-way
/// annotation; the other formats only honor Default.
enum class DistributionView {
  Default,
  SourceMajority,
  SourceAnnotations,
};

DatasetFormat parse_dataset_format(const std::string& name);
DistributionView parse_distribution_view(const std::string& name);

/// Parses line-delimited JSON records. `source` names the input in errors.
LabeledDataset parse_dataset(std::istream& in, DatasetFormat format,
                             DistributionView view = DistributionView::Default,
                             const std::string& source = "<stream>");

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            DistributionView view = DistributionView::Default);

/// One canonical JSON record per line, items in dataset order.
std::string to_canonical_jsonl(const LabeledDataset& dataset);

struct PairedItem {
  NliItem item;
  JudgmentDistribution first;
  JudgmentDistribution second;
  std::optional<ExplanationSet> explanations;
};

struct PairedDataset {
  std::vector<PairedItem> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
};

using ExplanationFilter = std::function<bool(std::size_t)>;

/// Accepts items with exactly `m` explanations.
ExplanationFilter explanation_count_is(std::size_t m);

/// Pairs ids present with a distribution in both datasets (and passing the
/// filter), ascending by id. Item text comes from `a`; explanations from
/// whichever side has them, `a` first.
PairedDataset align_datasets(const LabeledDataset& a, const LabeledDataset& b,
                             const ExplanationFilter& filter = {});

/// Deterministic dev/test split of the items not in `exclude_ids`: order by a
/// seeded stable hash of the id, then alternate. Sizes differ by at most one.
std::pair<LabeledDataset, LabeledDataset> split_remainder(const LabeledDataset& full,
                                                          const std::set<std::string>& exclude_ids,
                                                          std::uint64_t seed);

}  // namespace hlv
