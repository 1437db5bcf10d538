#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hlv/dataset.hpp"
#include "hlv/error.hpp"
#include "hlv/types.hpp"

namespace hlv::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitBackend = 3,
  kExitPartial = 4,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Runs the hlvest command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// File layouts a distribution table can be read from.
enum class TableFormat {
  Mjd,
  SoftLabels,
  ChaosNli,
  VariErr,
  Canonical,
};

std::string_view to_string(TableFormat f) noexcept;
/// "auto" sniffs the first record.
TableFormat parse_table_format(const std::string& name, const std::filesystem::path& path);
TableFormat detect_table_format(const std::filesystem::path& path);

struct DistributionTable {
  std::map<std::string, JudgmentDistribution> rows;
  std::string path;
  std::string sha256;
  TableFormat format = TableFormat::Canonical;
  /// Records skipped because they carry an error instead of a distribution.
  std::size_t error_records = 0;
};

DistributionTable load_distribution_table(const std::filesystem::path& path,
                                          const std::string& format = "auto",
                                          const std::string& view = "default");

/// Items (and explanations) from any dataset layout; "auto" sniffs.
LabeledDataset load_items(const std::filesystem::path& path, const std::string& format = "auto",
                          const std::string& view = "default");

struct SplitScores {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double kl = 0.0;
  double ce_loss = 0.0;
};

/// What the fine-tuning harness writes after training on an exported file.
struct FinetuneMetrics {
  /// sha256 of the labels file the training export was built from.
  std::string source_digest;
  std::string training_file_digest;
  std::string config_digest;
  int selected_epoch = 0;
  std::map<std::string, SplitScores> splits;

  /// Throws DataError on missing digests or non-finite values.
  static FinetuneMetrics from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool same_run(const FinetuneMetrics& other) const;
};

}  // namespace hlv::cli
