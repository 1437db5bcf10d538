#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hlv {

/// NLI labels in canonical order E < N < C. Every 3-vector in the library is
/// indexed in this order.
enum class NliLabel : std::uint8_t {
  Entailment = 0,
  Neutral = 1,
  Contradiction = 2,
};

inline constexpr std::array<NliLabel, 3> kAllLabels = {
    NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction};

constexpr std::size_t index_of(NliLabel label) noexcept {
  return static_cast<std::size_t>(label);
}

constexpr NliLabel label_at(std::size_t index) noexcept {
  return static_cast<NliLabel>(index);
}

/// "Entailment", "Neutral", "Contradiction".
std::string_view label_name(NliLabel label) noexcept;

/// Lower-case single letter used in data files: 'e', 'n', 'c'.
char label_letter(NliLabel label) noexcept;

/// Accepts full words and single letters, case-insensitively.
std::optional<NliLabel> try_parse_label(std::string_view text) noexcept;

/// Throws DataError on unknown text.
NliLabel parse_label(std::string_view text);

using Probs = std::array<double, 3>;
using LabelCounts = std::array<std::uint64_t, 3>;

/// A point on the probability simplex over the three labels.
class JudgmentDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates non-negativity and unit sum (within kSumTolerance) and keeps
  /// the components exactly as given.
  static JudgmentDistribution from_probs(const Probs& probs);

  /// Divides by the component sum. Throws DataError when the sum is not
  /// positive or a component is negative.
  static JudgmentDistribution normalized(const Probs& weights);

  static JudgmentDistribution uniform() noexcept;

  double operator[](NliLabel label) const noexcept { return probs_[index_of(label)]; }
  double at(std::size_t i) const { return probs_.at(i); }
  const Probs& probs() const noexcept { return probs_; }

  friend bool operator==(const JudgmentDistribution&, const JudgmentDistribution&) = default;

 private:
  explicit JudgmentDistribution(const Probs& probs) noexcept : probs_(probs) {}

  Probs probs_;
};

/// Checks the simplex invariants without constructing.
bool on_simplex(const Probs& probs, double tolerance = JudgmentDistribution::kSumTolerance) noexcept;

/// Converts per-label annotation counts into a distribution. All-zero counts
/// are rejected as degenerate.
JudgmentDistribution parse_judgment_counts(const LabelCounts& counts);

JudgmentDistribution one_hot(NliLabel label) noexcept;

struct ArgmaxResult {
  NliLabel label;
  bool tie;
};

/// Highest-probability label; ties go to the earliest label in canonical order.
ArgmaxResult argmax(const JudgmentDistribution& d) noexcept;

}  // namespace hlv
