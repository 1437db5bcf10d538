#include "hlv/types.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hlv/error.hpp"

namespace hlv {

namespace {

std::string lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string describe(const Probs& p) {
  std::ostringstream os;
  os.precision(17);
  os << '[' << p[0] << ", " << p[1] << ", " << p[2] << ']';
  return os.str();
}

}  // namespace

std::string_view label_name(NliLabel label) noexcept {
  switch (label) {
    case NliLabel::Entailment:
      return "Entailment";
    case NliLabel::Neutral:
      return "Neutral";
    case NliLabel::Contradiction:
      return "Contradiction";
  }
  return "Unknown";
}

char label_letter(NliLabel label) noexcept {
  switch (label) {
    case NliLabel::Entailment:
      return 'e';
    case NliLabel::Neutral:
      return 'n';
    case NliLabel::Contradiction:
      return 'c';
  }
  return '?';
}

std::optional<NliLabel> try_parse_label(std::string_view text) noexcept {
  const std::string t = lower(text);
  if (t == "e" || t == "entailment") return NliLabel::Entailment;
  if (t == "n" || t == "neutral") return NliLabel::Neutral;
  if (t == "c" || t == "contradiction") return NliLabel::Contradiction;
  return std::nullopt;
}

NliLabel parse_label(std::string_view text) {
  if (auto label = try_parse_label(text)) return *label;
  throw DataError("unknown NLI label '" + std::string(text) + "'");
}

bool on_simplex(const Probs& probs, double tolerance) noexcept {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

JudgmentDistribution JudgmentDistribution::from_probs(const Probs& probs) {
  if (!on_simplex(probs)) {
    throw DataError("not a probability distribution over (E, N, C): " + describe(probs));
  }
  return JudgmentDistribution(probs);
}

JudgmentDistribution JudgmentDistribution::normalized(const Probs& weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw DataError("cannot normalize weights " + describe(weights));
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw DataError("cannot normalize zero weights " + describe(weights));
  return from_probs({weights[0] / sum, weights[1] / sum, weights[2] / sum});
}

JudgmentDistribution JudgmentDistribution::uniform() noexcept {
  return JudgmentDistribution({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
}

JudgmentDistribution parse_judgment_counts(const LabelCounts& counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw DataError("degenerate counts: every label count is zero");
  const auto t = static_cast<double>(total);
  return JudgmentDistribution::from_probs({static_cast<double>(counts[0]) / t,
                                           static_cast<double>(counts[1]) / t,
                                           static_cast<double>(counts[2]) / t});
}

JudgmentDistribution one_hot(NliLabel label) noexcept {
  Probs p{0.0, 0.0, 0.0};
  p[index_of(label)] = 1.0;
  return JudgmentDistribution::from_probs(p);
}

ArgmaxResult argmax(const JudgmentDistribution& d) noexcept {
  std::size_t best = 0;
  bool tie = false;
  for (std::size_t i = 1; i < 3; ++i) {
    if (d.at(i) > d.at(best)) {
      best = i;
      tie = false;
    } else if (d.at(i) == d.at(best)) {
      tie = true;
    }
  }
  return {label_at(best), tie};
}

}  // namespace hlv
