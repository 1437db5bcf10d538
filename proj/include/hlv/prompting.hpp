#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hlv/dataset.hpp"
#include "hlv/types.hpp"

namespace hlv {

enum class PromptType {
  WithoutExplanations,
  WithExplanations,
  WithExplicitExplanations,
  AssistantMode,
  AssistantModeExplicit,
};

inline constexpr std::array<PromptType, 5> kAllPromptTypes = {
    PromptType::WithoutExplanations, PromptType::WithExplanations,
    PromptType::WithExplicitExplanations, PromptType::AssistantMode,
    PromptType::AssistantModeExplicit};

std::string_view to_string(PromptType type) noexcept;
PromptType parse_prompt_type(std::string_view name);

constexpr bool uses_explanations(PromptType t) noexcept {
  return t != PromptType::WithoutExplanations;
}
constexpr bool is_explicit(PromptType t) noexcept {
  return t == PromptType::WithExplicitExplanations || t == PromptType::AssistantModeExplicit;
}
constexpr bool is_assistant(PromptType t) noexcept {
  return t == PromptType::AssistantMode || t == PromptType::AssistantModeExplicit;
}

inline constexpr std::array<char, 3> kOptionLetters = {'A', 'B', 'C'};

/// Bijection from option letters (A, B, C) to labels.
class OptionMapping {
 public:
  /// `labels[i]` is the label shown next to letter i. Throws UsageError when
  /// the labels are not a permutation.
  static OptionMapping from_labels(const std::array<NliLabel, 3>& labels);
  static OptionMapping identity() noexcept;

  NliLabel label_for(std::size_t letter) const { return labels_.at(letter); }
  std::size_t letter_for(NliLabel label) const noexcept;
  const std::array<NliLabel, 3>& labels() const noexcept { return labels_; }

  /// Compact form, e.g. "NCE" for A->N, B->C, C->E.
  std::string code() const;
  static OptionMapping from_code(std::string_view code);

  friend bool operator==(const OptionMapping&, const OptionMapping&) = default;

 private:
  explicit OptionMapping(const std::array<NliLabel, 3>& labels) noexcept : labels_(labels) {}

  std::array<NliLabel, 3> labels_;
};

/// All six mappings, ordered lexicographically by (label at A, label at B).
std::vector<OptionMapping> option_mappings();

enum class ExplanationMode {
  None,
  Serial,
  Parallel,
  KAtATime,
};

std::string_view to_string(ExplanationMode mode) noexcept;
ExplanationMode parse_explanation_mode(std::string_view name);

/// Indices into an ExplanationSet, in prompt order.
using ExplanationBatch = std::vector<std::size_t>;

/// Enumerates the batches for `m` explanations:
///   None      -> one empty batch
///   Serial    -> all m! orderings of all m explanations
///   Parallel  -> m singleton batches
///   KAtATime  -> all m!/(m-k)! ordered selections of k explanations
/// Enumeration order is lexicographic in the index sequence.
std::vector<ExplanationBatch> explanation_batches(std::size_t m, std::size_t k, ExplanationMode mode);

struct ChatMessage {
  enum class Role { User, Assistant };

  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

std::string_view to_string(ChatMessage::Role role) noexcept;

struct PromptText {
  std::vector<ChatMessage> messages;

  /// Compact JSON array of {"role", "content"} objects. Byte-stable.
  std::string canonical_json() const;
  /// SHA-256 of canonical_json().
  std::string digest() const;

  friend bool operator==(const PromptText&, const PromptText&) = default;
};

inline constexpr std::string_view kDefaultTemplateVersion = "v1";

std::vector<std::string> template_versions();

/// Renders one prompt. The batch must be empty exactly when the type is
/// WithoutExplanations; assistant variants need at least one explanation.
PromptText render_prompt(const NliItem& item, std::span<const ExplanationAnnotation> batch,
                         const OptionMapping& mapping, PromptType type,
                         std::string_view template_version = kDefaultTemplateVersion);

}  // namespace hlv
