#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hlv/error.hpp"
#include "hlv/prompting.hpp"

namespace hlv {
namespace {

const NliItem kItem{"1", "A man sleeps.", "A person rests."};

std::vector<ExplanationAnnotation> two_explanations() {
  return {{"a1", NliLabel::Entailment, "sleeping is resting"},
          {"a2", NliLabel::Neutral, "could be napping"}};
}

TEST(OptionMappings, SixDistinctBijectionsInFixedOrder) {
  const auto all = option_mappings();
  ASSERT_EQ(all.size(), 6u);
  std::set<std::string> codes;
  for (const auto& m : all) codes.insert(m.code());
  EXPECT_EQ(codes.size(), 6u);
  EXPECT_EQ(all.front().code(), "ENC");
  EXPECT_EQ(all.back().code(), "CNE");
  EXPECT_EQ(all.front(), OptionMapping::identity());
}

TEST(OptionMappings, EveryLabelSitsAtEveryLetterTwice) {
  for (NliLabel label : kAllLabels) {
    std::array<int, 3> at_letter{};
    for (const auto& m : option_mappings()) ++at_letter[m.letter_for(label)];
    EXPECT_EQ(at_letter, (std::array<int, 3>{2, 2, 2}));
  }
}

TEST(OptionMappings, CodesRoundTripAndRejectNonBijections) {
  const auto m = OptionMapping::from_code("NCE");
  EXPECT_EQ(m.label_for(0), NliLabel::Neutral);
  EXPECT_EQ(m.letter_for(NliLabel::Entailment), 2u);
  EXPECT_EQ(OptionMapping::from_code(m.code()), m);
  EXPECT_THROW(OptionMapping::from_code("EEC"), UsageError);
  EXPECT_THROW(OptionMapping::from_code("EN"), UsageError);
  EXPECT_THROW(OptionMapping::from_labels({NliLabel::Neutral, NliLabel::Neutral, NliLabel::Contradiction}),
               UsageError);
}

TEST(ExplanationBatches, CountsPerMode) {
  EXPECT_EQ(explanation_batches(4, 0, ExplanationMode::None).size(), 1u);
  EXPECT_TRUE(explanation_batches(4, 0, ExplanationMode::None)[0].empty());
  EXPECT_EQ(explanation_batches(4, 0, ExplanationMode::Serial).size(), 24u);
  EXPECT_EQ(explanation_batches(4, 0, ExplanationMode::Parallel).size(), 4u);
  EXPECT_EQ(explanation_batches(4, 2, ExplanationMode::KAtATime).size(), 12u);
  EXPECT_EQ(explanation_batches(4, 3, ExplanationMode::KAtATime).size(), 24u);
  EXPECT_EQ(explanation_batches(4, 1, ExplanationMode::KAtATime).size(), 4u);
  EXPECT_EQ(explanation_batches(1, 0, ExplanationMode::Serial).size(), 1u);
}

TEST(ExplanationBatches, KAtATimeMatchesSerialAndParallelAtTheEnds) {
  for (std::size_t m = 1; m <= 5; ++m) {
    EXPECT_EQ(explanation_batches(m, m, ExplanationMode::KAtATime),
              explanation_batches(m, 0, ExplanationMode::Serial));
    EXPECT_EQ(explanation_batches(m, 1, ExplanationMode::KAtATime),
              explanation_batches(m, 0, ExplanationMode::Parallel));
  }
}

TEST(ExplanationBatches, SelectionsAreDistinctOrderedAndLexicographic) {
  const auto batches = explanation_batches(5, 3, ExplanationMode::KAtATime);
  EXPECT_EQ(batches.size(), 60u);
  EXPECT_TRUE(std::is_sorted(batches.begin(), batches.end()));
  std::set<ExplanationBatch> unique(batches.begin(), batches.end());
  EXPECT_EQ(unique.size(), batches.size());
  for (const auto& b : batches) {
    std::set<std::size_t> members(b.begin(), b.end());
    EXPECT_EQ(members.size(), 3u);
    EXPECT_LT(*members.rbegin(), 5u);
  }
}

TEST(ExplanationBatches, KOutOfRangeIsUsageError) {
  EXPECT_THROW(explanation_batches(4, 0, ExplanationMode::KAtATime), UsageError);
  EXPECT_THROW(explanation_batches(4, 5, ExplanationMode::KAtATime), UsageError);
}

TEST(RenderPrompt, WithoutExplanationsMatchesTemplateExactly) {
  const auto p = render_prompt(kItem, {}, OptionMapping::identity(), PromptType::WithoutExplanations);
  ASSERT_EQ(p.messages.size(), 1u);
  EXPECT_EQ(p.messages[0].role, ChatMessage::Role::User);
  EXPECT_EQ(p.messages[0].content,
            "Please determine whether the following Statement is true (entailment), undetermined "
            "(neutral), or false (contradiction) given the Context below and select ONE of the listed "
            "options and start your answer with a single letter.\n"
            "Context: A man sleeps.\n"
            "Statement: A person rests.\n"
            "A. Entailment\nB. Neutral\nC. Contradiction.\n"
            "Answer:");
}

TEST(RenderPrompt, OptionBlockFollowsTheMapping) {
  const auto p = render_prompt(kItem, {}, OptionMapping::from_code("CEN"), PromptType::WithoutExplanations);
  EXPECT_NE(p.messages[0].content.find("A. Contradiction\nB. Entailment\nC. Neutral.\nAnswer:"),
            std::string::npos);
}

TEST(RenderPrompt, CommentsAreNumberedAndExplicitLabelsAppended) {
  const auto ex = two_explanations();
  const auto plain = render_prompt(kItem, ex, OptionMapping::identity(), PromptType::WithExplanations);
  EXPECT_NE(plain.messages[0].content.find("Comment 1: sleeping is resting\nComment 2: could be napping\nA."),
            std::string::npos);
  EXPECT_EQ(plain.messages[0].content.find("so I choose"), std::string::npos);

  const auto expl = render_prompt(kItem, ex, OptionMapping::identity(), PromptType::WithExplicitExplanations);
  EXPECT_NE(expl.messages[0].content.find("Comment 1: sleeping is resting, so I choose Entailment\n"
                                          "Comment 2: could be napping, so I choose Neutral"),
            std::string::npos);
}

TEST(RenderPrompt, AssistantModeSplitsIntoThreeTurns) {
  const auto ex = two_explanations();
  const auto p = render_prompt(kItem, ex, OptionMapping::identity(), PromptType::AssistantModeExplicit);
  ASSERT_EQ(p.messages.size(), 3u);
  EXPECT_EQ(p.messages[0].role, ChatMessage::Role::User);
  EXPECT_EQ(p.messages[1].role, ChatMessage::Role::Assistant);
  EXPECT_EQ(p.messages[2].role, ChatMessage::Role::User);
  EXPECT_EQ(p.messages[1].content,
            "Comment 1: sleeping is resting, so I choose Entailment\nComment 2: could be napping, so I choose Neutral");
  EXPECT_NE(p.messages[0].content.find("Context: A man sleeps.\nStatement: A person rests."), std::string::npos);
  EXPECT_TRUE(p.messages[2].content.ends_with("A. Entailment\nB. Neutral\nC. Contradiction.\nAnswer:"));
}

TEST(RenderPrompt, BatchMustMatchPromptType) {
  const auto ex = two_explanations();
  EXPECT_THROW(render_prompt(kItem, ex, OptionMapping::identity(), PromptType::WithoutExplanations), UsageError);
  EXPECT_THROW(render_prompt(kItem, {}, OptionMapping::identity(), PromptType::WithExplanations), UsageError);
  EXPECT_THROW(render_prompt(kItem, {}, OptionMapping::identity(), PromptType::WithoutExplanations, "v0"),
               UsageError);
}

TEST(RenderPrompt, BracesInItemTextAreNotReinterpreted) {
  const NliItem item{"x", "Use {hypothesis} literally.", "A {premise}."};
  const auto p = render_prompt(item, {}, OptionMapping::identity(), PromptType::WithoutExplanations);
  EXPECT_NE(p.messages[0].content.find("Context: Use {hypothesis} literally.\nStatement: A {premise}."),
            std::string::npos);
}

TEST(PromptText, DigestIsStableAndSensitive) {
  const auto a = render_prompt(kItem, {}, OptionMapping::identity(), PromptType::WithoutExplanations);
  const auto b = render_prompt(kItem, {}, OptionMapping::identity(), PromptType::WithoutExplanations);
  const auto c = render_prompt(kItem, {}, OptionMapping::from_code("NEC"), PromptType::WithoutExplanations);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_EQ(a.digest().size(), 64u);
  EXPECT_EQ(a.canonical_json().front(), '[');
}

TEST(PromptTypes, NamesRoundTrip) {
  for (PromptType t : kAllPromptTypes) EXPECT_EQ(parse_prompt_type(to_string(t)), t);
  EXPECT_THROW(parse_prompt_type("chain-of-thought"), UsageError);
  EXPECT_EQ(parse_explanation_mode("k-at-a-time"), ExplanationMode::KAtATime);
}

TEST(Templates, DefaultVersionShips) {
  const auto versions = template_versions();
  EXPECT_NE(std::find(versions.begin(), versions.end(), std::string(kDefaultTemplateVersion)), versions.end());
}

}  // namespace
}  // namespace hlv
