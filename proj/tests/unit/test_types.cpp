#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hlv/error.hpp"
#include "hlv/types.hpp"
#include "test_support.hpp"

namespace hlv {
namespace {

TEST(Labels, ParseWordsAndLettersCaseInsensitively) {
  EXPECT_EQ(parse_label("entailment"), NliLabel::Entailment);
  EXPECT_EQ(parse_label("Neutral"), NliLabel::Neutral);
  EXPECT_EQ(parse_label("C"), NliLabel::Contradiction);
  EXPECT_EQ(parse_label("e"), NliLabel::Entailment);
  EXPECT_FALSE(try_parse_label("idk").has_value());
  EXPECT_THROW(parse_label("maybe"), DataError);
}

TEST(Labels, CanonicalOrderIsENC) {
  EXPECT_EQ(index_of(NliLabel::Entailment), 0u);
  EXPECT_EQ(index_of(NliLabel::Neutral), 1u);
  EXPECT_EQ(index_of(NliLabel::Contradiction), 2u);
  EXPECT_EQ(label_letter(label_at(2)), 'c');
  EXPECT_EQ(label_name(NliLabel::Neutral), "Neutral");
}

TEST(JudgmentDistribution, FromProbsKeepsValuesExactly) {
  const Probs p{0.1, 0.2, 0.7};
  const auto d = JudgmentDistribution::from_probs(p);
  EXPECT_EQ(d.probs(), p);
  EXPECT_EQ(d[NliLabel::Contradiction], 0.7);
}

TEST(JudgmentDistribution, RejectsOffSimplexInput) {
  EXPECT_THROW(JudgmentDistribution::from_probs({0.5, 0.5, 0.5}), DataError);
  EXPECT_THROW(JudgmentDistribution::from_probs({-0.1, 0.6, 0.5}), DataError);
  EXPECT_THROW(JudgmentDistribution::from_probs({std::nan(""), 0.5, 0.5}), DataError);
  EXPECT_THROW(JudgmentDistribution::normalized({0.0, 0.0, 0.0}), DataError);
}

TEST(JudgmentDistribution, SumToleranceIsOneBillionth) {
  EXPECT_NO_THROW(JudgmentDistribution::from_probs({0.5, 0.5, 5e-10}));
  EXPECT_THROW(JudgmentDistribution::from_probs({0.5, 0.5, 2e-9}), DataError);
}

TEST(JudgmentCounts, ConvertCountsToProportions) {
  const auto d = parse_judgment_counts({80, 15, 5});
  EXPECT_DOUBLE_EQ(d[NliLabel::Entailment], 0.80);
  EXPECT_DOUBLE_EQ(d[NliLabel::Neutral], 0.15);
  EXPECT_DOUBLE_EQ(d[NliLabel::Contradiction], 0.05);
  EXPECT_EQ(parse_judgment_counts({0, 3, 0}), one_hot(NliLabel::Neutral));
}

TEST(JudgmentCounts, AllZeroCountsAreDegenerate) {
  EXPECT_THROW(parse_judgment_counts({0, 0, 0}), DataError);
}

TEST(JudgmentCounts, RandomCountsAlwaysLandOnSimplex) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> c(0, 200);
  for (int i = 0; i < 2000; ++i) {
    LabelCounts counts{c(rng), c(rng), c(rng)};
    if (counts[0] + counts[1] + counts[2] == 0) counts[1] = 1;
    EXPECT_TRUE(on_simplex(parse_judgment_counts(counts).probs()));
  }
}

TEST(Argmax, TiesGoToEarliestLabel) {
  const auto r = argmax(JudgmentDistribution::from_probs({0.4, 0.4, 0.2}));
  EXPECT_EQ(r.label, NliLabel::Entailment);
  EXPECT_TRUE(r.tie);
  const auto u = argmax(JudgmentDistribution::uniform());
  EXPECT_EQ(u.label, NliLabel::Entailment);
  EXPECT_TRUE(u.tie);
  const auto c = argmax(JudgmentDistribution::from_probs({0.3, 0.3, 0.4}));
  EXPECT_EQ(c.label, NliLabel::Contradiction);
  EXPECT_FALSE(c.tie);
}

TEST(Argmax, OneHotOfArgmaxIsIdempotentOnOneHots) {
  for (NliLabel l : kAllLabels) {
    const auto d = one_hot(l);
    EXPECT_EQ(one_hot(argmax(d).label), d);
  }
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto once = one_hot(argmax(testing::random_distribution(rng)).label);
    EXPECT_EQ(one_hot(argmax(once).label), once);
  }
}

}  // namespace
}  // namespace hlv
