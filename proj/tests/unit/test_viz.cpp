#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "hlv/error.hpp"
#include "hlv/viz.hpp"
#include "test_support.hpp"
#include "viz_fixtures.hpp"

namespace hlv {
namespace {

const double kH = std::sqrt(3.0) / 2.0;

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

void check_golden(const std::string& name, const std::string& rendered) {
  const auto path = std::filesystem::path(HLV_FIXTURE_DIR) / "golden" / name;
  if (const char* update = std::getenv("HLV_UPDATE_GOLDEN"); update != nullptr && *update == '1') {
    testing::write_text(path, rendered);
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(rendered, testing::read_text(path)) << "regenerate with HLV_UPDATE_GOLDEN=1 if the change is intended";
}

TEST(TernaryCoords, CornersAndCentroid) {
  const auto e = ternary_coords(one_hot(NliLabel::Entailment));
  const auto n = ternary_coords(one_hot(NliLabel::Neutral));
  const auto c = ternary_coords(one_hot(NliLabel::Contradiction));
  EXPECT_EQ(e.x, 0.0);
  EXPECT_EQ(e.y, 0.0);
  EXPECT_EQ(n.x, 1.0);
  EXPECT_EQ(n.y, 0.0);
  EXPECT_EQ(c.x, 0.5);
  EXPECT_EQ(c.y, kH);
  const auto m = ternary_coords(JudgmentDistribution::uniform());
  EXPECT_NEAR(m.x, 0.5, 1e-15);
  EXPECT_NEAR(m.y, kH / 3.0, 1e-15);
}

TEST(TernaryCoords, AffineInTheDistribution) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto p = testing::random_distribution(rng, i % 2 == 0);
    const auto q = testing::random_distribution(rng);
    const double t = u(rng);
    Probs mix{};
    for (std::size_t k = 0; k < 3; ++k) mix[k] = t * p.at(k) + (1 - t) * q.at(k);
    const auto a = ternary_coords(JudgmentDistribution::normalized(mix));
    const auto pp = ternary_coords(p);
    const auto qq = ternary_coords(q);
    EXPECT_NEAR(a.x, t * pp.x + (1 - t) * qq.x, 1e-12);
    EXPECT_NEAR(a.y, t * pp.y + (1 - t) * qq.y, 1e-12);
    // Inside the triangle.
    EXPECT_GE(a.y, -1e-15);
    EXPECT_LE(a.y, std::sqrt(3.0) * a.x + 1e-12);
    EXPECT_LE(a.y, std::sqrt(3.0) * (1 - a.x) + 1e-12);
  }
}

TEST(Zoom, ScaleOneIsIdentity) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 1000; ++i) {
    const auto d = testing::random_distribution(rng, i % 2 == 0);
    const auto z = zoom(d, 1.0);
    EXPECT_EQ(z.distribution, d);
    EXPECT_FALSE(z.clipped);
  }
}

TEST(Zoom, HandComputedExample) {
  const auto z = zoom(JudgmentDistribution::from_probs({0.4, 0.35, 0.25}), 3.3);
  EXPECT_FALSE(z.clipped);
  EXPECT_NEAR(z.distribution.at(0), 0.55333, 1e-5);
  EXPECT_NEAR(z.distribution.at(1), 0.38833, 1e-5);
  EXPECT_NEAR(z.distribution.at(2), 0.05833, 1e-5);
}

TEST(Zoom, InverseScaleUndoesUnclippedZoom) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const auto d = testing::random_distribution(rng);
    const auto z = zoom(d, 2.0);
    if (z.clipped) continue;
    const auto back = zoom(z.distribution, 0.5);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(back.distribution.at(k), d.at(k), 1e-12);
  }
}

TEST(Zoom, ClipsOffSimplexPointsAndFlagsThem) {
  const auto z = zoom(one_hot(NliLabel::Entailment), 3.0);
  EXPECT_TRUE(z.clipped);
  EXPECT_EQ(z.distribution.probs(), (Probs{1.0, 0.0, 0.0}));
  const auto mild = zoom(JudgmentDistribution::from_probs({0.5, 0.3, 0.2}), 3.0);
  EXPECT_TRUE(mild.clipped);
  EXPECT_NEAR(mild.distribution.at(0) + mild.distribution.at(1), 1.0, 1e-15);
  EXPECT_THROW(zoom(JudgmentDistribution::uniform(), 0.0), UsageError);
  EXPECT_THROW(zoom(JudgmentDistribution::uniform(), -2.0), UsageError);
}

TEST(RenderScatter, OneCirclePerPoint) {
  std::mt19937_64 rng(29);
  std::vector<LabeledPoint> points;
  for (int i = 0; i < 341; ++i) {
    points.push_back({"id" + std::to_string(i), ternary_coords(testing::random_distribution(rng)), "model"});
  }
  const auto svg = render_scatter(points, PlotSpec{});
  EXPECT_EQ(count(svg, "class=\"pt\""), 341u);
  EXPECT_EQ(count(svg, "<circle"), 341u);
  EXPECT_EQ(svg, render_scatter(points, PlotSpec{}));
}

TEST(RenderScatter, EscapesTextAndRecordsZoom) {
  PlotSpec spec;
  spec.title = "a < b";
  spec.zoom_scale = 3.3;
  spec.provenance = {"input model.jsonl sha256 0123"};
  const auto svg = render_scatter(testing::golden_points(), spec);
  EXPECT_NE(svg.find("a &lt; b"), std::string::npos);
  EXPECT_NE(svg.find("<title>d&lt;&amp;&gt;</title>"), std::string::npos);
  EXPECT_NE(svg.find("zoom scale 3.300"), std::string::npos);
  EXPECT_NE(svg.find("<metadata>\ninput model.jsonl sha256 0123\n</metadata>"), std::string::npos);
}

TEST(RenderScatter, MatchesGoldenFile) {
  check_golden("scatter.svg", render_scatter(testing::golden_points(), testing::golden_spec("golden scatter")));
}

TEST(RenderErrorPlot, MatchesGoldenFile) {
  check_golden("errors.svg", render_error_plot(testing::golden_pairs(), testing::golden_spec("golden errors")));
}

TEST(RenderErrorPlot, OneLinePerPairShadedByDistance) {
  const auto svg = render_error_plot(testing::golden_pairs(), PlotSpec{});
  EXPECT_EQ(count(svg, "<line class=\"err\""), 3u);
  const PlotSpec spec;
  EXPECT_NE(svg.find("stroke=\"" + spec.dark_shade + "\""), std::string::npos);
  EXPECT_NE(svg.find("stroke=\"" + spec.light_shade + "\""), std::string::npos);
  std::vector<ErrorPair> bad = testing::golden_pairs();
  bad[0].distance = -1.0;
  EXPECT_THROW(render_error_plot(bad, PlotSpec{}), UsageError);
}

TEST(ErrorShade, EndpointsAndMonotoneRamp) {
  const PlotSpec spec;
  EXPECT_EQ(error_shade(0.0, 1.0, spec), spec.light_shade);
  EXPECT_EQ(error_shade(1.0, 1.0, spec), spec.dark_shade);
  EXPECT_EQ(error_shade(5.0, 1.0, spec), spec.dark_shade);
  EXPECT_EQ(error_shade(0.0, 0.0, spec), spec.light_shade);
  // The default ramp darkens every channel, so the green channel decreases.
  int prev = 256;
  for (int i = 0; i <= 20; ++i) {
    const auto hex = error_shade(i / 20.0, 1.0, spec);
    const int g = std::stoi(hex.substr(3, 2), nullptr, 16);
    EXPECT_LE(g, prev);
    prev = g;
  }
}

TEST(PlotSpec, RejectsBadValues) {
  PlotSpec spec;
  spec.point_radius = 0.0;
  EXPECT_THROW(spec.validate(), UsageError);
  spec = PlotSpec{};
  spec.light_shade = "green";
  EXPECT_THROW(spec.validate(), UsageError);
}

TEST(PointsCsv, FullPrecisionRows) {
  auto pts = testing::golden_points();
  pts[0].clipped = true;
  const auto csv = points_csv(pts);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,x,y,dataset,clipped");
  EXPECT_EQ(count(csv, "\n"), 5u);
  EXPECT_NE(csv.find(",human,1\n"), std::string::npos);
}

}  // namespace
}  // namespace hlv
