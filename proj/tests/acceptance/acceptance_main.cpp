// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion.
//
//   hlv_acceptance            run everything; exit 1 if anything failed
//   hlv_acceptance --only N   run criterion N; exit 77 when it is skipped
//
// Criteria 1-3 need the real datasets: HLV_CHAOSNLI_PATH (ChaosNLI MNLI
// jsonl) and HLV_VARIERR_PATH (VariErr json).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcor_oracle.hpp"
#include "hlv/cli.hpp"
#include "hlv/dataset.hpp"
#include "hlv/estimator.hpp"
#include "hlv/metrics.hpp"
#include "hlv/viz.hpp"
#include "test_support.hpp"
#include "viz_fixtures.hpp"

namespace fs = std::filesystem;
using namespace hlv;

namespace {

// Tolerances.
constexpr double kBaselineTol = 0.005;
constexpr double kDcorDataTol = 0.01;
constexpr double kDcorOracleTol = 1e-10;
constexpr double kPropertyTol = 1e-9;
constexpr double kDebiasTol = 1e-12;
constexpr double kFourDecimals = 5e-5;
constexpr std::size_t kOverlapSize = 341;
constexpr int kPropertySamples = 1000;
constexpr double kBaselineSeconds = 5.0;
constexpr double kDcorDataSeconds = 10.0;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d = {}) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::Skip, std::move(d)}; }

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Real-data tables -------------------------------------------------------------

struct Baselines {
  std::map<std::string, JudgmentDistribution> hjd;
  std::map<std::string, std::map<std::string, JudgmentDistribution>> models;
};

std::optional<Baselines> load_baselines(std::string& why) {
  const char* chaos = std::getenv("HLV_CHAOSNLI_PATH");
  const char* varierr = std::getenv("HLV_VARIERR_PATH");
  if (!chaos || !*chaos || !varierr || !*varierr) {
    why = "HLV_CHAOSNLI_PATH and HLV_VARIERR_PATH not set; datasets unavailable";
    return std::nullopt;
  }
  const auto hjd = load_dataset(chaos, DatasetFormat::ChaosNli, DistributionView::Default);
  const auto single = load_dataset(chaos, DatasetFormat::ChaosNli, DistributionView::SourceMajority);
  const auto dist = load_dataset(chaos, DatasetFormat::ChaosNli, DistributionView::SourceAnnotations);
  const auto ve = load_dataset(varierr, DatasetFormat::VariErr);
  Baselines b;
  for (const auto& [id, d] : hjd.distributions) {
    if (!ve.distributions.count(id)) continue;
    b.hjd.emplace(id, d);
    b.models["uniform"].emplace(id, JudgmentDistribution::uniform());
    b.models["mnli-single"].emplace(id, single.distributions.at(id));
    b.models["mnli-dist"].emplace(id, dist.distributions.at(id));
    b.models["varierr"].emplace(id, ve.distributions.at(id));
  }
  return b;
}

MetricReport report_for(const Baselines& b, const std::string& model, double epsilon = 1e-4) {
  MetricConfig config;
  config.smoothing.epsilon = epsilon;
  const auto [h, m] = align_tables(b.hjd, b.models.at(model));
  return dataset_report(h, m, config);
}

Outcome criterion_baselines() {
  const auto start = std::chrono::steady_clock::now();
  std::string why;
  const auto b = load_baselines(why);
  if (!b) return skip(why);
  if (b->hjd.size() != kOverlapSize) return fail("overlap has " + std::to_string(b->hjd.size()) + " items");
  const auto uni = report_for(*b, "uniform");
  const auto single = report_for(*b, "mnli-single");
  const auto ve = report_for(*b, "varierr");
  auto near = [](double got, double want) { return std::abs(got - want) <= kBaselineTol; };
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string detail = "uniform " + fmt(uni.mean_kl) + "/" + fmt(uni.mean_jsd) + "/" + fmt(uni.mean_tvd) +
                             "; mnli-single JSD/TVD " + fmt(single.mean_jsd) + "/" + fmt(single.mean_tvd) +
                             "; varierr JSD/TVD " + fmt(ve.mean_jsd) + "/" + fmt(ve.mean_tvd) + "; " +
                             fmt(seconds, 2) + " s";
  const bool ok = near(uni.mean_kl, 0.364) && near(uni.mean_jsd, 0.307) && near(uni.mean_tvd, 0.350) &&
                  near(single.mean_jsd, 0.422) && near(single.mean_tvd, 0.435) && near(ve.mean_jsd, 0.282) &&
                  near(ve.mean_tvd, 0.296) && seconds < kBaselineSeconds;
  return ok ? pass(detail) : fail(detail);
}

Outcome criterion_kl_ordering() {
  std::string why;
  const auto b = load_baselines(why);
  if (!b) return skip(why);
  std::string detail;
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    const double single = report_for(*b, "mnli-single", eps).mean_kl;
    const double ve = report_for(*b, "varierr", eps).mean_kl;
    const double dist = report_for(*b, "mnli-dist", eps).mean_kl;
    const double uni = report_for(*b, "uniform", eps).mean_kl;
    detail = "eps " + fmt(eps, 5) + ": " + fmt(single) + " > " + fmt(ve) + " > " + fmt(dist) + " > " + fmt(uni);
    if (!(single > ve && ve > dist && dist > uni)) return fail(detail);
  }
  if (b->hjd.size() != kOverlapSize) {
    return fail("overlap has " + std::to_string(b->hjd.size()) + " items; ordering holds");
  }
  return pass("holds for eps 1e-3, 1e-4, 1e-5");
}

Outcome criterion_dcor_data() {
  const auto start = std::chrono::steady_clock::now();
  std::string why;
  const auto b = load_baselines(why);
  if (!b) return skip(why);
  const std::pair<const char*, double> expected[] = {
      {"uniform", 0.0}, {"mnli-single", 0.612}, {"mnli-dist", 0.795}, {"varierr", 0.688}};
  std::string detail;
  bool ok = true;
  for (const auto& [name, value] : expected) {
    const double d = report_for(*b, name).distance_correlation;
    detail += std::string(name) + " " + fmt(d) + "; ";
    ok = ok && std::abs(d - value) <= kDcorDataTol;
  }
  // The uniform model must give exactly zero.
  ok = ok && report_for(*b, "uniform").distance_correlation == 0.0;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  detail += fmt(seconds, 2) + " s";
  ok = ok && seconds < kDcorDataSeconds;
  if (b->hjd.size() != kOverlapSize) return fail("overlap has " + std::to_string(b->hjd.size()) + " items; " + detail);
  return ok ? pass(detail) : fail(detail);
}

// In-process criteria -----------------------------------------------------------

Outcome criterion_dcor_oracle() {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Probs> x(10);
    std::vector<Probs> y(10);
    for (auto& r : x) r = testing::random_simplex(rng);
    for (auto& r : y) r = testing::random_simplex(rng);
    worst = std::max(worst, std::abs(distance_correlation(x, y) - testing::oracle_distance_correlation(x, y)));
    worst = std::max(worst, std::abs(distance_correlation(x, x) - 1.0));
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", worst);
  const std::string detail = std::string("max deviation ") + buf;
  return worst <= kDcorOracleTol ? pass(detail) : fail(detail);
}

Outcome criterion_metric_properties() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const SmoothingConfig q_only;
  SmoothingConfig both;
  both.applied_to = SmoothingTarget::Both;
  for (int i = 0; i < kPropertySamples; ++i) {
    const auto p = testing::random_distribution(rng, i % 2 == 0);
    const auto q = testing::random_distribution(rng, i % 3 == 0);
    const auto r = testing::random_distribution(rng);
    if (kl(p, q, q_only) < 0.0 || kl(p, p, both) != 0.0 || (p != q && !(kl(p, q, both) > 0.0))) {
      return fail("KL non-negativity/identity violated at sample " + std::to_string(i));
    }
    const double jpq = jsd(p, q);
    if (jpq != jsd(q, p) || jpq < 0.0 || jpq > 1.0 + kPropertyTol || jpq > jsd(p, r) + jsd(r, q) + kPropertyTol) {
      return fail("JSD symmetry/bounds/triangle violated at sample " + std::to_string(i));
    }
    const double tpq = tvd(p, q);
    if (tpq < 0.0 || tpq > 1.0 + kPropertyTol || tpq > tvd(p, r) + tvd(r, q) + kPropertyTol) {
      return fail("TVD bounds/triangle violated at sample " + std::to_string(i));
    }
    if (std::abs(soft_cross_entropy(p, q, q_only) - (entropy(p) + kl(p, q, q_only))) > kPropertyTol) {
      return fail("CE != H + KL at sample " + std::to_string(i));
    }
    OptionScores s;
    s.scores = {u(rng), u(rng), u(rng)};
    double prev = -1.0;
    for (double tau : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
      const double h = entropy(JudgmentDistribution::normalized(softmax_scores(s, tau)));
      if (h < prev - kPropertyTol) return fail("softmax entropy not monotone in tau at sample " + std::to_string(i));
      prev = h;
    }
  }
  return pass(std::to_string(kPropertySamples) + " samples");
}

Outcome criterion_debiasing() {
  const NliItem item{"i", "A cat sits on a mat.", "An animal is on a mat."};
  ExplanationSet expl{"i", {{"a", NliLabel::Entailment, "cats are animals"},
                            {"b", NliLabel::Neutral, "the mat may be elsewhere"},
                            {"c", NliLabel::Entailment, "sitting means on"},
                            {"d", NliLabel::Contradiction, "it could be standing"}}};
  for (PromptType type : kAllPromptTypes) {
    EstimationConfig config;
    config.prompt_type = type;
    config.mode = uses_explanations(type) ? ExplanationMode::Parallel : ExplanationMode::None;
    auto pos = MockBackend::position_biased({7.0, 2.0, 1.0});
    const auto tp = estimate_mjd(item, uses_explanations(type) ? &expl : nullptr, config, *pos);
    for (double v : tp.mjd.probs()) {
      if (std::abs(v - 1.0 / 3.0) > kDebiasTol) {
        return fail("position-biased mock not uniform for " + std::string(to_string(type)));
      }
    }
  }
  auto lab = MockBackend::label_faithful({5.0, 3.0, 2.0});
  const auto tl = estimate_mjd(item, nullptr, EstimationConfig{}, *lab);
  const Probs want{0.5, 0.3, 0.2};
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::abs(tl.mjd.at(i) - want[i]) > kDebiasTol) return fail("label-faithful mock changed by mapping");
  }
  EstimationConfig serial;
  serial.prompt_type = PromptType::WithExplanations;
  serial.mode = ExplanationMode::Serial;
  auto s = MockBackend::position_biased({1, 2, 3});
  estimate_mjd(item, &expl, serial, *s);
  EstimationConfig parallel = serial;
  parallel.mode = ExplanationMode::Parallel;
  auto p = MockBackend::position_biased({1, 2, 3});
  estimate_mjd(item, &expl, parallel, *p);
  if (s->calls() != 6 * 24 || p->calls() != 6 * 4) {
    return fail("query counts serial " + std::to_string(s->calls()) + ", parallel " + std::to_string(p->calls()));
  }
  return pass("serial 144 queries, parallel 24 queries");
}

Outcome criterion_score_pairs() {
  const std::array<std::pair<Probs, Probs>, 3> pairs = {{
      {{5.906385898590088, 6.259021282196045, 43.25299835205078}, {0.106578055463, 0.1129412010, 0.78048074346}},
      {{4.2198514938, 20.7870941162, 39.63526535}, {0.065280123175, 0.32157152126, 0.61314835556}},
      {{11.1629428863, 35.1051597595, 21.4133796691}, {0.16493348704, 0.51868189878, 0.31638461417}},
  }};
  for (const auto& [scores, probs] : pairs) {
    OptionScores s;
    s.scores = scores;
    s.semantics = ScoreSemantics::RawLogit;
    const auto out = normalize_scores(s, NegativeScorePolicy::Error);
    for (std::size_t i = 0; i < 3; ++i) {
      if (std::abs(out.probs[i] - probs[i]) > kFourDecimals) return fail("mismatch " + fmt(out.probs[i], 6));
    }
  }
  return pass("3 pairs");
}

Outcome criterion_viz() {
  const double h = std::sqrt(3.0) / 2.0;
  const auto e = ternary_coords(one_hot(NliLabel::Entailment));
  const auto n = ternary_coords(one_hot(NliLabel::Neutral));
  const auto c = ternary_coords(one_hot(NliLabel::Contradiction));
  const auto m = ternary_coords(JudgmentDistribution::from_probs({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  if (e.x != 0 || e.y != 0 || n.x != 1 || n.y != 0 || c.x != 0.5 || c.y != h) return fail("corner projection");
  if (std::abs(m.x - 0.5) > 1e-15 || std::abs(m.y - h / 3) > 1e-15) return fail("centroid projection");

  std::mt19937_64 rng(5);
  std::vector<LabeledPoint> points;
  for (int i = 0; i < static_cast<int>(kOverlapSize); ++i) {
    const auto d = testing::random_distribution(rng, i % 4 == 0);
    if (!(zoom(d, 1.0).distribution == d)) return fail("zoom scale 1 is not the identity");
    points.push_back({"id" + std::to_string(i), ternary_coords(d), "model"});
  }
  const auto svg = render_scatter(points, PlotSpec{});
  if (svg != render_scatter(points, PlotSpec{})) return fail("rendering not byte-stable");
  std::size_t circles = 0;
  for (auto pos = svg.find("class=\"pt\""); pos != std::string::npos; pos = svg.find("class=\"pt\"", pos + 1)) {
    ++circles;
  }
  if (circles != kOverlapSize) return fail(std::to_string(circles) + " point circles");

  const fs::path golden = fs::path(HLV_FIXTURE_DIR) / "golden";
  const std::pair<const char*, std::string> figures[] = {
      {"scatter.svg", render_scatter(testing::golden_points(), testing::golden_spec("golden scatter"))},
      {"errors.svg", render_error_plot(testing::golden_pairs(), testing::golden_spec("golden errors"))}};
  for (const auto& [name, rendered] : figures) {
    if (!fs::exists(golden / name) || testing::read_text(golden / name) != rendered) {
      return fail(std::string("golden figure differs: ") + name);
    }
  }
  return pass("corners, centroid, identity zoom, 341 circles, golden figures");
}

Outcome criterion_replay() {
  const fs::path fixture = fs::path(HLV_FIXTURE_DIR) / "replay";
  const std::string expected = testing::read_text(fixture / "expected_mjd.jsonl");
  for (int round = 0; round < 2; ++round) {
    testing::TempDir dir;
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run({"hlvest", "estimate", "--dataset", (fixture / "items.jsonl").string(), "--backend",
                               "replay", "--model", "fixture-model", "--cache", (fixture / "cache.jsonl").string(),
                               "--out", dir.path.string()},
                              out, err);
    if (code != 0) return fail("replay exited " + std::to_string(code) + ": " + err.str());
    std::string produced;
    for (const auto& entry : fs::directory_iterator(dir.path)) {
      if (entry.path().filename().string().rfind("mjd-", 0) == 0) produced = testing::read_text(entry.path());
    }
    if (produced != expected) return fail("replayed MJD differs from the checked-in file");
  }
  return pass("3 items, identical across 2 runs");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "baseline KL/JSD/TVD on the 341-item overlap", criterion_baselines},
      {2, "KL ordering stable across smoothing epsilon", criterion_kl_ordering},
      {3, "distance correlation of baselines on real data", criterion_dcor_data},
      {4, "distance correlation matches independent oracle", criterion_dcor_oracle},
      {5, "metric property suite", criterion_metric_properties},
      {6, "debiasing identities and query counts", criterion_debiasing},
      {7, "score-to-probability pairs via normalization", criterion_score_pairs},
      {8, "ternary projection, zoom and figure output", criterion_viz},
      {9, "replay of checked-in cache", criterion_replay},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: hlv_acceptance [--only N]\n";
      return 2;
    }
  }
  int failed = 0;
  int skipped = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << tag << "  " << c.id << "  " << c.name;
    if (!o.detail.empty()) std::cout << "  (" << o.detail << ")";
    std::cout << '\n';
    if (o.status == Status::Fail) ++failed;
    if (o.status == Status::Skip) ++skipped;
  }
  if (ran == 0) {
    std::cerr << "no criterion " << only << '\n';
    return 2;
  }
  if (failed > 0) return 1;
  if (only != 0 && skipped > 0) return 77;
  return 0;
}
