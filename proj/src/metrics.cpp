#include "hlv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "hlv/error.hpp"
#include "hlv/io.hpp"

namespace hlv {

using nlohmann::json;

std::string_view to_string(LogBase b) noexcept { return b == LogBase::Natural ? "e" : "2"; }

LogBase parse_log_base(std::string_view name) {
  if (name == "e" || name == "natural") return LogBase::Natural;
  if (name == "2") return LogBase::Two;
  throw UsageError("unknown log base '" + std::string(name) + "' (expected e or 2)");
}

void SmoothingConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 0.1)) throw UsageError("smoothing epsilon must be in (0, 0.1)");
}

json SmoothingConfig::to_json() const {
  return {{"epsilon", epsilon},
          {"applied_to", applied_to == SmoothingTarget::QOnly ? "q" : "both"},
          {"renormalize", renormalize}};
}

json MetricConfig::to_json() const {
  return {{"smoothing", smoothing.to_json()},
          {"kl_log_base", std::string(to_string(kl_base))},
          {"jsd_log_base", std::string(to_string(jsd_base))}};
}

std::string MetricConfig::digest() const { return short_digest(to_json().dump()); }

Probs smooth(const Probs& p, const SmoothingConfig& smoothing) {
  Probs out{};
  const double denom = smoothing.renormalize ? 1.0 + 3.0 * smoothing.epsilon : 1.0;
  for (std::size_t i = 0; i < 3; ++i) out[i] = (p[i] + smoothing.epsilon) / denom;
  return out;
}

namespace {

double log_in(double x, LogBase base) {
  return base == LogBase::Natural ? std::log(x) : std::log2(x);
}

double kl_raw(const Probs& p, const Probs& q, LogBase base) {
  double d = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (p[i] > 0.0) d += p[i] * (log_in(p[i], base) - log_in(q[i], base));
  }
  return std::max(0.0, d);
}

}  // namespace

double kl(const JudgmentDistribution& p, const JudgmentDistribution& q,
          const SmoothingConfig& smoothing, LogBase base) {
  smoothing.validate();
  const Probs ps =
      smoothing.applied_to == SmoothingTarget::Both ? smooth(p.probs(), smoothing) : p.probs();
  return kl_raw(ps, smooth(q.probs(), smoothing), base);
}

double jsd(const JudgmentDistribution& p, const JudgmentDistribution& q, LogBase base) {
  Probs m{};
  for (std::size_t i = 0; i < 3; ++i) m[i] = 0.5 * (p.at(i) + q.at(i));
  const double div = 0.5 * (kl_raw(p.probs(), m, base) + kl_raw(q.probs(), m, base));
  return std::sqrt(std::max(0.0, div));
}

double tvd(const JudgmentDistribution& p, const JudgmentDistribution& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += std::abs(p.at(i) - q.at(i));
  return 0.5 * s;
}

double entropy(const JudgmentDistribution& p, LogBase base) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * log_in(v, base);
  }
  return h;
}

double soft_cross_entropy(const JudgmentDistribution& p, const JudgmentDistribution& q,
                          const SmoothingConfig& smoothing, LogBase base) {
  smoothing.validate();
  const Probs ps =
      smoothing.applied_to == SmoothingTarget::Both ? smooth(p.probs(), smoothing) : p.probs();
  const Probs qs = smooth(q.probs(), smoothing);
  double ce = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (ps[i] > 0.0) ce -= ps[i] * log_in(qs[i], base);
  }
  return ce;
}

std::vector<Probs> DistributionMatrix::points() const {
  std::vector<Probs> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.probs());
  return out;
}

DistributionMatrix DistributionMatrix::from_table(
    const std::map<std::string, JudgmentDistribution>& table) {
  DistributionMatrix m;
  for (const auto& [id, d] : table) {
    m.ids.push_back(id);
    m.rows.push_back(d);
  }
  return m;
}

std::pair<DistributionMatrix, DistributionMatrix> align_tables(
    const std::map<std::string, JudgmentDistribution>& hjd,
    const std::map<std::string, JudgmentDistribution>& mjd) {
  DistributionMatrix h;
  DistributionMatrix m;
  std::vector<std::string> missing;
  for (const auto& [id, d] : mjd) {
    auto it = hjd.find(id);
    if (it == hjd.end()) {
      missing.push_back(id);
      continue;
    }
    h.ids.push_back(id);
    h.rows.push_back(it->second);
    m.ids.push_back(id);
    m.rows.push_back(d);
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << missing.size() << " id(s) missing from the reference table:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) {
      os << ' ' << missing[i];
    }
    if (missing.size() > 20) os << " ...";
    throw DataError(os.str());
  }
  return {std::move(h), std::move(m)};
}

namespace {

constexpr std::size_t kBlockRows = 32;

double euclid(const Probs& a, const Probs& b) {
  const double d0 = a[0] - b[0];
  const double d1 = a[1] - b[1];
  const double d2 = a[2] - b[2];
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

/// Runs fn(block) for every fixed-size row block. The block layout does not
/// depend on the thread count, so per-block partials reduce deterministically.
template <class Fn>
void for_each_block(std::size_t n, Fn fn) {
  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  const std::size_t threads =
      std::min<std::size_t>(blocks, std::max(1u, std::thread::hardware_concurrency()));
  if (threads <= 1 || n < 256) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t b = t; b < blocks; b += threads) fn(b);
    });
  }
}

}  // namespace

double distance_correlation(std::span<const Probs> x, std::span<const Probs> y) {
  const std::size_t n = x.size();
  if (n != y.size()) {
    throw DataError("distance correlation needs equal row counts (" + std::to_string(n) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  if (n < 2) throw DataError("distance correlation needs at least two rows");

  std::vector<double> row_x(n, 0.0);
  std::vector<double> row_y(n, 0.0);
  for_each_block(n, [&](std::size_t b) {
    for (std::size_t i = b * kBlockRows; i < std::min(n, (b + 1) * kBlockRows); ++i) {
      double sx = 0.0;
      double sy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sx += euclid(x[i], x[j]);
        sy += euclid(y[i], y[j]);
      }
      row_x[i] = sx / static_cast<double>(n);
      row_y[i] = sy / static_cast<double>(n);
    }
  });
  double grand_x = 0.0;
  double grand_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grand_x += row_x[i];
    grand_y += row_y[i];
  }
  grand_x /= static_cast<double>(n);
  grand_y /= static_cast<double>(n);

  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  std::vector<std::array<double, 3>> partial(blocks, {0.0, 0.0, 0.0});
  for_each_block(n, [&](std::size_t b) {
    auto& acc = partial[b];
    for (std::size_t i = b * kBlockRows; i < std::min(n, (b + 1) * kBlockRows); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = euclid(x[i], x[j]) - row_x[i] - row_x[j] + grand_x;
        const double c = euclid(y[i], y[j]) - row_y[i] - row_y[j] + grand_y;
        acc[0] += a * c;
        acc[1] += a * a;
        acc[2] += c * c;
      }
    }
  });
  double cov = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  for (const auto& acc : partial) {
    cov += acc[0];
    var_x += acc[1];
    var_y += acc[2];
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  cov /= nn;
  var_x /= nn;
  var_y /= nn;
  if (!(var_x > 0.0) || !(var_y > 0.0)) return 0.0;
  const double dcor2 = cov / std::sqrt(var_x * var_y);
  return std::sqrt(std::clamp(dcor2, 0.0, 1.0));
}

double distance_correlation(const DistributionMatrix& x, const DistributionMatrix& y) {
  if (x.ids != y.ids) throw DataError("distance correlation needs matrices with the same row ids");
  const auto px = x.points();
  const auto py = y.points();
  return distance_correlation(px, py);
}

ClassificationScores classification_scores(const std::map<std::string, NliLabel>& predictions,
                                           const std::map<std::string, NliLabel>& golds) {
  if (golds.empty()) throw DataError("classification scores need at least one item");
  if (predictions.size() != golds.size()) {
    throw DataError("prediction and gold id sets differ in size");
  }
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][pred]
  for (const auto& [id, gold] : golds) {
    auto it = predictions.find(id);
    if (it == predictions.end()) throw DataError("no prediction for id '" + id + "'");
    ++confusion[index_of(gold)][index_of(it->second)];
  }
  ClassificationScores out;
  std::size_t correct = 0;
  const double n = static_cast<double>(golds.size());
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t tp = confusion[c][c];
    std::size_t pred_c = 0;
    std::size_t gold_c = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      pred_c += confusion[k][c];
      gold_c += confusion[c][k];
    }
    correct += tp;
    out.support[c] = gold_c;
    const double precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    const double recall = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    out.per_class_f1[c] =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out.weighted_f1 += static_cast<double>(gold_c) / n * out.per_class_f1[c];
    out.macro_f1 += out.per_class_f1[c] / 3.0;
  }
  out.accuracy = static_cast<double>(correct) / n;
  return out;
}

std::vector<PairwiseError> pairwise_errors(const DistributionMatrix& hjd,
                                           const DistributionMatrix& mjd) {
  if (hjd.ids != mjd.ids) throw DataError("pairwise errors need matrices with the same row ids");
  std::vector<PairwiseError> out;
  out.reserve(hjd.size());
  for (std::size_t i = 0; i < hjd.size(); ++i) {
    PairwiseError e;
    e.id = hjd.ids[i];
    double sq = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      e.abs_diff[k] = std::abs(hjd.rows[i].at(k) - mjd.rows[i].at(k));
      sq += e.abs_diff[k] * e.abs_diff[k];
    }
    e.norm = std::sqrt(sq);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

MetricReport dataset_report(const DistributionMatrix& hjd, const DistributionMatrix& mjd,
                            const MetricConfig& config, bool classify) {
  if (hjd.size() == 0) throw DataError("cannot report on an empty pairing");
  if (hjd.ids != mjd.ids) throw DataError("report needs matrices with the same row ids");
  config.smoothing.validate();

  MetricReport r;
  r.config = config;
  double sum_kl = 0.0;
  double sum_jsd = 0.0;
  double sum_tvd = 0.0;
  for (std::size_t i = 0; i < hjd.size(); ++i) {
    InstanceMetrics m{hjd.ids[i], kl(hjd.rows[i], mjd.rows[i], config.smoothing, config.kl_base),
                      jsd(hjd.rows[i], mjd.rows[i], config.jsd_base), tvd(hjd.rows[i], mjd.rows[i])};
    sum_kl += m.kl;
    sum_jsd += m.jsd;
    sum_tvd += m.tvd;
    r.per_instance.push_back(std::move(m));
  }
  const double n = static_cast<double>(hjd.size());
  r.mean_kl = sum_kl / n;
  r.mean_jsd = sum_jsd / n;
  r.mean_tvd = sum_tvd / n;
  r.distance_correlation = hjd.size() >= 2 ? distance_correlation(hjd, mjd) : 0.0;

  if (classify) {
    ClassificationBlock block;
    std::map<std::string, NliLabel> preds;
    std::map<std::string, NliLabel> golds;
    double ce = 0.0;
    for (std::size_t i = 0; i < hjd.size(); ++i) {
      const auto g = argmax(hjd.rows[i]);
      const auto p = argmax(mjd.rows[i]);
      block.argmax_ties += static_cast<std::size_t>(g.tie) + static_cast<std::size_t>(p.tie);
      golds[hjd.ids[i]] = g.label;
      preds[hjd.ids[i]] = p.label;
      ce += soft_cross_entropy(hjd.rows[i], mjd.rows[i], config.smoothing, config.kl_base);
    }
    block.scores = classification_scores(preds, golds);
    block.soft_cross_entropy = ce / n;
    r.classification = block;
  }
  return r;
}

json MetricReport::to_json() const {
  json rows = json::array();
  for (const auto& m : per_instance) {
    rows.push_back({{"id", m.id}, {"kl", m.kl}, {"jsd", m.jsd}, {"tvd", m.tvd}});
  }
  json j = {{"n", per_instance.size()},
            {"means", {{"kl", mean_kl}, {"jsd", mean_jsd}, {"tvd", mean_tvd}}},
            {"distance_correlation", distance_correlation},
            {"config", config.to_json()},
            {"config_digest", config.digest()},
            {"per_instance", std::move(rows)}};
  j["split_seed"] = split_seed ? json(*split_seed) : json(nullptr);
  if (classification) {
    const auto& c = *classification;
    j["classification"] = {{"accuracy", c.scores.accuracy},
                           {"weighted_f1", c.scores.weighted_f1},
                           {"macro_f1", c.scores.macro_f1},
                           {"per_class_f1", c.scores.per_class_f1},
                           {"soft_cross_entropy", c.soft_cross_entropy},
                           {"argmax_ties", c.argmax_ties}};
  } else {
    j["classification"] = nullptr;
  }
  json in = json::object();
  for (const auto& [role, pd] : inputs) in[role] = {{"path", pd.first}, {"sha256", pd.second}};
  j["inputs"] = std::move(in);
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "# config_digest=" << config.digest() << '\n';
  for (const auto& [role, pd] : inputs) os << "# " << role << "_sha256=" << pd.second << '\n';
  os << "id,kl,jsd,tvd\n";
  os << std::setprecision(17);
  for (const auto& m : per_instance) {
    os << m.id << ',' << m.kl << ',' << m.jsd << ',' << m.tvd << '\n';
  }
  return os.str();
}

}  // namespace hlv
