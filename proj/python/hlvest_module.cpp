#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hlv/cli.hpp"
#include "hlv/estimator.hpp"
#include "hlv/metrics.hpp"
#include "hlv/viz.hpp"

namespace py = pybind11;
using namespace hlv;

namespace {

JudgmentDistribution dist(const Probs& p) { return JudgmentDistribution::from_probs(p); }

SmoothingConfig smoothing(double epsilon, bool smooth_both, bool renormalize) {
  SmoothingConfig s;
  s.epsilon = epsilon;
  s.applied_to = smooth_both ? SmoothingTarget::Both : SmoothingTarget::QOnly;
  s.renormalize = renormalize;
  return s;
}

OptionScores option_scores(const std::array<double, 3>& scores, const std::string& semantics) {
  OptionScores s;
  s.scores = scores;
  if (semantics == "raw-logit") {
    s.semantics = ScoreSemantics::RawLogit;
  } else if (semantics == "log-probability") {
    s.semantics = ScoreSemantics::LogProbability;
  } else {
    throw UsageError("semantics must be raw-logit or log-probability");
  }
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Judgment-distribution metrics, score transforms and the hlvest command line";

  py::register_exception<Error>(m, "HlvError", PyExc_ValueError);

  m.def("kl",
        [](const Probs& p, const Probs& q, double epsilon, bool smooth_both, bool renormalize, const std::string& base) {
          return kl(dist(p), dist(q), smoothing(epsilon, smooth_both, renormalize), parse_log_base(base));
        },
        py::arg("p"), py::arg("q"), py::arg("epsilon") = 1e-4, py::arg("smooth_both") = false,
        py::arg("renormalize") = true, py::arg("base") = "e");
  m.def("jsd", [](const Probs& p, const Probs& q, const std::string& base) {
    return jsd(dist(p), dist(q), parse_log_base(base));
  }, py::arg("p"), py::arg("q"), py::arg("base") = "2");
  m.def("tvd", [](const Probs& p, const Probs& q) { return tvd(dist(p), dist(q)); }, py::arg("p"), py::arg("q"));
  m.def("entropy", [](const Probs& p, const std::string& base) { return entropy(dist(p), parse_log_base(base)); },
        py::arg("p"), py::arg("base") = "e");
  m.def("soft_cross_entropy",
        [](const Probs& p, const Probs& q, double epsilon, bool smooth_both, const std::string& base) {
          return soft_cross_entropy(dist(p), dist(q), smoothing(epsilon, smooth_both, true), parse_log_base(base));
        },
        py::arg("p"), py::arg("q"), py::arg("epsilon") = 1e-4, py::arg("smooth_both") = false,
        py::arg("base") = "e");
  m.def("distance_correlation",
        [](const std::vector<Probs>& x, const std::vector<Probs>& y) { return distance_correlation(x, y); },
        py::arg("x"), py::arg("y"));

  m.def("normalize_scores",
        [](const std::array<double, 3>& scores, const std::string& semantics, const std::string& negative_policy) {
          return normalize_scores(option_scores(scores, semantics), parse_negative_policy(negative_policy)).probs;
        },
        py::arg("scores"), py::arg("semantics") = "raw-logit", py::arg("negative_policy") = "clamp-epsilon");
  m.def("softmax_scores",
        [](const std::array<double, 3>& scores, double tau) {
          return softmax_scores(option_scores(scores, "raw-logit"), tau);
        },
        py::arg("scores"), py::arg("tau") = kDefaultTemperature);
  m.def("option_mappings", [] {
    std::vector<std::string> codes;
    for (const auto& mapping : option_mappings()) codes.push_back(mapping.code());
    return codes;
  });

  m.def("ternary_coords", [](const Probs& p) {
    const auto t = ternary_coords(dist(p));
    return std::make_pair(t.x, t.y);
  }, py::arg("p"));
  m.def("zoom", [](const Probs& p, double scale) {
    const auto z = zoom(dist(p), scale);
    return std::make_pair(z.distribution.probs(), z.clipped);
  }, py::arg("p"), py::arg("scale"));

  m.def("check_finetune_metrics",
        [](const std::string& text) {
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(text);
          } catch (const nlohmann::json::exception& e) {
            throw DataError(e.what());
          }
          return cli::FinetuneMetrics::from_json(j).to_json().dump();
        },
        py::arg("text"), "Validates fine-tuning metrics JSON and returns its canonical form.");

  m.def("run",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "hlvest");
          std::ostringstream out;
          std::ostringstream err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line; returns (exit code, stdout, stderr).");
}
