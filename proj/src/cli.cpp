#include "hlv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "hlv/backend.hpp"
#include "hlv/estimator.hpp"
#include "hlv/io.hpp"
#include "hlv/metrics.hpp"
#include "hlv/prompting.hpp"
#include "hlv/viz.hpp"

namespace hlv::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Config:
      return kExitUsage;
    case ErrorKind::Data:
      return kExitData;
    case ErrorKind::Backend:
      return kExitBackend;
  }
  return kExitData;
}

std::string_view to_string(TableFormat f) noexcept {
  switch (f) {
    case TableFormat::Mjd:
      return "mjd";
    case TableFormat::SoftLabels:
      return "softlabels";
    case TableFormat::ChaosNli:
      return "chaos-nli";
    case TableFormat::VariErr:
      return "varierr";
    case TableFormat::Canonical:
      return "canonical";
  }
  return "canonical";
}

namespace {

json first_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      return json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  throw DataError("'" + path.string() + "' holds no records");
}

DatasetFormat dataset_format_of(TableFormat f) {
  switch (f) {
    case TableFormat::ChaosNli:
      return DatasetFormat::ChaosNli;
    case TableFormat::VariErr:
      return DatasetFormat::VariErr;
    case TableFormat::Canonical:
      return DatasetFormat::Canonical;
    default:
      throw UsageError(std::string("'") + std::string(to_string(f)) + "' is not a dataset format");
  }
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string absolute_string(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

template <typename Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw DataError(where + ": field 'id': missing or not a string");
    }
    fn(rec, where);
  }
}

JudgmentDistribution read_vector(const json& v, const std::string& where, const char* field) {
  if (!v.is_array() || v.size() != 3) throw DataError(where + ": field '" + field + "': expected 3 numbers");
  Probs p{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw DataError(where + ": field '" + field + "': expected 3 numbers");
    p[i] = v[i].get<double>();
  }
  try {
    return JudgmentDistribution::from_probs(p);
  } catch (const DataError& e) {
    throw DataError(where + ": field '" + field + "': " + e.what());
  }
}

std::set<std::string> id_set(const fs::path& path) {
  const auto fmt = detect_table_format(path);
  std::set<std::string> ids;
  if (fmt == TableFormat::Mjd) {
    for (const auto& [id, d] : load_distribution_table(path, "mjd").rows) ids.insert(id);
  } else {
    for (const auto& item : load_items(path).items) ids.insert(item.id);
  }
  return ids;
}

template <typename Map>
void restrict_to(Map& rows, const std::set<std::string>& keep) {
  std::erase_if(rows, [&](const auto& kv) { return !keep.contains(kv.first); });
}

json input_entry(const std::string& path, const std::string& sha, std::string_view format = {},
                 std::string_view view = {}) {
  json j = {{"path", absolute_string(path)}, {"sha256", sha}};
  if (!format.empty()) j["format"] = std::string(format);
  if (!view.empty()) j["view"] = std::string(view);
  return j;
}

void write_resolved(const fs::path& output, const CLI::App& sub) {
  atomic_write(output.string() + ".resolved.toml", sub.config_to_str(true, false));
}

// Shared option groups -------------------------------------------------------

struct SmoothingFlags {
  double epsilon = 1e-4;
  std::string applied_to = "q";
  bool no_renormalize = false;
  std::string kl_base = "e";
  std::string jsd_base = "2";

  void add_to(CLI::App* sub) {
    sub->add_option("--epsilon", epsilon, "Smoothing added before KL and cross-entropy")
        ->capture_default_str();
    sub->add_option("--smooth", applied_to, "Smooth the MJD only (q) or both sides (both)")
        ->check(CLI::IsMember({"q", "both"}))
        ->capture_default_str();
    sub->add_flag("--no-renormalize", no_renormalize, "Skip renormalizing after smoothing");
    sub->add_option("--kl-base", kl_base, "Logarithm base for KL")
        ->check(CLI::IsMember({"e", "2"}))
        ->capture_default_str();
    sub->add_option("--jsd-base", jsd_base, "Logarithm base for JSD")
        ->check(CLI::IsMember({"e", "2"}))
        ->capture_default_str();
  }

  MetricConfig config() const {
    MetricConfig c;
    c.smoothing.epsilon = epsilon;
    c.smoothing.applied_to = applied_to == "both" ? SmoothingTarget::Both : SmoothingTarget::QOnly;
    c.smoothing.renormalize = !no_renormalize;
    c.smoothing.validate();
    c.kl_base = parse_log_base(kl_base);
    c.jsd_base = parse_log_base(jsd_base);
    return c;
  }
};

struct TableFlags {
  std::string path;
  std::string format = "auto";
  std::string view = "default";

  void add_to(CLI::App* sub, const std::string& name, const std::string& what, bool required) {
    auto* opt = sub->add_option("--" + name, path, what);
    if (required) opt->required();
    sub->add_option("--" + name + "-format", format,
                    "auto, mjd, softlabels, chaos-nli, varierr or canonical")
        ->capture_default_str();
    sub->add_option("--" + name + "-view", view,
                    "default, mnli-single or mnli-dist (ChaosNLI files)")
        ->capture_default_str();
  }
};

// estimate -------------------------------------------------------------------

struct EstimateOptions {
  TableFlags dataset;
  TableFlags hjd;
  std::size_t explanations = 4;
  std::vector<std::string> prompt_types{"without-explanations"};
  std::vector<std::string> modes{"serial"};
  std::size_t k = 2;
  std::vector<std::string> transforms{"normalize"};
  std::vector<double> taus{kDefaultTemperature};
  std::string negative_policy = "clamp-epsilon";
  std::vector<std::string> mappings;
  std::string template_version{kDefaultTemplateVersion};
  std::string backend = "http";
  std::vector<double> mock_scores{3.0, 2.0, 1.0};
  BackendConfig remote;
  std::string wire = "chat-logprobs";
  bool no_floor = false;
  std::string cache;
  int workers = 0;
  std::string out = "runs";
};

std::vector<EstimationConfig> build_grid(const EstimateOptions& o) {
  std::vector<std::size_t> mapping_indices;
  const auto all = option_mappings();
  for (const auto& code : o.mappings) {
    if (code.empty()) continue;
    const auto m = OptionMapping::from_code(code);
    const auto it = std::find(all.begin(), all.end(), m);
    mapping_indices.push_back(static_cast<std::size_t>(it - all.begin()));
  }
  std::vector<EstimationConfig> cells;
  std::set<std::string> seen;
  for (const auto& pt_name : o.prompt_types) {
    const auto pt = parse_prompt_type(pt_name);
    for (const auto& mode_name : o.modes) {
      auto mode = parse_explanation_mode(mode_name);
      if (!uses_explanations(pt)) mode = ExplanationMode::None;
      if (uses_explanations(pt) && mode == ExplanationMode::None) continue;
      for (const auto& tr_name : o.transforms) {
        const auto method = parse_transform_method(tr_name);
        const std::vector<double> taus =
            method == TransformMethod::Softmax ? o.taus : std::vector<double>{kDefaultTemperature};
        for (double tau : taus) {
          EstimationConfig c;
          c.prompt_type = pt;
          c.mode = mode;
          c.k = mode == ExplanationMode::KAtATime ? o.k : 0;
          c.transform.method = method;
          c.transform.temperature = tau;
          c.transform.negative_policy = parse_negative_policy(o.negative_policy);
          c.mapping_indices = mapping_indices;
          c.template_version = o.template_version;
          c.validate();
          if (seen.insert(c.digest()).second) cells.push_back(std::move(c));
        }
      }
    }
  }
  if (cells.empty()) throw UsageError("the estimation grid is empty");
  return cells;
}

std::array<double, 3> three_scores(const std::vector<double>& v) {
  if (v.size() != 3) throw UsageError("--mock-scores takes exactly three numbers");
  return {v[0], v[1], v[2]};
}

int cmd_estimate(EstimateOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const auto grid = build_grid(o);

  const auto dataset_fmt = parse_table_format(o.dataset.format, o.dataset.path);
  const LabeledDataset dataset = load_items(o.dataset.path, std::string(to_string(dataset_fmt)), o.dataset.view);
  const std::string dataset_sha = file_digest(o.dataset.path);
  json inputs = {{"dataset", input_entry(o.dataset.path, dataset_sha, to_string(dataset_fmt), o.dataset.view)}};
  json digests = {{"dataset", dataset_sha}};

  std::vector<EstimationInput> items;
  if (!o.hjd.path.empty()) {
    const auto hjd_fmt = parse_table_format(o.hjd.format, o.hjd.path);
    const LabeledDataset hjd = load_items(o.hjd.path, std::string(to_string(hjd_fmt)), o.hjd.view);
    const std::string hjd_sha = file_digest(o.hjd.path);
    inputs["hjd"] = input_entry(o.hjd.path, hjd_sha, to_string(hjd_fmt), o.hjd.view);
    digests["hjd"] = hjd_sha;
    const ExplanationFilter filter = o.explanations > 0 ? explanation_count_is(o.explanations) : ExplanationFilter{};
    items = estimation_inputs(align_datasets(dataset, hjd, filter));
  } else {
    items = estimation_inputs(dataset);
    // Without a second dataset the count filter only matters for prompts
    // that show explanations.
    const bool any_explanations = std::any_of(grid.begin(), grid.end(), [](const EstimationConfig& c) {
      return uses_explanations(c.prompt_type);
    });
    if (any_explanations && o.explanations > 0) {
      std::erase_if(items, [&](const EstimationInput& in) {
        return !in.explanations || in.explanations->size() != o.explanations;
      });
    }
  }
  if (items.empty()) {
    throw DataError("no items to estimate after alignment and the explanation-count filter (--explanations " +
                    std::to_string(o.explanations) + ")");
  }

  std::unique_ptr<Backend> backend;
  ChatCompletionBackend* remote = nullptr;
  json backend_info = {{"kind", o.backend}};
  if (o.backend == "mock-position") {
    backend = MockBackend::position_biased(three_scores(o.mock_scores));
    backend_info["scores"] = o.mock_scores;
  } else if (o.backend == "mock-label") {
    backend = MockBackend::label_faithful(three_scores(o.mock_scores));
    backend_info["scores"] = o.mock_scores;
  } else {
    BackendConfig cfg = o.remote;
    cfg.wire = parse_wire_format(o.wire);
    cfg.allow_floor = !o.no_floor;
    if (cfg.model.empty()) throw UsageError("--model is required for the " + o.backend + " backend");
    cfg.validate();
    std::shared_ptr<ResponseCache> cache;
    if (!o.cache.empty()) cache = std::make_shared<ResponseCache>(o.cache);
    const bool offline = o.backend == "replay";
    if (offline && !cache) throw UsageError("the replay backend needs --cache");
    std::shared_ptr<Transport> transport;
    if (!offline) transport = std::make_shared<HttpTransport>(cfg);
    auto chat = std::make_unique<ChatCompletionBackend>(cfg, transport, cache, offline);
    remote = chat.get();
    backend = std::move(chat);
    backend_info["output_digest"] = cfg.output_digest();
  }
  backend_info["identifier"] = backend->identifier();
  // Endpoint and replay/live are not part of what identifies the outputs.
  backend_info.erase("kind");
  if (o.backend == "mock-position" || o.backend == "mock-label") backend_info["kind"] = o.backend;

  const fs::path out_dir = o.out;
  fs::create_directories(out_dir);
  const fs::path manifest_path = out_dir / "manifest.json";
  json manifest = {{"inputs", inputs}, {"backend", backend_info}, {"cells", json::array()}};
  if (fs::exists(manifest_path)) {
    json existing;
    try {
      existing = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
      throw DataError(manifest_path.string() + ": " + e.what());
    }
    auto same_inputs = [&] {
      if (!existing.contains("inputs") || existing["backend"] != backend_info) return false;
      for (const auto& [role, entry] : inputs.items()) {
        if (!existing["inputs"].contains(role) || existing["inputs"][role]["sha256"] != entry["sha256"]) {
          return false;
        }
      }
      return existing["inputs"].size() == inputs.size();
    };
    if (!same_inputs()) {
      throw DataError(manifest_path.string() +
                      " was written for different inputs or a different backend; use another --out");
    }
    manifest["cells"] = existing.value("cells", json::array());
  }

  const int workers = o.workers > 0 ? o.workers : std::max(1, o.remote.max_in_flight);
  std::size_t total_ok = 0;
  std::size_t total_failed = 0;
  std::optional<ErrorKind> first_failure_kind;
  const std::string resolved = sub.config_to_str(true, false);
  json provenance = digests;
  provenance["backend"] = backend->identifier();

  for (const auto& cell : grid) {
    const std::string digest = cell.digest();
    const auto est = estimate_dataset(items, cell, *backend, workers);
    total_ok += est.traces.size();
    total_failed += est.failures.size();
    if (!est.failures.empty() && !first_failure_kind) first_failure_kind = est.failures.front().kind;

    std::string label = std::string(to_string(cell.prompt_type)) + "/" + std::string(to_string(cell.mode)) +
                        "/" + std::string(to_string(cell.transform.method));
    if (cell.transform.method == TransformMethod::Softmax) label += "/tau=" + fixed(cell.transform.temperature, 1);

    for (std::size_t i = 0; i < est.failures.size() && i < 20; ++i) {
      err << "  " << digest << " " << est.failures[i].item_id << ": " << est.failures[i].message << '\n';
    }
    if (est.failures.size() > 20) err << "  ... and " << est.failures.size() - 20 << " more\n";

    if (est.traces.empty()) {
      err << "cell " << digest << " (" << label << "): every item failed; nothing written\n";
      continue;
    }

    const std::string mjd_name = "mjd-" + digest + ".jsonl";
    const std::string trace_name = "trace-" + digest + ".jsonl";
    const std::string config_name = "config-" + digest + ".json";
    const std::string mjd_text = mjd_jsonl(est, digest, provenance);
    const std::string trace_text = trace_jsonl(est, digest);
    const json config_doc = {{"config_digest", digest},
                             {"estimation", cell.to_json()},
                             {"backend", backend_info},
                             {"inputs", inputs},
                             {"resolved_options", resolved}};
    atomic_write(out_dir / mjd_name, mjd_text);
    atomic_write(out_dir / trace_name, trace_text);
    atomic_write(out_dir / config_name, config_doc.dump(2) + "\n");

    json entry = {{"config_digest", digest},
                  {"config", cell.to_json()},
                  {"mjd_file", mjd_name},
                  {"mjd_sha256", sha256_hex(mjd_text)},
                  {"trace_file", trace_name},
                  {"trace_sha256", sha256_hex(trace_text)},
                  {"config_file", config_name},
                  {"items", est.traces.size()},
                  {"failures", est.failures.size()}};
    auto& cells = manifest["cells"];
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const json& c) { return c.value("config_digest", "") == digest; });
    if (it != cells.end()) {
      *it = entry;
    } else {
      cells.push_back(entry);
    }
    out << "cell " << digest << " (" << label << "): " << est.traces.size() << " items, "
        << est.failures.size() << " failures -> " << (out_dir / mjd_name).string() << '\n';
  }

  std::sort(manifest["cells"].begin(), manifest["cells"].end(),
            [](const json& a, const json& b) { return a["config_digest"] < b["config_digest"]; });
  if (!manifest["cells"].empty()) atomic_write(manifest_path, manifest.dump(2) + "\n");

  if (remote) {
    const auto s = remote->stats();
    out << "backend: " << s.network_calls << " network calls, " << s.cache_hits << " cache hits, "
        << s.retries << " retries\n";
  }
  if (total_failed == 0) return kExitOk;
  if (total_ok == 0) return exit_code_for(first_failure_kind.value_or(ErrorKind::Backend));
  return kExitPartial;
}

// compare --------------------------------------------------------------------

struct CompareOptions {
  TableFlags hjd;
  TableFlags mjd;
  bool uniform = false;
  std::string restrict_path;
  SmoothingFlags smoothing;
  bool classify = false;
  std::optional<std::uint64_t> split_seed;
  std::string out = "reports";
};

std::string report_row(const MetricReport& r) {
  return "n=" + std::to_string(r.per_instance.size()) + "  KL " + fixed(r.mean_kl) + "  JSD " +
         fixed(r.mean_jsd) + "  TVD " + fixed(r.mean_tvd) + "  D.Corr " + fixed(r.distance_correlation);
}

int cmd_compare(CompareOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  if (o.uniform == !o.mjd.path.empty()) throw UsageError("give exactly one of --mjd and --uniform");
  const MetricConfig metric_config = o.smoothing.config();
  auto hjd = load_distribution_table(o.hjd.path, o.hjd.format, o.hjd.view);

  std::map<std::string, std::pair<std::string, std::string>> inputs;
  inputs["hjd"] = {absolute_string(o.hjd.path), hjd.sha256};
  std::string mjd_sha = "uniform";
  std::map<std::string, JudgmentDistribution> mjd_rows;
  std::string restrict_sha;
  std::optional<std::set<std::string>> keep;
  if (!o.restrict_path.empty()) {
    keep = id_set(o.restrict_path);
    restrict_sha = file_digest(o.restrict_path);
    inputs["restrict"] = {absolute_string(o.restrict_path), restrict_sha};
  }
  if (o.uniform) {
    for (const auto& [id, d] : hjd.rows) {
      if (!keep || keep->contains(id)) mjd_rows.emplace(id, JudgmentDistribution::uniform());
    }
  } else {
    auto mjd = load_distribution_table(o.mjd.path, o.mjd.format, o.mjd.view);
    if (mjd.error_records > 0) {
      err << "warning: " << mjd.error_records << " failed records in " << o.mjd.path << " are skipped\n";
    }
    mjd_sha = mjd.sha256;
    inputs["mjd"] = {absolute_string(o.mjd.path), mjd.sha256};
    mjd_rows = std::move(mjd.rows);
    if (keep) restrict_to(mjd_rows, *keep);
  }
  if (mjd_rows.empty()) throw DataError("no items to compare");
  const auto [h, m] = align_tables(hjd.rows, mjd_rows);
  MetricReport report = dataset_report(h, m, metric_config, o.classify);
  report.split_seed = o.split_seed;
  report.inputs = inputs;

  const std::string stem = "compare-" + short_digest(hjd.sha256 + "\n" + mjd_sha + "\n" + restrict_sha + "\n" +
                                                     metric_config.digest() + (o.classify ? "\nclassify" : ""));
  const fs::path out_dir = o.out;
  json doc = report.to_json();
  doc["resolved_options"] = sub.config_to_str(true, false);
  atomic_write(out_dir / (stem + ".json"), doc.dump(2) + "\n");
  atomic_write(out_dir / (stem + ".csv"), report.to_csv());

  out << report_row(report) << '\n';
  if (report.classification) {
    const auto& c = *report.classification;
    out << "accuracy " << fixed(c.scores.accuracy) << "  weighted-F1 " << fixed(c.scores.weighted_f1)
        << "  macro-F1 " << fixed(c.scores.macro_f1) << "  CE " << fixed(c.soft_cross_entropy) << '\n';
  }
  out << "report: " << (out_dir / (stem + ".json")).string() << '\n';
  return kExitOk;
}

// plot -----------------------------------------------------------------------

struct PlotOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> labels;
  std::string format = "auto";
  std::string view = "default";
  std::string restrict_path;
  double zoom = 1.0;
  std::string title;
  double radius = 3.0;
  bool error_lines = false;
  std::string out;
  std::string csv;
};

int cmd_plot(PlotOptions& o, const CLI::App& sub, std::ostream& out, std::ostream&) {
  if (!o.labels.empty() && o.labels.size() != o.inputs.size()) {
    throw UsageError("--label must be given once per --input");
  }
  if (o.error_lines && o.inputs.size() != 2) throw UsageError("--error-lines needs exactly two inputs");
  PlotSpec spec;
  spec.title = o.title;
  spec.zoom_scale = o.zoom;
  spec.point_radius = o.radius;
  spec.validate();

  std::optional<std::set<std::string>> keep;
  if (!o.restrict_path.empty()) {
    keep = id_set(o.restrict_path);
    spec.provenance.push_back("restrict " + o.restrict_path + " sha256=" + file_digest(o.restrict_path));
  }
  std::vector<DistributionTable> tables;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    auto t = load_distribution_table(o.inputs[i], o.format, o.view);
    if (keep) restrict_to(t.rows, *keep);
    names.push_back(o.labels.empty() ? fs::path(o.inputs[i]).stem().string() : o.labels[i]);
    spec.provenance.push_back("input " + names.back() + " " + o.inputs[i] + " sha256=" + t.sha256);
    tables.push_back(std::move(t));
  }
  spec.provenance.push_back("zoom " + fixed(o.zoom, 4));

  std::vector<LabeledPoint> points;
  std::string svg;
  if (o.error_lines) {
    std::vector<ErrorPair> pairs;
    for (const auto& [id, from] : tables[0].rows) {
      const auto it = tables[1].rows.find(id);
      if (it == tables[1].rows.end()) continue;
      const auto zf = zoom(from, o.zoom);
      const auto zt = zoom(it->second, o.zoom);
      double d2 = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d2 += std::pow(from.at(k) - it->second.at(k), 2);
      pairs.push_back({id, ternary_coords(zf.distribution), ternary_coords(zt.distribution), std::sqrt(d2)});
      points.push_back({id, pairs.back().from, names[0], zf.clipped});
      points.push_back({id, pairs.back().to, names[1], zt.clipped});
    }
    if (pairs.empty()) throw DataError("the two inputs share no ids");
    svg = render_error_plot(pairs, spec);
    out << pairs.size() << " error segments";
  } else {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      for (const auto& [id, d] : tables[i].rows) {
        const auto z = zoom(d, o.zoom);
        points.push_back({id, ternary_coords(z.distribution), names[i], z.clipped});
      }
    }
    svg = render_scatter(points, spec);
    out << points.size() << " points";
  }
  atomic_write(o.out, svg);
  if (!o.csv.empty()) atomic_write(o.csv, points_csv(points));
  write_resolved(o.out, sub);
  const auto clipped = std::count_if(points.begin(), points.end(), [](const auto& p) { return p.clipped; });
  if (clipped > 0) out << " (" << clipped << " clipped by zoom)";
  out << " -> " << o.out << '\n';
  return kExitOk;
}

// export-softlabels ----------------------------------------------------------

struct ExportOptions {
  TableFlags labels;
  TableFlags items;
  std::string restrict_path;
  std::string out;
};

int cmd_export(ExportOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  auto labels = load_distribution_table(o.labels.path, o.labels.format, o.labels.view);
  if (labels.error_records > 0) {
    err << "warning: " << labels.error_records << " failed records in " << o.labels.path << " are skipped\n";
  }
  if (!o.restrict_path.empty()) restrict_to(labels.rows, id_set(o.restrict_path));
  const LabeledDataset items = load_items(o.items.path, o.items.format, o.items.view);
  const std::string items_sha = file_digest(o.items.path);

  std::vector<std::string> missing;
  std::string text;
  for (const auto& [id, d] : labels.rows) {
    const NliItem* item = items.find(id);
    if (!item) {
      missing.push_back(id);
      continue;
    }
    const auto& p = d.probs();
    const json rec = {{"id", id},
                      {"premise", item->premise},
                      {"hypothesis", item->hypothesis},
                      {"soft_label", {p[0], p[1], p[2]}},
                      {"source_digest", labels.sha256},
                      {"items_digest", items_sha}};
    text += rec.dump();
    text += '\n';
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " label ids have no item text:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    throw DataError(msg);
  }
  if (labels.rows.empty()) throw DataError("no labels to export");
  atomic_write(o.out, text);
  write_resolved(o.out, sub);
  out << labels.rows.size() << " records -> " << o.out << '\n';
  return kExitOk;
}

// report ---------------------------------------------------------------------

struct ReportOptions {
  std::string manifest;
  TableFlags hjd;
  std::string restrict_path;
  std::vector<std::string> finetune;
  SmoothingFlags smoothing;
  std::string out;
};

bool looks_like_digest(const std::string& s) {
  return s.size() == 16 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

int cmd_report(ReportOptions& o, const CLI::App& sub, std::ostream& out, std::ostream&) {
  const fs::path manifest_path = o.manifest;
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  const json cells = manifest.value("cells", json::array());
  if (cells.empty()) throw DataError(manifest_path.string() + " lists no cells");
  const fs::path base = manifest_path.parent_path();
  const MetricConfig metric_config = o.smoothing.config();

  json inputs = {{"manifest", input_entry(o.manifest, file_digest(o.manifest))}};
  DistributionTable hjd;
  if (!o.hjd.path.empty()) {
    hjd = load_distribution_table(o.hjd.path, o.hjd.format, o.hjd.view);
  } else if (manifest.contains("inputs") && manifest["inputs"].contains("hjd")) {
    const auto& h = manifest["inputs"]["hjd"];
    hjd = load_distribution_table(h.at("path").get<std::string>(), h.value("format", "auto"),
                                  h.value("view", "default"));
    if (hjd.sha256 != h.at("sha256").get<std::string>()) {
      throw DataError("the HJD file " + hjd.path + " changed since the manifest was written");
    }
  } else {
    throw UsageError("no HJD: pass --hjd or estimate with --hjd");
  }
  inputs["hjd"] = input_entry(hjd.path, hjd.sha256);
  if (!o.restrict_path.empty()) {
    restrict_to(hjd.rows, id_set(o.restrict_path));
    inputs["restrict"] = input_entry(o.restrict_path, file_digest(o.restrict_path));
  }

  // Attach fine-tuning metrics to cells, by explicit digest or by the labels
  // file they were trained on.
  std::map<std::string, FinetuneMetrics> finetune;
  for (const auto& spec : o.finetune) {
    std::string cell_digest;
    std::string path = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos && looks_like_digest(spec.substr(0, eq))) {
      cell_digest = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw DataError(path + ": " + e.what());
    }
    auto metrics = FinetuneMetrics::from_json(j);
    const json* cell = nullptr;
    for (const auto& c : cells) {
      if (cell_digest.empty() ? c.value("mjd_sha256", "") == metrics.source_digest
                              : c.value("config_digest", "") == cell_digest) {
        cell = &c;
      }
    }
    if (!cell) {
      throw DataError(path + ": no manifest cell matches " +
                      (cell_digest.empty() ? "source digest " + metrics.source_digest : cell_digest));
    }
    if (cell->value("mjd_sha256", "") != metrics.source_digest) {
      throw DataError(path + ": source digest " + metrics.source_digest + " conflicts with cell " +
                      cell->value("config_digest", "") + " (" + cell->value("mjd_sha256", "") + ")");
    }
    const std::string key = cell->value("config_digest", "");
    if (auto it = finetune.find(key); it != finetune.end() && !it->second.same_run(metrics)) {
      throw DataError("conflicting fine-tuning metrics for cell " + key);
    }
    finetune.insert_or_assign(key, std::move(metrics));
    inputs["finetune:" + key] = input_entry(path, file_digest(path));
  }

  const bool with_finetune = !finetune.empty();
  json rows = json::array();
  std::ostringstream csv;
  csv << "# hjd_sha256=" << hjd.sha256 << "\n# manifest_sha256=" << inputs["manifest"]["sha256"].get<std::string>()
      << "\n# metric_config_digest=" << metric_config.digest() << '\n';
  csv << "cell,prompt_type,mode,transform,temperature,n,kl,jsd,tvd,dcor";
  if (with_finetune) csv << ",dev_weighted_f1,dev_kl,dev_ce,test_weighted_f1,test_kl,test_ce";
  csv << '\n';
  csv.precision(17);

  std::ostringstream table;
  char line[512];
  std::snprintf(line, sizeof line, "%-16s  %-26s %-11s %-9s %5s %5s  %6s %6s %6s %6s", "cell", "prompt",
                "mode", "transform", "tau", "n", "KL", "JSD", "TVD", "D.Corr");
  table << line;
  if (with_finetune) {
    std::snprintf(line, sizeof line, "  %7s %6s %6s  %7s %6s %6s", "dev.wF1", "KL", "CE", "test.wF1", "KL", "CE");
    table << line;
  }
  table << '\n';

  for (const auto& c : cells) {
    const std::string digest = c.at("config_digest").get<std::string>();
    const fs::path mjd_path = base / c.at("mjd_file").get<std::string>();
    if (!fs::exists(mjd_path)) throw DataError("missing MJD file " + mjd_path.string());
    auto mjd = load_distribution_table(mjd_path, "mjd");
    if (mjd.sha256 != c.value("mjd_sha256", "")) {
      throw DataError(mjd_path.string() + " does not match the digest recorded in the manifest");
    }
    auto mjd_rows = mjd.rows;
    if (!o.restrict_path.empty()) restrict_to(mjd_rows, id_set(o.restrict_path));
    if (mjd_rows.empty()) throw DataError("cell " + digest + " has no items to compare");
    const auto [h, m] = align_tables(hjd.rows, mjd_rows);
    const auto r = dataset_report(h, m, metric_config);
    const auto& cfg = c.at("config");
    const std::string tau = cfg.contains("temperature") ? fixed(cfg["temperature"].get<double>(), 1) : "-";

    json row = {{"cell", digest},
                {"config", cfg},
                {"mjd_sha256", mjd.sha256},
                {"n", r.per_instance.size()},
                {"kl", r.mean_kl},
                {"jsd", r.mean_jsd},
                {"tvd", r.mean_tvd},
                {"distance_correlation", r.distance_correlation}};
    csv << digest << ',' << cfg.value("prompt_type", "") << ',' << cfg.value("mode", "") << ','
        << cfg.value("transform", "") << ',' << tau << ',' << r.per_instance.size() << ',' << r.mean_kl << ','
        << r.mean_jsd << ',' << r.mean_tvd << ',' << r.distance_correlation;
    std::snprintf(line, sizeof line, "%-16s  %-26s %-11s %-9s %5s %5zu  %6s %6s %6s %6s", digest.c_str(),
                  cfg.value("prompt_type", "").c_str(), cfg.value("mode", "").c_str(),
                  cfg.value("transform", "").c_str(), tau.c_str(), r.per_instance.size(), fixed(r.mean_kl).c_str(),
                  fixed(r.mean_jsd).c_str(), fixed(r.mean_tvd).c_str(), fixed(r.distance_correlation).c_str());
    table << line;
    if (with_finetune) {
      if (auto it = finetune.find(digest); it != finetune.end()) {
        row["finetune"] = it->second.to_json();
        auto split = [&](const char* name) {
          const auto s = it->second.splits.find(name);
          return s == it->second.splits.end() ? std::optional<SplitScores>{} : std::optional(s->second);
        };
        const auto dev = split("dev");
        const auto test = split("test");
        auto cell_text = [](const std::optional<SplitScores>& s, double SplitScores::*f) {
          return s ? fixed((*s).*f) : std::string("-");
        };
        for (const auto& s : {dev, test}) {
          csv << ',' << (s ? std::to_string(s->weighted_f1) : "") << ',' << (s ? std::to_string(s->kl) : "") << ','
              << (s ? std::to_string(s->ce_loss) : "");
        }
        std::snprintf(line, sizeof line, "  %7s %6s %6s  %7s %6s %6s",
                      cell_text(dev, &SplitScores::weighted_f1).c_str(), cell_text(dev, &SplitScores::kl).c_str(),
                      cell_text(dev, &SplitScores::ce_loss).c_str(), cell_text(test, &SplitScores::weighted_f1).c_str(),
                      cell_text(test, &SplitScores::kl).c_str(), cell_text(test, &SplitScores::ce_loss).c_str());
        table << line;
      } else {
        csv << ",,,,,,";
        std::snprintf(line, sizeof line, "  %7s %6s %6s  %7s %6s %6s", "-", "-", "-", "-", "-", "-");
        table << line;
      }
    }
    csv << '\n';
    table << '\n';
    rows.push_back(std::move(row));
  }

  out << table.str();
  if (!o.out.empty()) {
    const fs::path out_dir = o.out;
    const json doc = {{"rows", rows},
                      {"inputs", inputs},
                      {"metric_config", metric_config.to_json()},
                      {"resolved_options", sub.config_to_str(true, false)}};
    atomic_write(out_dir / "report.json", doc.dump(2) + "\n");
    atomic_write(out_dir / "report.csv", csv.str());
    out << "report: " << (out_dir / "report.json").string() << '\n';
  }
  return kExitOk;
}

// ingest ---------------------------------------------------------------------

struct IngestOptions {
  TableFlags input;
  TableFlags align;
  std::size_t explanations = 4;
  std::string split_exclude;
  std::uint64_t split_seed = 0;
  std::string out;
};

std::string stem_sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  const std::string ext = p.extension().string();
  p.replace_extension();
  return p.string() + suffix + (ext.empty() ? ".jsonl" : ext);
}

int cmd_ingest(IngestOptions& o, const CLI::App& sub, std::ostream& out, std::ostream&) {
  LabeledDataset data = load_items(o.input.path, o.input.format, o.input.view);
  const auto fmt = parse_table_format(o.input.format, o.input.path);
  json meta = {{"inputs", {{"input", input_entry(o.input.path, file_digest(o.input.path), to_string(fmt), o.input.view)}}}};

  if (!o.align.path.empty()) {
    const LabeledDataset other = load_items(o.align.path, o.align.format, o.align.view);
    meta["inputs"]["align"] = input_entry(o.align.path, file_digest(o.align.path), o.align.format, o.align.view);
    meta["explanation_filter"] = o.explanations;
    const ExplanationFilter filter = o.explanations > 0 ? explanation_count_is(o.explanations) : ExplanationFilter{};
    const auto paired = align_datasets(data, other, filter);
    LabeledDataset aligned;
    for (const auto& p : paired.pairs) {
      aligned.items.push_back(p.item);
      aligned.distributions.emplace(p.item.id, p.first);
      if (p.explanations) aligned.explanations.emplace(p.item.id, *p.explanations);
    }
    aligned.annotator_count = data.annotator_count;
    data = std::move(aligned);
  }

  const std::string text = to_canonical_jsonl(data);
  atomic_write(o.out, text);
  meta["output"] = {{"path", absolute_string(o.out)}, {"sha256", sha256_hex(text)}, {"items", data.items.size()}};
  out << data.items.size() << " items -> " << o.out << '\n';

  if (!o.split_exclude.empty()) {
    std::set<std::string> exclude = id_set(o.split_exclude);
    const auto [dev, test] = split_remainder(data, exclude, o.split_seed);
    const std::string dev_path = stem_sibling(o.out, ".dev");
    const std::string test_path = stem_sibling(o.out, ".test");
    const std::string dev_text = to_canonical_jsonl(dev);
    const std::string test_text = to_canonical_jsonl(test);
    atomic_write(dev_path, dev_text);
    atomic_write(test_path, test_text);
    meta["inputs"]["split_exclude"] = input_entry(o.split_exclude, file_digest(o.split_exclude));
    meta["split_seed"] = o.split_seed;
    meta["dev"] = {{"path", absolute_string(dev_path)}, {"sha256", sha256_hex(dev_text)}, {"items", dev.items.size()}};
    meta["test"] = {{"path", absolute_string(test_path)}, {"sha256", sha256_hex(test_text)}, {"items", test.items.size()}};
    out << "split (seed " << o.split_seed << "): " << dev.items.size() << " dev -> " << dev_path << ", "
        << test.items.size() << " test -> " << test_path << '\n';
  }
  meta["resolved_options"] = sub.config_to_str(true, false);
  atomic_write(o.out + ".meta.json", meta.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

TableFormat detect_table_format(const fs::path& path) {
  const json rec = first_record(path);
  if (!rec.is_object()) throw DataError(path.string() + ": records must be JSON objects");
  if (rec.contains("config_digest") && (rec.contains("distribution") || rec.contains("error"))) {
    return TableFormat::Mjd;
  }
  if (rec.contains("soft_label")) return TableFormat::SoftLabels;
  if (rec.contains("uid") &&
      (rec.contains("example") || rec.contains("label_counter") || rec.contains("old_label"))) {
    return TableFormat::ChaosNli;
  }
  if (rec.contains("context") || rec.contains("statement")) return TableFormat::VariErr;
  for (const char* key : {"entailment", "neutral", "contradiction"}) {
    if (rec.contains(key) && rec[key].is_array()) return TableFormat::VariErr;
  }
  return TableFormat::Canonical;
}

TableFormat parse_table_format(const std::string& name, const fs::path& path) {
  if (name == "auto") return detect_table_format(path);
  if (name == "mjd") return TableFormat::Mjd;
  if (name == "softlabels") return TableFormat::SoftLabels;
  if (name == "chaos-nli" || name == "chaosnli") return TableFormat::ChaosNli;
  if (name == "varierr") return TableFormat::VariErr;
  if (name == "canonical") return TableFormat::Canonical;
  throw UsageError("unknown table format '" + name + "'");
}

DistributionTable load_distribution_table(const fs::path& path, const std::string& format,
                                          const std::string& view) {
  DistributionTable t;
  t.path = path.string();
  t.format = parse_table_format(format, path);
  t.sha256 = file_digest(path);
  if (t.format == TableFormat::Mjd || t.format == TableFormat::SoftLabels) {
    const char* field = t.format == TableFormat::Mjd ? "distribution" : "soft_label";
    for_each_record(path, [&](const json& rec, const std::string& where) {
      const std::string id = rec["id"].get<std::string>();
      if (t.format == TableFormat::Mjd && rec.contains("error")) {
        ++t.error_records;
        return;
      }
      if (!rec.contains(field)) throw DataError(where + ": field '" + field + "': missing");
      if (!t.rows.emplace(id, read_vector(rec[field], where, field)).second) {
        throw DataError(where + ": duplicate id '" + id + "'");
      }
    });
    return t;
  }
  auto data = load_dataset(path, dataset_format_of(t.format), parse_distribution_view(view));
  t.rows = std::move(data.distributions);
  return t;
}

LabeledDataset load_items(const fs::path& path, const std::string& format, const std::string& view) {
  const auto fmt = parse_table_format(format, path);
  if (fmt == TableFormat::Mjd) {
    throw UsageError(path.string() + " is an MJD file and carries no item text");
  }
  if (fmt == TableFormat::SoftLabels) {
    LabeledDataset data;
    for_each_record(path, [&](const json& rec, const std::string& where) {
      NliItem item;
      item.id = rec["id"].get<std::string>();
      for (const char* key : {"premise", "hypothesis"}) {
        if (!rec.contains(key) || !rec[key].is_string()) {
          throw DataError(where + ": field '" + key + "': missing or not a string");
        }
      }
      item.premise = rec["premise"].get<std::string>();
      item.hypothesis = rec["hypothesis"].get<std::string>();
      data.distributions.emplace(item.id, read_vector(rec.at("soft_label"), where, "soft_label"));
      data.items.push_back(std::move(item));
    });
    data.validate();
    return data;
  }
  return load_dataset(path, dataset_format_of(fmt), parse_distribution_view(view));
}

FinetuneMetrics FinetuneMetrics::from_json(const json& j) {
  if (!j.is_object()) throw DataError("fine-tuning metrics must be a JSON object");
  FinetuneMetrics m;
  auto digest = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
      throw DataError(std::string("fine-tuning metrics: field '") + key + "' missing");
    }
    return j[key].get<std::string>();
  };
  m.source_digest = digest("source_digest");
  m.training_file_digest = digest("training_file_digest");
  m.config_digest = digest("config_digest");
  if (!j.contains("selected_epoch") || !j["selected_epoch"].is_number_integer() ||
      j["selected_epoch"].get<int>() < 1) {
    throw DataError("fine-tuning metrics: field 'selected_epoch' must be a positive integer");
  }
  m.selected_epoch = j["selected_epoch"].get<int>();
  if (!j.contains("splits") || !j["splits"].is_object() || j["splits"].empty()) {
    throw DataError("fine-tuning metrics: field 'splits' missing or empty");
  }
  for (const auto& [name, s] : j["splits"].items()) {
    auto value = [&](const char* key) {
      if (!s.contains(key) || !s[key].is_number() || !std::isfinite(s[key].get<double>())) {
        throw DataError("fine-tuning metrics: split '" + name + "' field '" + key + "' missing or not finite");
      }
      return s[key].get<double>();
    };
    m.splits[name] = {value("accuracy"), value("weighted_f1"), value("macro_f1"), value("kl"), value("ce_loss")};
  }
  return m;
}

json FinetuneMetrics::to_json() const {
  json splits_json = json::object();
  for (const auto& [name, s] : splits) {
    splits_json[name] = {{"accuracy", s.accuracy},
                         {"weighted_f1", s.weighted_f1},
                         {"macro_f1", s.macro_f1},
                         {"kl", s.kl},
                         {"ce_loss", s.ce_loss}};
  }
  return {{"source_digest", source_digest},
          {"training_file_digest", training_file_digest},
          {"config_digest", config_digest},
          {"selected_epoch", selected_epoch},
          {"splits", splits_json}};
}

bool FinetuneMetrics::same_run(const FinetuneMetrics& other) const { return to_json() == other.to_json(); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Estimate and evaluate label distributions for NLI items", "hlvest"};
  app.set_config("--config", "", "TOML/INI file supplying option values (flags take precedence)");
  app.set_version_flag("--version", "hlvest 0.1.0");
  app.require_subcommand(1);

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Query a backend and write one MJD file per grid cell");
  est.dataset.add_to(estimate, "dataset", "Items (and explanations) to estimate", true);
  est.hjd.add_to(estimate, "hjd", "Second dataset to align with; only shared ids are estimated", false);
  estimate->add_option("--explanations", est.explanations, "Keep items with exactly this many explanations (0: all)")
          ->capture_default_str();
  estimate->add_option("--prompt-type", est.prompt_types, "Prompt types (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember({"without-explanations", "with-explanations", "with-explicit-explanations",
                             "assistant", "assistant-explicit"}))
      ->default_str("without-explanations");
  estimate->add_option("--mode", est.modes, "Explanation modes: serial, parallel, k-at-a-time")
      ->delimiter(',')
      ->check(CLI::IsMember({"none", "serial", "parallel", "k-at-a-time"}))
      ->default_str("serial");
  estimate->add_option("--k", est.k, "Explanations per prompt in k-at-a-time mode")->capture_default_str();
  estimate->add_option("--transform", est.transforms, "Score transforms: normalize, softmax")
      ->delimiter(',')
      ->check(CLI::IsMember({"normalize", "softmax"}))
      ->default_str("normalize");
  estimate->add_option("--tau", est.taus, "Softmax temperatures, e.g. 5,10,20")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->default_str("20");
  estimate->add_option("--negative-policy", est.negative_policy, "Non-positive raw logits: error or clamp-epsilon")
      ->check(CLI::IsMember({"error", "clamp-epsilon"}))
      ->capture_default_str();
  estimate->add_option("--mappings", est.mappings, "Option orders to query, e.g. ENC,CNE (default: all six)")
      ->delimiter(',');
  estimate->add_option("--template-version", est.template_version, "Prompt template version")->capture_default_str();
  estimate->add_option("--backend", est.backend, "http, replay, mock-position or mock-label")
      ->check(CLI::IsMember({"http", "replay", "mock-position", "mock-label"}))
      ->capture_default_str();
  estimate->add_option("--mock-scores", est.mock_scores, "Three scores for the mock backends")
      ->delimiter(',')
      ->default_str("3,2,1");
  estimate->add_option("--endpoint", est.remote.endpoint, "Chat-completions URL")->capture_default_str();
  estimate->add_option("--model", est.remote.model, "Model name sent to the backend");
  estimate->add_option("--token-env", est.remote.token_env, "Environment variable holding the bearer token")
      ->capture_default_str();
  estimate->add_option("--top-k", est.remote.top_candidates, "First-token candidates to request")
      ->capture_default_str();
  estimate->add_option("--wire", est.wire, "chat-logprobs or full-logits")
      ->check(CLI::IsMember({"chat-logprobs", "full-logits"}))
      ->capture_default_str();
  estimate->add_option("--timeout", est.remote.timeout_seconds, "Request timeout in seconds")->capture_default_str();
  estimate->add_option("--max-in-flight", est.remote.max_in_flight, "Concurrent requests")->capture_default_str();
  estimate->add_option("--max-attempts", est.remote.retry.max_attempts, "Attempts per request")->capture_default_str();
  estimate->add_option("--backoff", est.remote.retry.backoff_base_seconds, "First retry delay in seconds")
      ->capture_default_str();
  estimate->add_flag("--no-floor", est.no_floor, "Fail instead of flooring letters missing from the top-k list");
  estimate->add_option("--cache", est.cache, "Response cache file (JSONL)");
  estimate->add_option("--workers", est.workers, "Items estimated concurrently (default: --max-in-flight)");
  estimate->add_option("--out", est.out, "Output directory")->capture_default_str();

  CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "Compare an MJD file against HJDs");
  cmp.hjd.add_to(compare, "hjd", "Reference distributions", true);
  cmp.mjd.add_to(compare, "mjd", "Distributions to evaluate", false);
  compare->add_flag("--uniform", cmp.uniform, "Evaluate the uniform distribution instead of an MJD file");
  compare->add_option("--restrict", cmp.restrict_path, "Only ids present in this file");
  cmp.smoothing.add_to(compare);
  compare->add_flag("--classify", cmp.classify, "Add argmax accuracy and F1 against the HJD majority");
  compare->add_option("--split-seed", cmp.split_seed, "Split seed to record in the report");
  compare->add_option("--out", cmp.out, "Report directory")->capture_default_str();

  PlotOptions plt;
  auto* plot = app.add_subcommand("plot", "Ternary scatter or error-line figure (SVG)");
  plot->add_option("--input", plt.inputs, "Distribution files")->required();
  plot->add_option("--label", plt.labels, "Legend label per input (default: file stem)");
  plot->add_option("--format", plt.format, "Input format (applies to every input)")->capture_default_str();
  plot->add_option("--view", plt.view, "Distribution view for ChaosNLI inputs")->capture_default_str();
  plot->add_option("--restrict", plt.restrict_path, "Only ids present in this file");
  plot->add_option("--zoom", plt.zoom, "Scale distances from the centroid")->capture_default_str();
  plot->add_option("--title", plt.title, "Figure title");
  plot->add_option("--radius", plt.radius, "Point radius")->capture_default_str();
  plot->add_flag("--error-lines", plt.error_lines, "Connect matching ids of two inputs");
  plot->add_option("--out", plt.out, "SVG output path")->required();
  plot->add_option("--csv", plt.csv, "Also write id,x,y,dataset,clipped rows here");

  ExportOptions exp;
  auto* export_cmd = app.add_subcommand("export-softlabels", "Write soft-label training records");
  exp.labels.add_to(export_cmd, "labels", "MJD or HJD distributions", true);
  exp.items.add_to(export_cmd, "items", "Dataset holding premise and hypothesis text", true);
  export_cmd->add_option("--restrict", exp.restrict_path, "Only ids present in this file");
  export_cmd->add_option("--out", exp.out, "Output JSONL path")->required();

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "Aggregate grid cells (and fine-tuning metrics) into one table");
  report->add_option("--manifest", rep.manifest, "manifest.json written by estimate")->required();
  rep.hjd.add_to(report, "hjd", "Reference distributions (default: the manifest's)", false);
  report->add_option("--restrict", rep.restrict_path, "Only ids present in this file");
  report->add_option("--finetune", rep.finetune, "Fine-tuning metrics JSON, optionally as <cell digest>=<path>");
  rep.smoothing.add_to(report);
  report->add_option("--out", rep.out, "Directory for report.json and report.csv");

  IngestOptions ing;
  auto* ingest = app.add_subcommand("ingest", "Convert a dataset to the canonical layout");
  ing.input.add_to(ingest, "input", "Source dataset", true);
  ing.align.add_to(ingest, "align-with", "Keep only ids shared with this dataset", false);
  ingest->add_option("--explanations", ing.explanations, "Alignment filter on explanation count (0: none)")
      ->capture_default_str();
  ingest->add_option("--split-exclude", ing.split_exclude, "Split the items not listed in this file into dev/test");
  ingest->add_option("--split-seed", ing.split_seed, "Seed for the dev/test split")->capture_default_str();
  ingest->add_option("--out", ing.out, "Canonical JSONL output")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(est, *estimate, out, err);
    if (compare->parsed()) return cmd_compare(cmp, *compare, out, err);
    if (plot->parsed()) return cmd_plot(plt, *plot, out, err);
    if (export_cmd->parsed()) return cmd_export(exp, *export_cmd, out, err);
    if (report->parsed()) return cmd_report(rep, *report, out, err);
    if (ingest->parsed()) return cmd_ingest(ing, *ingest, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace hlv::cli
