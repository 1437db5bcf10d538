#include "hlv/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

#include "hlv/error.hpp"
#include "hlv/io.hpp"

namespace hlv {

using nlohmann::json;

namespace {

class RecordContext {
 public:
  RecordContext(const std::string& source, std::size_t line) : source_(source), line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& message) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": field '" << field << "': " << message;
    throw DataError(os.str());
  }

  const json& require(const json& obj, const std::string& field) const {
    if (!obj.is_object() || !obj.contains(field)) fail(field, "missing");
    return obj.at(field);
  }

  std::string require_string(const json& obj, const std::string& field) const {
    const json& v = require(obj, field);
    if (!v.is_string()) fail(field, "expected a string");
    auto s = v.get<std::string>();
    if (s.empty()) fail(field, "must not be empty");
    return s;
  }

  /// Accepts a string or a number (some releases store numeric ids).
  std::string require_id(const json& obj, const std::string& field) const {
    const json& v = require(obj, field);
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return require_string(obj, field);
  }

  std::string first_string(const json& obj, std::initializer_list<const char*> fields) const {
    for (const char* f : fields) {
      if (obj.contains(f)) return require_string(obj, f);
    }
    fail(*fields.begin(), "missing");
  }

  NliLabel label(const json& v, const std::string& field) const {
    if (!v.is_string()) fail(field, "expected a label string");
    auto parsed = try_parse_label(v.get<std::string>());
    if (!parsed) fail(field, "unknown label '" + v.get<std::string>() + "'");
    return *parsed;
  }

  std::uint64_t count(const json& v, const std::string& field) const {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      fail(field, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  LabelCounts counts_object(const json& obj, const std::string& field) const {
    if (!obj.is_object()) fail(field, "expected an object keyed by label");
    LabelCounts counts{0, 0, 0};
    for (const auto& [key, value] : obj.items()) {
      auto label = try_parse_label(key);
      if (!label) fail(field, "unknown label key '" + key + "'");
      counts[index_of(*label)] += count(value, field + "." + key);
    }
    return counts;
  }

  LabelCounts counts_array(const json& arr, const std::string& field) const {
    if (!arr.is_array() || arr.size() != 3) fail(field, "expected an array of 3 counts");
    return {count(arr[0], field), count(arr[1], field), count(arr[2], field)};
  }

  JudgmentDistribution from_counts(const LabelCounts& counts, const std::string& field) const {
    try {
      return parse_judgment_counts(counts);
    } catch (const DataError& e) {
      fail(field, e.what());
    }
  }

  JudgmentDistribution probs_array(const json& arr, const std::string& field) const {
    if (!arr.is_array() || arr.size() != 3) fail(field, "expected an array of 3 probabilities");
    Probs p{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!arr[i].is_number()) fail(field, "expected numbers");
      p[i] = arr[i].get<double>();
    }
    if (!on_simplex(p)) fail(field, "not on the probability simplex");
    return JudgmentDistribution::from_probs(p);
  }

 private:
  const std::string& source_;
  std::size_t line_;
};

struct ParsedRecord {
  NliItem item;
  std::optional<JudgmentDistribution> distribution;
  std::optional<ExplanationSet> explanations;
  std::optional<std::uint64_t> annotators;
};

ParsedRecord parse_canonical(const json& rec, const RecordContext& ctx) {
  ParsedRecord out;
  out.item.id = ctx.require_id(rec, "id");
  out.item.premise = ctx.require_string(rec, "premise");
  out.item.hypothesis = ctx.require_string(rec, "hypothesis");
  if (rec.contains("distribution") && !rec["distribution"].is_null()) {
    out.distribution = ctx.probs_array(rec["distribution"], "distribution");
  } else if (rec.contains("label_counts") && !rec["label_counts"].is_null()) {
    const auto counts = ctx.counts_object(rec["label_counts"], "label_counts");
    out.distribution = ctx.from_counts(counts, "label_counts");
    out.annotators = counts[0] + counts[1] + counts[2];
  }
  if (rec.contains("explanations") && !rec["explanations"].is_null()) {
    const json& arr = rec["explanations"];
    if (!arr.is_array()) ctx.fail("explanations", "expected an array");
    ExplanationSet set{out.item.id, {}};
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string field = "explanations[" + std::to_string(i) + "]";
      const json& e = arr[i];
      if (!e.is_object()) ctx.fail(field, "expected an object");
      ExplanationAnnotation ann;
      ann.annotator = e.contains("annotator") ? (e["annotator"].is_string()
                                                     ? e["annotator"].get<std::string>()
                                                     : e["annotator"].dump())
                                              : std::string{};
      ann.label = ctx.label(ctx.require(e, "label"), field + ".label");
      ann.text = ctx.require_string(e, "text");
      set.explanations.push_back(std::move(ann));
    }
    out.explanations = std::move(set);
  }
  return out;
}

ParsedRecord parse_chaos(const json& rec, const RecordContext& ctx, DistributionView view) {
  ParsedRecord out;
  out.item.id = ctx.require_id(rec, "uid");
  const json& example = ctx.require(rec, "example");
  out.item.premise = ctx.require_string(example, "premise");
  out.item.hypothesis = ctx.require_string(example, "hypothesis");
  switch (view) {
    case DistributionView::Default: {
      LabelCounts counts{};
      if (rec.contains("label_counter")) {
        counts = ctx.counts_object(rec["label_counter"], "label_counter");
      } else if (rec.contains("label_count")) {
        counts = ctx.counts_array(rec["label_count"], "label_count");
      } else if (rec.contains("label_dist")) {
        out.distribution = ctx.probs_array(rec["label_dist"], "label_dist");
        break;
      } else {
        ctx.fail("label_counter", "missing");
      }
      out.distribution = ctx.from_counts(counts, "label_counter");
      out.annotators = counts[0] + counts[1] + counts[2];
      break;
    }
    case DistributionView::SourceMajority:
      out.distribution = one_hot(ctx.label(ctx.require(rec, "old_label"), "old_label"));
      out.annotators = 1;
      break;
    case DistributionView::SourceAnnotations: {
      const json& labels = ctx.require(rec, "old_labels");
      if (!labels.is_array()) ctx.fail("old_labels", "expected an array of labels");
      LabelCounts counts{0, 0, 0};
      for (const auto& l : labels) counts[index_of(ctx.label(l, "old_labels"))] += 1;
      out.distribution = ctx.from_counts(counts, "old_labels");
      out.annotators = labels.size();
      break;
    }
  }
  return out;
}

ParsedRecord parse_varierr(const json& rec, const RecordContext& ctx) {
  ParsedRecord out;
  out.item.id = ctx.require_id(rec, rec.contains("id") ? "id" : "uid");
  out.item.premise = ctx.first_string(rec, {"context", "premise"});
  out.item.hypothesis = ctx.first_string(rec, {"statement", "hypothesis"});

  ExplanationSet set{out.item.id, {}};
  LabelCounts counts{0, 0, 0};
  for (NliLabel label : kAllLabels) {
    std::string key(label_name(label));
    std::transform(key.begin(), key.end(), key.begin(), ::tolower);
    if (!rec.contains(key)) continue;
    const json& arr = rec[key];
    if (!arr.is_array()) ctx.fail(key, "expected an array of explanations");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string field = key + "[" + std::to_string(i) + "]";
      const json& e = arr[i];
      if (!e.is_object()) ctx.fail(field, "expected an object");
      // Entries explicitly marked invalid by the validation round are dropped.
      bool keep = true;
      for (const char* flag : {"validated", "valid"}) {
        if (e.contains(flag) && e[flag].is_boolean() && !e[flag].get<bool>()) keep = false;
      }
      if (!keep) continue;
      ExplanationAnnotation ann;
      if (e.contains("annotator")) {
        ann.annotator = e["annotator"].is_string() ? e["annotator"].get<std::string>()
                                                   : e["annotator"].dump();
      }
      ann.label = label;
      ann.text = ctx.first_string(e, {"reason", "explanation", "text"});
      set.explanations.push_back(std::move(ann));
      counts[index_of(label)] += 1;
    }
  }
  if (counts[0] + counts[1] + counts[2] > 0) out.distribution = parse_judgment_counts(counts);
  out.explanations = std::move(set);
  return out;
}

}  // namespace

void LabeledDataset::validate() const {
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (item.id.empty()) throw DataError("item with empty id");
    if (item.premise.empty()) throw DataError("item '" + item.id + "': empty premise");
    if (item.hypothesis.empty()) throw DataError("item '" + item.id + "': empty hypothesis");
    if (!ids.insert(item.id).second) throw DataError("duplicate id '" + item.id + "'");
  }
  for (const auto& [id, dist] : distributions) {
    if (!ids.contains(id)) throw DataError("distribution for unknown id '" + id + "'");
  }
  for (const auto& [id, set] : explanations) {
    if (!ids.contains(id)) throw DataError("explanations for unknown id '" + id + "'");
    if (set.item_id != id) throw DataError("explanation set for '" + id + "' names '" + set.item_id + "'");
    for (const auto& e : set.explanations) {
      if (e.text.empty()) throw DataError("item '" + id + "': empty explanation text");
    }
  }
}

const NliItem* LabeledDataset::find(const std::string& id) const {
  for (const auto& item : items) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

std::size_t LabeledDataset::explanation_count(const std::string& id) const {
  auto it = explanations.find(id);
  return it == explanations.end() ? 0 : it->second.size();
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "chaos-nli" || name == "chaosnli") return DatasetFormat::ChaosNli;
  if (name == "varierr") return DatasetFormat::VariErr;
  if (name == "canonical") return DatasetFormat::Canonical;
  throw UsageError("unknown dataset format '" + name + "' (expected chaos-nli, varierr or canonical)");
}

DistributionView parse_distribution_view(const std::string& name) {
  if (name == "default" || name == "hjd") return DistributionView::Default;
  if (name == "source-majority" || name == "mnli-single") return DistributionView::SourceMajority;
  if (name == "source-annotations" || name == "mnli-dist") return DistributionView::SourceAnnotations;
  throw UsageError("unknown distribution view '" + name + "'");
}

LabeledDataset parse_dataset(std::istream& in, DatasetFormat format, DistributionView view,
                             const std::string& source) {
  if (view != DistributionView::Default && format != DatasetFormat::ChaosNli) {
    throw UsageError("distribution views other than the default need a chaos-nli source");
  }
  LabeledDataset ds;
  std::set<std::string> seen;
  std::optional<std::uint64_t> annotators;
  bool annotators_uniform = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RecordContext ctx(source, line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      ctx.fail("<record>", std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) ctx.fail("<record>", "expected a JSON object");
    ParsedRecord parsed;
    switch (format) {
      case DatasetFormat::Canonical:
        parsed = parse_canonical(rec, ctx);
        break;
      case DatasetFormat::ChaosNli:
        parsed = parse_chaos(rec, ctx, view);
        break;
      case DatasetFormat::VariErr:
        parsed = parse_varierr(rec, ctx);
        break;
    }
    if (!seen.insert(parsed.item.id).second) ctx.fail("id", "duplicate id '" + parsed.item.id + "'");
    const std::string id = parsed.item.id;
    if (parsed.distribution) ds.distributions.emplace(id, *parsed.distribution);
    if (parsed.explanations) ds.explanations.emplace(id, std::move(*parsed.explanations));
    if (parsed.annotators) {
      if (annotators && *annotators != *parsed.annotators) annotators_uniform = false;
      annotators = parsed.annotators;
    } else {
      annotators_uniform = false;
    }
    ds.items.push_back(std::move(parsed.item));
  }
  if (annotators && annotators_uniform && *annotators > 0) {
    ds.annotator_count = static_cast<int>(*annotators);
  }
  ds.validate();
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            DistributionView view) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, format, view, path.string());
}

std::string to_canonical_jsonl(const LabeledDataset& dataset) {
  std::string out;
  for (const auto& item : dataset.items) {
    json rec = {{"id", item.id}, {"premise", item.premise}, {"hypothesis", item.hypothesis}};
    if (auto it = dataset.distributions.find(item.id); it != dataset.distributions.end()) {
      const auto& p = it->second.probs();
      rec["distribution"] = {p[0], p[1], p[2]};
    }
    if (auto it = dataset.explanations.find(item.id); it != dataset.explanations.end()) {
      json arr = json::array();
      for (const auto& e : it->second.explanations) {
        arr.push_back({{"annotator", e.annotator},
                       {"label", std::string(1, label_letter(e.label))},
                       {"text", e.text}});
      }
      rec["explanations"] = std::move(arr);
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

ExplanationFilter explanation_count_is(std::size_t m) {
  return [m](std::size_t count) { return count == m; };
}

PairedDataset align_datasets(const LabeledDataset& a, const LabeledDataset& b,
                             const ExplanationFilter& filter) {
  PairedDataset out;
  // distributions is an ordered map, so iteration is ascending by id.
  for (const auto& [id, dist_a] : a.distributions) {
    auto it_b = b.distributions.find(id);
    if (it_b == b.distributions.end()) continue;
    std::optional<ExplanationSet> expl;
    if (auto e = a.explanations.find(id); e != a.explanations.end()) {
      expl = e->second;
    } else if (auto e2 = b.explanations.find(id); e2 != b.explanations.end()) {
      expl = e2->second;
    }
    if (filter && !filter(expl ? expl->size() : 0)) continue;
    const NliItem* item = a.find(id);
    if (item == nullptr) item = b.find(id);
    out.pairs.push_back(PairedItem{*item, dist_a, it_b->second, std::move(expl)});
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_remainder(const LabeledDataset& full,
                                                          const std::set<std::string>& exclude_ids,
                                                          std::uint64_t seed) {
  std::vector<std::tuple<std::uint64_t, std::string, std::size_t>> keyed;
  for (std::size_t i = 0; i < full.items.size(); ++i) {
    const auto& id = full.items[i].id;
    if (exclude_ids.contains(id)) continue;
    keyed.emplace_back(stable_hash64(std::to_string(seed) + ":" + id), id, i);
  }
  std::sort(keyed.begin(), keyed.end());

  LabeledDataset dev;
  LabeledDataset test;
  dev.annotator_count = test.annotator_count = full.annotator_count;
  for (std::size_t rank = 0; rank < keyed.size(); ++rank) {
    const auto& [hash, id, index] = keyed[rank];
    LabeledDataset& target = rank % 2 == 0 ? dev : test;
    target.items.push_back(full.items[index]);
    if (auto it = full.distributions.find(id); it != full.distributions.end()) {
      target.distributions.emplace(id, it->second);
    }
    if (auto it = full.explanations.find(id); it != full.explanations.end()) {
      target.explanations.emplace(id, it->second);
    }
  }
  return {std::move(dev), std::move(test)};
}

}  // namespace hlv
