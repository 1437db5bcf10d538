#include "hlv/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "hlv/error.hpp"
#include "hlv/io.hpp"

namespace hlv {

using nlohmann::json;

std::string_view to_string(TransformMethod m) noexcept {
  return m == TransformMethod::Normalize ? "normalize" : "softmax";
}

TransformMethod parse_transform_method(std::string_view name) {
  if (name == "normalize" || name == "norm") return TransformMethod::Normalize;
  if (name == "softmax" || name == "sfmax") return TransformMethod::Softmax;
  throw UsageError("unknown transform '" + std::string(name) + "'");
}

std::string_view to_string(NegativeScorePolicy p) noexcept {
  return p == NegativeScorePolicy::Error ? "error" : "clamp-epsilon";
}

NegativeScorePolicy parse_negative_policy(std::string_view name) {
  if (name == "error") return NegativeScorePolicy::Error;
  if (name == "clamp-epsilon" || name == "clamp") return NegativeScorePolicy::ClampEpsilon;
  throw UsageError("unknown negative-score policy '" + std::string(name) + "'");
}

void TransformConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw UsageError("softmax temperature must be positive and finite");
  }
}

OptionProbs normalize_scores(const OptionScores& scores, NegativeScorePolicy policy) {
  OptionProbs out;
  Probs s = scores.scores;
  if (scores.semantics == ScoreSemantics::LogProbability) {
    const double mx = *std::max_element(s.begin(), s.end());
    for (double& v : s) v = std::exp(v - mx);
  } else {
    for (std::size_t i = 0; i < 3; ++i) {
      if (s[i] > 0.0) continue;
      if (policy == NegativeScorePolicy::Error) {
        throw DataError(std::string("non-positive score for option ") + kOptionLetters[i] +
                        " cannot be normalized");
      }
      s[i] = kClampEpsilon;
      out.clamped = true;
    }
  }
  const double sum = s[0] + s[1] + s[2];
  if (!(sum > 0.0) || !std::isfinite(sum)) throw DataError("score sum is not positive");
  for (std::size_t i = 0; i < 3; ++i) out.probs[i] = s[i] / sum;
  return out;
}

Probs softmax_scores(const OptionScores& scores, double temperature) {
  if (!(temperature > 0.0)) throw UsageError("softmax temperature must be positive");
  const auto& s = scores.scores;
  const double mx = *std::max_element(s.begin(), s.end());
  Probs e{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    e[i] = std::exp((s[i] - mx) / temperature);
    sum += e[i];
  }
  for (double& v : e) v /= sum;
  return e;
}

OptionProbs transform_scores(const OptionScores& scores, const TransformConfig& config) {
  if (config.method == TransformMethod::Normalize) {
    return normalize_scores(scores, config.negative_policy);
  }
  return {softmax_scores(scores, config.temperature), false};
}

JudgmentDistribution map_to_labels(const Probs& option_probs, const OptionMapping& mapping) {
  Probs out{};
  for (std::size_t letter = 0; letter < 3; ++letter) {
    out[index_of(mapping.label_for(letter))] = option_probs[letter];
  }
  return JudgmentDistribution::from_probs(out);
}

void EstimationConfig::validate() const {
  transform.validate();
  if (prompt_type == PromptType::WithoutExplanations && mode != ExplanationMode::None) {
    throw UsageError("prompt type without-explanations takes explanation mode 'none'");
  }
  if (prompt_type != PromptType::WithoutExplanations && mode == ExplanationMode::None) {
    throw UsageError(std::string("prompt type '") + std::string(to_string(prompt_type)) +
                     "' needs an explanation mode");
  }
  if (mode == ExplanationMode::KAtATime && k < 1) throw UsageError("k-at-a-time needs k >= 1");
  for (std::size_t i : mapping_indices) {
    if (i >= 6) throw UsageError("option mapping index out of range: " + std::to_string(i));
  }
  const auto versions = template_versions();
  if (std::find(versions.begin(), versions.end(), template_version) == versions.end()) {
    throw UsageError("unknown prompt template version '" + template_version + "'");
  }
}

std::vector<OptionMapping> EstimationConfig::mappings() const {
  const auto all = option_mappings();
  if (mapping_indices.empty()) return all;
  std::vector<OptionMapping> out;
  for (std::size_t i : mapping_indices) out.push_back(all.at(i));
  return out;
}

json EstimationConfig::to_json() const {
  json j = {{"prompt_type", std::string(to_string(prompt_type))},
            {"mode", std::string(to_string(mode))},
            {"transform", std::string(to_string(transform.method))},
            {"negative_policy", std::string(to_string(transform.negative_policy))},
            {"template_version", template_version}};
  if (mode == ExplanationMode::KAtATime) j["k"] = k;
  if (transform.method == TransformMethod::Softmax) j["temperature"] = transform.temperature;
  json maps = json::array();
  for (const auto& m : mappings()) maps.push_back(m.code());
  j["mappings"] = std::move(maps);
  return j;
}

EstimationConfig EstimationConfig::from_json(const json& j) {
  EstimationConfig c;
  c.prompt_type = parse_prompt_type(j.at("prompt_type").get<std::string>());
  c.mode = parse_explanation_mode(j.at("mode").get<std::string>());
  c.transform.method = parse_transform_method(j.at("transform").get<std::string>());
  c.transform.negative_policy = parse_negative_policy(j.value("negative_policy", "clamp-epsilon"));
  c.template_version = j.value("template_version", std::string(kDefaultTemplateVersion));
  c.k = j.value("k", std::size_t{0});
  c.transform.temperature = j.value("temperature", kDefaultTemperature);
  if (j.contains("mappings")) {
    const auto all = option_mappings();
    for (const auto& code : j["mappings"]) {
      const auto m = OptionMapping::from_code(code.get<std::string>());
      c.mapping_indices.push_back(
          static_cast<std::size_t>(std::find(all.begin(), all.end(), m) - all.begin()));
    }
    if (c.mapping_indices.size() == 6) {
      bool canonical = true;
      for (std::size_t i = 0; i < 6; ++i) canonical = canonical && c.mapping_indices[i] == i;
      if (canonical) c.mapping_indices.clear();
    }
  }
  c.validate();
  return c;
}

std::string EstimationConfig::digest() const { return short_digest(to_json().dump()); }

namespace {

[[noreturn]] void rethrow_annotated(const std::string& context) {
  try {
    throw;
  } catch (const MissingOptionTokenError& e) {
    throw MissingOptionTokenError(std::string(e.what()) + " [" + context + "]", e.candidates());
  } catch (const BackendError& e) {
    throw BackendError(std::string(e.what()) + " [" + context + "]", e.retryable(), e.attempts());
  } catch (const Error& e) {
    const std::string what = std::string(e.what()) + " [" + context + "]";
    switch (e.kind()) {
      case ErrorKind::Data:
        throw DataError(what);
      case ErrorKind::Usage:
        throw UsageError(what);
      case ErrorKind::Config:
        throw ConfigError(what);
      default:
        throw Error(e.kind(), what);
    }
  }
}

}  // namespace

EstimationTrace estimate_mjd(const NliItem& item, const ExplanationSet* explanations,
                             const EstimationConfig& config, Backend& backend) {
  config.validate();
  const std::size_t m = explanations ? explanations->size() : 0;
  if (uses_explanations(config.prompt_type) && m == 0) {
    throw UsageError("item '" + item.id + "' has no explanations for prompt type '" +
                     std::string(to_string(config.prompt_type)) + "'");
  }
  const auto batches = explanation_batches(m, config.k, config.mode);
  const auto mappings = config.mappings();

  EstimationTrace trace;
  trace.item_id = item.id;
  trace.records.reserve(mappings.size() * batches.size());
  Probs sum{0.0, 0.0, 0.0};

  for (std::size_t mi = 0; mi < mappings.size(); ++mi) {
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<ExplanationAnnotation> resolved;
      for (std::size_t idx : batches[bi]) resolved.push_back(explanations->explanations.at(idx));

      TraceRecord rec;
      rec.mapping_index = config.mapping_indices.empty() ? mi : config.mapping_indices[mi];
      rec.mapping = mappings[mi];
      rec.batch_index = bi;
      rec.batch = batches[bi];
      try {
        QueryRequest request{render_prompt(item, resolved, mappings[mi], config.prompt_type,
                                           config.template_version),
                             mappings[mi]};
        rec.prompt_digest = request.prompt.digest();
        rec.scores = backend.query(request);
        const OptionProbs probs = transform_scores(rec.scores, config.transform);
        rec.option_probs = probs.probs;
        rec.clamped = probs.clamped;
        rec.label_distribution = map_to_labels(probs.probs, mappings[mi]);
      } catch (const Error&) {
        rethrow_annotated("item " + item.id + ", mapping " + mappings[mi].code() + ", batch " +
                          std::to_string(bi));
      }
      if (rec.scores.provenance.floored()) ++trace.floored_responses;
      if (rec.clamped) ++trace.clamped_records;
      for (std::size_t i = 0; i < 3; ++i) sum[i] += rec.label_distribution.at(i);
      trace.records.push_back(std::move(rec));
    }
  }
  const double n = static_cast<double>(trace.records.size());
  Probs mean{sum[0] / n, sum[1] / n, sum[2] / n};
  trace.mjd = JudgmentDistribution::normalized(mean);
  return trace;
}

std::vector<EstimationInput> estimation_inputs(const PairedDataset& paired) {
  std::vector<EstimationInput> out;
  for (const auto& p : paired.pairs) out.push_back({p.item, p.explanations});
  return out;
}

std::vector<EstimationInput> estimation_inputs(const LabeledDataset& dataset) {
  std::vector<EstimationInput> out;
  for (const auto& item : dataset.items) {
    std::optional<ExplanationSet> expl;
    if (auto it = dataset.explanations.find(item.id); it != dataset.explanations.end()) {
      expl = it->second;
    }
    out.push_back({item, std::move(expl)});
  }
  return out;
}

DatasetEstimate estimate_dataset(std::vector<EstimationInput> inputs,
                                 const EstimationConfig& config, Backend& backend, int workers) {
  config.validate();
  std::sort(inputs.begin(), inputs.end(),
            [](const auto& a, const auto& b) { return a.item.id < b.item.id; });
  std::vector<std::optional<EstimationTrace>> traces(inputs.size());
  std::vector<std::optional<ItemFailure>> errors(inputs.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < inputs.size(); i = next.fetch_add(1)) {
      const auto& in = inputs[i];
      try {
        traces[i] = estimate_mjd(in.item, in.explanations ? &*in.explanations : nullptr, config,
                                 backend);
      } catch (const Error& e) {
        errors[i] = ItemFailure{in.item.id, e.what(), e.kind()};
      } catch (const std::exception& e) {
        errors[i] = ItemFailure{in.item.id, e.what(), ErrorKind::Data};
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || inputs.size() <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, inputs.size()); ++t) pool.emplace_back(work);
  }

  DatasetEstimate out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (traces[i]) {
      out.traces.push_back(std::move(*traces[i]));
    } else {
      out.failures.push_back(errors[i].value_or(ItemFailure{inputs[i].item.id, "unknown error"}));
    }
  }
  return out;
}

std::string mjd_jsonl(const DatasetEstimate& estimate, const std::string& config_digest,
                      const json& inputs) {
  // Merge traces and failures so the file stays ordered by id.
  std::vector<std::pair<std::string, json>> rows;
  for (const auto& t : estimate.traces) {
    const auto& p = t.mjd.probs();
    rows.emplace_back(t.item_id,
                      json{{"id", t.item_id},
                           {"config_digest", config_digest},
                           {"distribution", {p[0], p[1], p[2]}},
                           {"flags",
                            {{"floored_responses", t.floored_responses},
                             {"clamped_records", t.clamped_records},
                             {"records", t.records.size()}}}});
  }
  for (const auto& f : estimate.failures) {
    rows.emplace_back(f.item_id,
                      json{{"id", f.item_id}, {"config_digest", config_digest}, {"error", f.message}});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (auto& [id, rec] : rows) {
    if (!inputs.is_null()) rec["inputs"] = inputs;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string trace_jsonl(const DatasetEstimate& estimate, const std::string& config_digest) {
  std::string out;
  for (const auto& t : estimate.traces) {
    for (const auto& r : t.records) {
      json floored = json::array();
      for (char c : r.scores.provenance.floored_letters) floored.push_back(std::string(1, c));
      const auto& d = r.label_distribution.probs();
      json rec = {{"id", t.item_id},
                  {"config_digest", config_digest},
                  {"mapping", r.mapping.code()},
                  {"mapping_index", r.mapping_index},
                  {"batch_index", r.batch_index},
                  {"batch", r.batch},
                  {"prompt_digest", r.prompt_digest},
                  {"scores", r.scores.scores},
                  {"semantics", std::string(to_string(r.scores.semantics))},
                  {"backend", r.scores.provenance.backend},
                  {"floored", floored},
                  {"clamped", r.clamped},
                  {"option_probs", r.option_probs},
                  {"label_distribution", {d[0], d[1], d[2]}}};
      out += rec.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace hlv
