#include "hlv/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "hlv/error.hpp"
#include "hlv/io.hpp"

namespace hlv {

using nlohmann::json;

std::string_view to_string(ScoreSemantics s) noexcept {
  return s == ScoreSemantics::RawLogit ? "raw_logit" : "log_probability";
}

std::string_view to_string(WireFormat w) noexcept {
  return w == WireFormat::ChatLogprobs ? "chat-logprobs" : "full-logits";
}

WireFormat parse_wire_format(std::string_view name) {
  if (name == "chat-logprobs") return WireFormat::ChatLogprobs;
  if (name == "full-logits") return WireFormat::FullLogits;
  throw UsageError("unknown wire format '" + std::string(name) + "'");
}

void OptionScores::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!std::isfinite(scores[i])) {
      throw BackendError(std::string("non-finite score for option ") + kOptionLetters[i], false);
    }
    if (semantics == ScoreSemantics::LogProbability && scores[i] > 0.0) {
      throw BackendError(std::string("positive log-probability for option ") + kOptionLetters[i],
                         false);
    }
  }
}

void BackendConfig::validate() const {
  if (top_candidates < 3) throw ConfigError("top-candidate count must be at least 3");
  if (!(timeout_seconds > 0.0)) throw ConfigError("request timeout must be positive");
  if (max_in_flight < 1) throw ConfigError("max in-flight requests must be at least 1");
  if (retry.max_attempts < 1) throw ConfigError("retry attempts must be at least 1");
  if (retry.backoff_base_seconds < 0.0) throw ConfigError("retry backoff must be non-negative");
}

std::string BackendConfig::output_digest() const {
  json j = {{"model", model},
            {"top_candidates", top_candidates},
            {"wire", std::string(to_string(wire))},
            {"allow_floor", allow_floor},
            {"temperature", 0},
            {"max_tokens", 1}};
  return short_digest(j.dump());
}

namespace {

bool is_space_marker(std::string_view prefix) {
  // Plain whitespace plus the space markers of SentencePiece and byte-level BPE vocabularies.
  return prefix == " " || prefix == "\t" || prefix == "\n" || prefix == "\xE2\x96\x81" ||
         prefix == "\xC4\xA0";
}

/// 0 for an exact match, 1 for a whitespace variant, -1 otherwise.
int match_letter(std::string_view token, char letter) {
  if (token.size() == 1 && token[0] == letter) return 0;
  if (token.size() >= 2 && token.back() == letter &&
      is_space_marker(token.substr(0, token.size() - 1))) {
    return 1;
  }
  return -1;
}

}  // namespace

OptionScores scores_from_candidates(const std::vector<TokenCandidate>& candidates,
                                    ScoreSemantics semantics, const std::string& backend_id,
                                    bool allow_floor, const std::string& raw_record) {
  auto raw_tokens = [&] {
    std::vector<std::string> tokens;
    for (const auto& c : candidates) tokens.push_back(c.token);
    return tokens;
  };
  OptionScores out;
  out.semantics = semantics;
  out.provenance.backend = backend_id;
  out.provenance.raw = raw_record;

  std::array<std::optional<double>, 3> exact{};
  std::array<std::optional<double>, 3> spaced{};
  double min_score = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (std::isfinite(c.score)) min_score = std::min(min_score, c.score);
    for (std::size_t i = 0; i < 3; ++i) {
      const int m = match_letter(c.token, kOptionLetters[i]);
      if (m == 0 && !exact[i]) exact[i] = c.score;
      if (m == 1 && !spaced[i]) spaced[i] = c.score;
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (exact[i]) {
      out.scores[i] = *exact[i];
    } else if (spaced[i]) {
      out.scores[i] = *spaced[i];
    } else if (semantics == ScoreSemantics::LogProbability && allow_floor &&
               std::isfinite(min_score)) {
      out.scores[i] = min_score - 1.0;
      out.provenance.floored_letters.push_back(kOptionLetters[i]);
    } else {
      throw MissingOptionTokenError(
          std::string("missing option token '") + kOptionLetters[i] + "' among " +
              std::to_string(candidates.size()) + " first-token candidates",
          raw_tokens());
    }
  }
  out.validate();
  return out;
}

json build_chat_request(const PromptText& prompt, const BackendConfig& config) {
  json messages = json::array();
  for (const auto& m : prompt.messages) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  json body = {{"model", config.model},
               {"messages", std::move(messages)},
               {"temperature", 0},
               {"max_tokens", 1},
               {"n", 1},
               {"stream", false}};
  if (config.wire == WireFormat::ChatLogprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = config.top_candidates;
  } else {
    body["return_first_token_logits"] = true;
  }
  return body;
}

namespace {

std::vector<TokenCandidate> candidates_from_object(const json& obj) {
  std::vector<TokenCandidate> out;
  for (const auto& [token, value] : obj.items()) {
    if (!value.is_number()) throw BackendError("non-numeric score for token '" + token + "'", false);
    out.push_back({token, value.get<double>()});
  }
  return out;
}

std::vector<TokenCandidate> candidates_from_list(const json& arr, const char* score_key) {
  std::vector<TokenCandidate> out;
  for (const auto& entry : arr) {
    if (!entry.is_object() || !entry.contains("token") || !entry["token"].is_string() ||
        !entry.contains(score_key) || !entry[score_key].is_number()) {
      throw BackendError(std::string("malformed candidate entry (needs token and ") + score_key + ")",
                         false);
    }
    out.push_back({entry["token"].get<std::string>(), entry[score_key].get<double>()});
  }
  return out;
}

}  // namespace

OptionScores parse_backend_response(const std::string& body, WireFormat wire,
                                    const std::string& backend_id, bool allow_floor) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("response is not JSON: ") + e.what(), false);
  }
  if (doc.contains("error")) {
    throw BackendError("backend returned an error: " + doc["error"].dump(), false);
  }

  if (wire == WireFormat::FullLogits) {
    if (!doc.contains("first_token_logits")) {
      throw ConfigError("backend response carries no first_token_logits; the server cannot "
                        "expose first-token logits");
    }
    const json& logits = doc["first_token_logits"];
    auto candidates = logits.is_object() ? candidates_from_object(logits)
                                         : candidates_from_list(logits, "logit");
    return scores_from_candidates(candidates, ScoreSemantics::RawLogit, backend_id, allow_floor,
                                  logits.dump());
  }

  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw BackendError("response has no choices", false);
  }
  const json& choice = doc["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
    throw ConfigError("backend returned no log-probabilities; it cannot serve greedy first-token "
                      "scores");
  }
  const json& lp = choice["logprobs"];
  if (lp.contains("content") && lp["content"].is_array()) {
    if (lp["content"].empty()) throw BackendError("response has no generated token", false);
    const json& first = lp["content"][0];
    if (!first.contains("top_logprobs") || !first["top_logprobs"].is_array()) {
      throw ConfigError("first generated token carries no top_logprobs");
    }
    auto candidates = candidates_from_list(first["top_logprobs"], "logprob");
    return scores_from_candidates(candidates, ScoreSemantics::LogProbability, backend_id,
                                  allow_floor, first.dump());
  }
  if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array() && !lp["top_logprobs"].empty()) {
    const json& first = lp["top_logprobs"][0];
    if (!first.is_object()) throw BackendError("malformed legacy top_logprobs entry", false);
    return scores_from_candidates(candidates_from_object(first), ScoreSemantics::LogProbability,
                                  backend_id, allow_floor, first.dump());
  }
  throw ConfigError("unrecognized logprobs layout in backend response");
}

FairSemaphore::FairSemaphore(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("semaphore capacity must be at least 1");
}

void FairSemaphore::acquire() {
  std::unique_lock lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  cv_.wait(lock, [&] { return ticket == now_serving_ && active_ < capacity_; });
  ++now_serving_;
  ++active_;
  cv_.notify_all();
}

void FairSemaphore::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_all();
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.emplace_back(line_no, line);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const json rec = json::parse(lines[i].second);
      entries_[rec.at("key").get<std::string>()] = rec.at("response").get<std::string>();
    } catch (const json::exception& e) {
      // A torn final line is what an interrupted append leaves behind; the
      // entry is simply fetched again.
      if (i + 1 == lines.size()) break;
      throw DataError(path_.string() + ":" + std::to_string(lines[i].first) +
                      ": malformed cache record: " + e.what());
    }
  }
}

std::string ResponseCache::make_key(const std::string& prompt_digest, const std::string& model,
                                    const std::string& config_digest) {
  return sha256_hex(prompt_digest + "\n" + model + "\n" + config_digest);
}

std::optional<std::string> ResponseCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::insert(const std::string& key, const std::string& prompt_digest,
                           const std::string& model, const std::string& config_digest,
                           const std::string& response_body) {
  std::lock_guard lock(mutex_);
  if (entries_.contains(key)) return;
  const json rec = {{"key", key},
                    {"prompt_digest", prompt_digest},
                    {"model", model},
                    {"config_digest", config_digest},
                    {"response", response_body}};
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to cache '" + path_.string() + "'");
  out << rec.dump() << '\n';
  out.flush();
  entries_.emplace(key, response_body);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ChatCompletionBackend::ChatCompletionBackend(BackendConfig config,
                                             std::shared_ptr<Transport> transport,
                                             std::shared_ptr<ResponseCache> cache, bool offline)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      offline_(offline),
      in_flight_(std::max(1, config_.max_in_flight)) {
  config_.validate();
  if (!offline_ && !transport_) throw ConfigError("online backend needs a transport");
  if (offline_ && !cache_) throw ConfigError("offline backend needs a response cache");
}

std::string ChatCompletionBackend::identifier() const {
  return std::string(to_string(config_.wire)) + ":" + config_.model;
}

BackendStats ChatCompletionBackend::stats() const {
  return {cache_hits_.load(), network_calls_.load(), retries_.load()};
}

std::string ChatCompletionBackend::fetch_with_retry(const std::string& body) {
  int attempt = 0;
  while (true) {
    ++attempt;
    in_flight_.acquire();
    try {
      network_calls_.fetch_add(1);
      std::string response = transport_->post(body);
      in_flight_.release();
      return response;
    } catch (const BackendError& e) {
      in_flight_.release();
      if (!e.retryable()) throw;
      if (attempt >= config_.retry.max_attempts) {
        throw BackendError(std::string(e.what()) + " (gave up after " + std::to_string(attempt) +
                               " attempts)",
                           true, attempt);
      }
    } catch (...) {
      in_flight_.release();
      throw;
    }
    retries_.fetch_add(1);
    const double delay = config_.retry.backoff_base_seconds * std::pow(2.0, attempt - 1);
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
}

OptionScores ChatCompletionBackend::query(const QueryRequest& request) {
  if (request.prompt.messages.empty()) throw UsageError("empty prompt");
  const std::string prompt_digest = request.prompt.digest();
  const std::string config_digest = config_.output_digest();
  const std::string key = ResponseCache::make_key(prompt_digest, config_.model, config_digest);

  std::string body;
  if (cache_) {
    if (auto hit = cache_->find(key)) {
      cache_hits_.fetch_add(1);
      body = std::move(*hit);
    }
  }
  if (body.empty()) {
    if (offline_) {
      throw BackendError("cache miss for prompt " + prompt_digest.substr(0, 16) +
                             " in offline mode",
                         false);
    }
    body = fetch_with_retry(build_chat_request(request.prompt, config_).dump());
    // Parse before caching so malformed responses never enter the cache.
    OptionScores scores =
        parse_backend_response(body, config_.wire, identifier(), config_.allow_floor);
    if (cache_) cache_->insert(key, prompt_digest, config_.model, config_digest, body);
    return scores;
  }
  return parse_backend_response(body, config_.wire, identifier(), config_.allow_floor);
}

MockBackend::MockBackend(Rule rule, std::array<double, 3> scores,
                         std::map<std::string, std::array<double, 3>> table,
                         ScoreSemantics semantics)
    : rule_(rule), scores_(scores), table_(std::move(table)), semantics_(semantics) {}

std::unique_ptr<MockBackend> MockBackend::position_biased(std::array<double, 3> letter_scores,
                                                          ScoreSemantics semantics) {
  return std::unique_ptr<MockBackend>(
      new MockBackend(Rule::PositionBiased, letter_scores, {}, semantics));
}

std::unique_ptr<MockBackend> MockBackend::label_faithful(std::array<double, 3> label_scores,
                                                         ScoreSemantics semantics) {
  return std::unique_ptr<MockBackend>(
      new MockBackend(Rule::LabelFaithful, label_scores, {}, semantics));
}

std::unique_ptr<MockBackend> MockBackend::scripted(
    std::map<std::string, std::array<double, 3>> table, ScoreSemantics semantics) {
  return std::unique_ptr<MockBackend>(
      new MockBackend(Rule::Scripted, {}, std::move(table), semantics));
}

std::string MockBackend::identifier() const {
  switch (rule_) {
    case Rule::PositionBiased:
      return "mock:position-biased";
    case Rule::LabelFaithful:
      return "mock:label-faithful";
    case Rule::Scripted:
      return "mock:scripted";
  }
  return "mock";
}

OptionScores MockBackend::query(const QueryRequest& request) {
  calls_.fetch_add(1);
  OptionScores out;
  out.semantics = semantics_;
  out.provenance.backend = identifier();
  switch (rule_) {
    case Rule::PositionBiased:
      out.scores = scores_;
      break;
    case Rule::LabelFaithful:
      for (std::size_t letter = 0; letter < 3; ++letter) {
        out.scores[letter] = scores_[index_of(request.mapping.label_for(letter))];
      }
      break;
    case Rule::Scripted: {
      const std::string digest = request.prompt.digest();
      auto it = table_.find(digest);
      if (it == table_.end()) {
        throw BackendError("scripted mock has no entry for prompt " + digest.substr(0, 16), false);
      }
      out.scores = it->second;
      break;
    }
  }
  out.validate();
  return out;
}

}  // namespace hlv
