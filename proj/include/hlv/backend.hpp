#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hlv/prompting.hpp"
#include "hlv/types.hpp"

namespace hlv {

enum class ScoreSemantics {
  RawLogit,
  LogProbability,
};

std::string_view to_string(ScoreSemantics s) noexcept;

struct ScoreProvenance {
  std::string backend;
  /// JSON text of the first-position candidate record the scores came from.
  std::string raw;
  /// Letters whose score was substituted by the floor value.
  std::vector<char> floored_letters;

  bool floored() const noexcept { return !floored_letters.empty(); }
};

/// First-token scores for option letters A, B, C.
struct OptionScores {
  std::array<double, 3> scores{};
  ScoreSemantics semantics = ScoreSemantics::RawLogit;
  ScoreProvenance provenance;

  /// Throws BackendError if a score is non-finite, or positive under
  /// log-probability semantics.
  void validate() const;
};

enum class WireFormat {
  /// Chat-completion response with per-token top log-probabilities.
  ChatLogprobs,
  /// Local inference server returning raw first-token logits.
  FullLogits,
};

std::string_view to_string(WireFormat w) noexcept;
WireFormat parse_wire_format(std::string_view name);

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base_seconds = 0.5;
};

struct BackendConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model;
  /// Name of the environment variable holding the bearer token. Unset or
  /// empty variables mean no Authorization header.
  std::string token_env = "HLV_API_KEY";
  int top_candidates = 20;
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
  RetryPolicy retry;
  WireFormat wire = WireFormat::ChatLogprobs;
  /// Substitute a floor for letters missing from a truncated top-k list.
  bool allow_floor = true;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Digest of the fields that change backend output (not endpoint, timeouts
  /// or concurrency), used in cache keys.
  std::string output_digest() const;
};

/// What the estimator asks a backend. The mapping is carried for mock rules
/// that score by label; remote backends ignore it.
struct QueryRequest {
  PromptText prompt;
  OptionMapping mapping = OptionMapping::identity();
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual OptionScores query(const QueryRequest& request) = 0;
  virtual std::string identifier() const = 0;
};

struct TokenCandidate {
  std::string token;
  double score = 0.0;
};

/// Picks A/B/C out of a first-position candidate list. Exact letters win over
/// single-leading-whitespace variants. Under log-probability semantics a
/// missing letter is floored at (min candidate score - 1) when allowed;
/// otherwise MissingOptionTokenError is thrown.
OptionScores scores_from_candidates(const std::vector<TokenCandidate>& candidates,
                                    ScoreSemantics semantics, const std::string& backend_id,
                                    bool allow_floor, const std::string& raw_record);

/// Body for a chat-completion POST: greedy, one output token, top-k logprobs.
nlohmann::json build_chat_request(const PromptText& prompt, const BackendConfig& config);

/// Normalizes a raw response body. ChatLogprobs accepts both the chat
/// (`logprobs.content[0].top_logprobs`) and legacy completion
/// (`logprobs.top_logprobs[0]`) shapes; FullLogits expects
/// `first_token_logits` as a token->logit object or a list of
/// {token, logit} entries.
OptionScores parse_backend_response(const std::string& body, WireFormat wire,
                                    const std::string& backend_id, bool allow_floor);

/// FIFO-fair counting semaphore bounding in-flight requests.
class FairSemaphore {
 public:
  explicit FairSemaphore(int capacity);
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int capacity_;
  int active_ = 0;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t now_serving_ = 0;
};

/// Sends one request body and returns the response body. Implementations
/// throw BackendError (retryable for network errors, timeouts, 429 and 5xx).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string post(const std::string& body) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(BackendConfig config);
  std::string post(const std::string& body) override;

 private:
  BackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Append-only JSONL store of raw responses keyed by
/// (prompt digest, model, config digest). Thread-safe.
class ResponseCache {
 public:
  /// Loads existing entries; a missing file is an empty cache.
  explicit ResponseCache(std::filesystem::path path);

  static std::string make_key(const std::string& prompt_digest, const std::string& model,
                              const std::string& config_digest);

  std::optional<std::string> find(const std::string& key) const;
  void insert(const std::string& key, const std::string& prompt_digest,
              const std::string& model, const std::string& config_digest,
              const std::string& response_body);
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
};

struct BackendStats {
  std::uint64_t cache_hits = 0;
  std::uint64_t network_calls = 0;
  std::uint64_t retries = 0;
};

/// Remote backend: cache lookup, then POST with retry under the in-flight
/// cap, then normalization into OptionScores. With `offline` set a cache miss
/// is an error and the transport is never used.
class ChatCompletionBackend final : public Backend {
 public:
  ChatCompletionBackend(BackendConfig config, std::shared_ptr<Transport> transport,
                        std::shared_ptr<ResponseCache> cache = nullptr, bool offline = false);

  OptionScores query(const QueryRequest& request) override;
  std::string identifier() const override;
  BackendStats stats() const;

 private:
  std::string fetch_with_retry(const std::string& body);

  BackendConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  bool offline_;
  FairSemaphore in_flight_;
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> network_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
};

/// Deterministic in-process backend for tests and dry runs.
class MockBackend final : public Backend {
 public:
  /// Same scores for letters A, B, C regardless of what they mean.
  static std::unique_ptr<MockBackend> position_biased(std::array<double, 3> letter_scores,
                                                      ScoreSemantics semantics = ScoreSemantics::RawLogit);
  /// Scores depend only on the label each letter stands for.
  static std::unique_ptr<MockBackend> label_faithful(std::array<double, 3> label_scores,
                                                     ScoreSemantics semantics = ScoreSemantics::RawLogit);
  /// Explicit table keyed by prompt digest; unknown prompts are an error.
  static std::unique_ptr<MockBackend> scripted(std::map<std::string, std::array<double, 3>> table,
                                               ScoreSemantics semantics = ScoreSemantics::RawLogit);

  OptionScores query(const QueryRequest& request) override;
  std::string identifier() const override;

  std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  enum class Rule { PositionBiased, LabelFaithful, Scripted };

  MockBackend(Rule rule, std::array<double, 3> scores,
              std::map<std::string, std::array<double, 3>> table, ScoreSemantics semantics);

  Rule rule_;
  std::array<double, 3> scores_;
  std::map<std::string, std::array<double, 3>> table_;
  ScoreSemantics semantics_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace hlv
