// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "core/corpus.hpp"
#include "core/kvconfig.hpp"
#include "core/labels.hpp"
#include "core/prompt.hpp"

namespace llambert {

inline constexpr std::string_view kGarbageResponse = "I cannot determine that.";
inline constexpr std::string_view kDefaultApiKeyEnv = "LLAMBERT_API_KEY";

enum class BackendKind { kHttpChat, kMockOracle };

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct OracleParams {
  double error_rate = 0.0;    // flip probability
  double garbage_rate = 0.0;  // unparseable-answer probability
  std::uint64_t seed = 0;
};

struct BackendConfig {
  BackendKind kind = BackendKind::kMockOracle;
  std::string base_url;
  std::string model_name = "mock-oracle";
  double temperature = 0.0;
  int max_tokens = 8;
  int max_in_flight = 4;
  RetryPolicy retry;
  OracleParams oracle;
  std::string api_key_env = std::string(kDefaultApiKeyEnv);
  int timeout_seconds = 120;

  void validate() const;
  /// Cache-key component: distinguishes endpoints, models and oracle params.
  std::string backend_id() const;
  nlohmann::json to_json() const;
};

/// Reads `backend.*` keys (kind, base_url, model, temperature, max_tokens,
/// max_in_flight, retry.max_attempts, retry.initial_backoff_ms,
/// retry.multiplier, error_rate, garbage_rate, seed, api_key_env,
/// timeout_s) over `base`.
BackendConfig backend_from_config(const KvConfig& cfg, BackendConfig base = {});

struct BackendReply {
  enum class Status { kOk, kTransport, kProtocol };
  Status status = Status::kOk;
  std::string text;    // response content when kOk
  std::string detail;  // failure description otherwise
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual BackendReply complete(const RenderedPrompt& prompt, const Document& doc,
                                const PromptSpec& spec) = 0;
  virtual const BackendConfig& config() const = 0;
};

/// Simulated annotator: per-document draw u from (seed, doc_id); u < δ gives
/// the garbage string, u < δ + ε the opposite label's canonical surface,
/// otherwise the gold label's.
std::string mock_oracle_respond(const Document& doc, std::optional<Label> gold,
                                const OracleParams& params,
                                const std::array<std::string, 2>& canonical_surfaces);

class MockOracleBackend final : public LlmBackend {
 public:
  explicit MockOracleBackend(BackendConfig cfg);
  BackendReply complete(const RenderedPrompt& prompt, const Document& doc,
                        const PromptSpec& spec) override;
  const BackendConfig& config() const override { return cfg_; }
  std::size_t calls() const { return calls_.load(); }

 private:
  BackendConfig cfg_;
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible chat completions over HTTP(S).
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);
  BackendReply complete(const RenderedPrompt& prompt, const Document& doc,
                        const PromptSpec& spec) override;
  const BackendConfig& config() const override { return cfg_; }

  /// Request body for one prompt; exposed for wire-format tests.
  nlohmann::json request_body(const RenderedPrompt& prompt, const PromptSpec& spec) const;
  /// Extracts choices[0].message.content; nullopt when the reply is malformed.
  static std::optional<std::string> extract_content(std::string_view body);

 private:
  BackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg);

struct RawResponse {
  std::string doc_id;
  std::string prompt_hash;
  std::string response_text;
  std::string backend;
  std::string timestamp;
};

/// Append-only JSONL cache keyed by (doc_id, prompt_hash, backend). An empty
/// path keeps the cache in memory only. Incomplete trailing lines from an
/// interrupted writer are ignored on load.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  std::optional<RawResponse> get(const std::string& doc_id, const std::string& prompt_hash,
                                 const std::string& backend) const;
  /// First write wins; later puts for the same key are ignored.
  void put(const RawResponse& r);
  std::size_t size() const;

 private:
  static std::string key(const std::string& doc_id, const std::string& prompt_hash,
                         const std::string& backend);
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, RawResponse> entries_;
};

struct AnnotateResult {
  std::vector<RawResponse> responses;          // ascending doc id
  std::map<std::string, std::string> failures;  // doc id -> transport | protocol
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
};

/// Sleeps between retries; injectable so tests need not wait.
using SleepFn = std::function<void(std::chrono::milliseconds)>;

AnnotateResult annotate(const std::vector<std::string>& doc_ids, const Corpus& corpus,
                        const PromptSpec& spec, LlmBackend& backend, ResponseCache& cache,
                        const SleepFn& sleep = {});

struct Discard {
  std::string reason;  // "ambiguous" | "no-label"
  bool operator==(const Discard&) const = default;
};
using ParseOutcome = std::variant<Label, Discard>;

/// Whole-word lexicon matching on the normalized response. Exactly one label
/// present wins; both or neither is a Discard. Total over arbitrary bytes.
ParseOutcome parse_response(std::string_view response_text,
                            const std::array<std::vector<std::string>, 2>& lexicon);

struct LabelSubsetResult {
  LabelSet labels;
  nlohmann::json manifest;
};

inline constexpr std::size_t kExcerptBytes = 200;

/// annotate + parse + discard. Per-document failures become discards.
LabelSubsetResult label_subset(const std::vector<std::string>& doc_ids, const Corpus& corpus,
                               const PromptSpec& spec, LlmBackend& backend, ResponseCache& cache,
                               const SleepFn& sleep = {});

}  // namespace llambert
