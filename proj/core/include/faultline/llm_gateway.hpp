#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// The only module allowed to touch the network. Speaks the OpenAI-compatible
// chat-completions wire shape and consumes the first choice.
namespace faultline::llm {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
};

struct EndpointProfile {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "default";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed = 0;  // sent when set; endpoints may ignore it
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};
  // Name of the environment variable holding the bearer token. The token itself
  // never lives in the profile, so serializing a profile cannot leak it.
  std::string credential_env = "FAULTLINE_API_KEY";
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds min_interval{0};  // per-endpoint spacing between requests
};

std::vector<std::string> validate_profile(const EndpointProfile& p);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

struct Completion {
  std::string text;
  TokenUsage usage;
  int attempts = 0;  // HTTP requests made; 0 when served from the replay cache
  bool from_cache = false;
};

struct UsageSnapshot {
  std::uint64_t calls = 0;
  std::uint64_t http_requests = 0;
  std::uint64_t retries = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

// Budget side channel, shared by every caller of one client.
class UsageLedger {
 public:
  void record(const Completion& c) noexcept;
  void record_failure(int attempts) noexcept;
  UsageSnapshot snapshot() const noexcept;

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> http_requests_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> prompt_tokens_{0};
  std::atomic<std::uint64_t> completion_tokens_{0};
};

enum class CacheMode { off, record, replay };

std::optional<CacheMode> parse_cache_mode(std::string_view s) noexcept;

// Hash of everything that determines a response: endpoint, model, sampling
// parameters and the messages. The credential is not part of it.
std::uint64_t cache_key(const EndpointProfile& p, std::span<const ChatMessage> messages);

/// Recorded responses, persisted as JSONL {"key": "<hex>", "text": "..."} sorted by key.
class ReplayCache {
 public:
  ReplayCache() = default;
  explicit ReplayCache(std::filesystem::path file);

  std::optional<std::string> lookup(std::uint64_t key) const;
  void store(std::uint64_t key, std::string text);
  void flush() const;  // no-op without a backing file
  std::size_t size() const;

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::string> entries_;
};

/// Thread-safe chat client. Transient failures (connection errors, timeouts,
/// HTTP 429 and 5xx) are retried with exponential backoff; other 4xx answers
/// raise config_error immediately; exhausted retries raise transport_error.
class ChatClient {
 public:
  explicit ChatClient(EndpointProfile profile, std::shared_ptr<ReplayCache> cache = nullptr,
                      CacheMode mode = CacheMode::off);
  ~ChatClient();

  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  Completion complete(std::span<const ChatMessage> messages);

  const EndpointProfile& profile() const noexcept { return profile_; }
  UsageSnapshot usage() const noexcept { return ledger_.snapshot(); }
  std::string id() const { return "llm:" + profile_.model; }

 private:
  Completion request_live(std::span<const ChatMessage> messages);
  void pace();

  EndpointProfile profile_;
  std::shared_ptr<ReplayCache> cache_;
  CacheMode mode_;
  UsageLedger ledger_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex pace_mu_;
  std::chrono::steady_clock::time_point last_request_{};
};

/// One-shot convenience wrapper around ChatClient.
Completion complete(const EndpointProfile& profile, std::span<const ChatMessage> messages);

std::string redact(std::string text, std::string_view secret);

}  // namespace faultline::llm
