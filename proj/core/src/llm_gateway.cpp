#include "faultline/llm_gateway.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#if __has_include(<openssl/ssl.h>) && defined(FAULTLINE_WITH_OPENSSL)
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "faultline/errors.hpp"
#include "faultline/harness.hpp"

namespace faultline::llm {

using nlohmann::json;

std::vector<std::string> validate_profile(const EndpointProfile& p) {
  std::vector<std::string> out;
  if (p.base_url.find("://") == std::string::npos) out.emplace_back("base_url must include a scheme");
  if (p.model.empty()) out.emplace_back("model is empty");
  if (p.temperature < 0.0) out.emplace_back("temperature must be >= 0");
  if (p.max_tokens <= 0) out.emplace_back("max_tokens must be positive");
  if (p.retry.max_retries < 0) out.emplace_back("retries must be >= 0");
  if (p.retry.multiplier < 1.0) out.emplace_back("backoff multiplier must be >= 1");
  if (p.timeout.count() <= 0) out.emplace_back("timeout must be positive");
  if (p.max_in_flight == 0 || p.max_in_flight > 1024) out.emplace_back("max_in_flight must lie in [1, 1024]");
  return out;
}

void UsageLedger::record(const Completion& c) noexcept {
  calls_.fetch_add(1, std::memory_order_relaxed);
  if (c.from_cache) cache_hits_.fetch_add(1, std::memory_order_relaxed);
  http_requests_.fetch_add(static_cast<std::uint64_t>(c.attempts), std::memory_order_relaxed);
  if (c.attempts > 1) retries_.fetch_add(static_cast<std::uint64_t>(c.attempts - 1), std::memory_order_relaxed);
  prompt_tokens_.fetch_add(c.usage.prompt_tokens, std::memory_order_relaxed);
  completion_tokens_.fetch_add(c.usage.completion_tokens, std::memory_order_relaxed);
}

void UsageLedger::record_failure(int attempts) noexcept {
  calls_.fetch_add(1, std::memory_order_relaxed);
  http_requests_.fetch_add(static_cast<std::uint64_t>(attempts), std::memory_order_relaxed);
  if (attempts > 1) retries_.fetch_add(static_cast<std::uint64_t>(attempts - 1), std::memory_order_relaxed);
}

UsageSnapshot UsageLedger::snapshot() const noexcept {
  return {calls_.load(), http_requests_.load(), retries_.load(),
          cache_hits_.load(), prompt_tokens_.load(), completion_tokens_.load()};
}

std::optional<CacheMode> parse_cache_mode(std::string_view s) noexcept {
  if (s == "off") return CacheMode::off;
  if (s == "record") return CacheMode::record;
  if (s == "replay") return CacheMode::replay;
  return std::nullopt;
}

std::uint64_t cache_key(const EndpointProfile& p, std::span<const ChatMessage> messages) {
  json j;
  j["base_url"] = p.base_url;
  j["model"] = p.model;
  j["temperature"] = p.temperature;
  j["max_tokens"] = p.max_tokens;
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  j["messages"] = std::move(msgs);
  return fnv1a64(j.dump());
}

namespace {

std::string hex_key(std::uint64_t key) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
  return buf;
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_url(const std::string& base_url) {
  const std::size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw config_error("base_url must include a scheme: " + base_url);
  const std::size_t path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

std::string read_credential(const std::string& env_name) {
  if (env_name.empty()) return {};
  const char* v = std::getenv(env_name.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace

ReplayCache::ReplayCache(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      entries_[std::stoull(j.at("key").get<std::string>(), nullptr, 16)] = j.at("text").get<std::string>();
    } catch (const std::exception& e) {
      throw parse_error("replay cache " + file_.string() + ": " + e.what(), lineno);
    }
  }
}

std::optional<std::string> ReplayCache::lookup(std::uint64_t key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayCache::store(std::uint64_t key, std::string text) {
  std::lock_guard lock(mu_);
  entries_[key] = std::move(text);
}

void ReplayCache::flush() const {
  if (file_.empty()) return;
  std::lock_guard lock(mu_);
  std::ofstream out(file_, std::ios::trunc);
  for (const auto& [k, v] : entries_) out << json{{"key", hex_key(k)}, {"text", v}}.dump() << '\n';
}

std::size_t ReplayCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

ChatClient::ChatClient(EndpointProfile profile, std::shared_ptr<ReplayCache> cache, CacheMode mode)
    : profile_(std::move(profile)),
      cache_(std::move(cache)),
      mode_(mode),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(profile_.max_in_flight, 1, 1024))) {
  auto problems = validate_profile(profile_);
  if (!problems.empty()) throw config_error("invalid endpoint profile: " + problems.front());
  if (mode_ != CacheMode::off && !cache_) throw config_error("cache mode requires a replay cache");
}

ChatClient::~ChatClient() = default;

void ChatClient::pace() {
  if (profile_.min_interval.count() <= 0) return;
  std::unique_lock lock(pace_mu_);
  const auto now = std::chrono::steady_clock::now();
  const auto ready = last_request_ + profile_.min_interval;
  if (now < ready) std::this_thread::sleep_until(ready);
  last_request_ = std::chrono::steady_clock::now();
}

Completion ChatClient::complete(std::span<const ChatMessage> messages) {
  const std::uint64_t key = cache_key(profile_, messages);
  if (mode_ != CacheMode::off) {
    if (auto hit = cache_->lookup(key)) {
      Completion c{*hit, {}, 0, true};
      ledger_.record(c);
      spdlog::debug("llm cache hit {}", hex_key(key));
      return c;
    }
    if (mode_ == CacheMode::replay) {
      ledger_.record_failure(0);
      throw transport_error("replay cache miss for key " + hex_key(key), false);
    }
  }
  Completion c = request_live(messages);
  if (mode_ == CacheMode::record) cache_->store(key, c.text);
  return c;
}

Completion ChatClient::request_live(std::span<const ChatMessage> messages) {
  const Endpoint ep = split_url(profile_.base_url);
  const std::string secret = read_credential(profile_.credential_env);

  json body;
  body["model"] = profile_.model;
  body["temperature"] = profile_.temperature;
  body["max_tokens"] = profile_.max_tokens;
  body["n"] = 1;
  if (profile_.seed) body["seed"] = *profile_.seed;
  body["messages"] = json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!secret.empty()) headers.emplace("Authorization", "Bearer " + secret);

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  auto backoff = profile_.retry.initial_backoff;
  int attempts = 0;
  std::string last_error;
  while (true) {
    ++attempts;
    pace();
    httplib::Client cli(ep.scheme_host_port);
    const auto secs = profile_.timeout.count() / 1000;
    const auto usecs = (profile_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    spdlog::debug("llm request #{} to {}{}: {}", attempts, ep.scheme_host_port, ep.path, redact(payload, secret));

    auto res = cli.Post(ep.path, headers, payload, "application/json");
    bool retryable = true;
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      spdlog::debug("llm response {}: {}", res->status, redact(res->body, secret));
      Completion c;
      c.attempts = attempts;
      try {
        const json j = json::parse(res->body);
        c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
          c.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0ULL);
          c.usage.completion_tokens = j["usage"].value("completion_tokens", 0ULL);
        }
      } catch (const std::exception& e) {
        ledger_.record_failure(attempts);
        throw transport_error(std::string("malformed completion body: ") + e.what(), false);
      }
      ledger_.record(c);
      return c;
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      retryable = false;
      last_error = "HTTP " + std::to_string(res->status) + ": " + redact(res->body, secret);
    }

    if (!retryable) {
      ledger_.record_failure(attempts);
      throw config_error("endpoint rejected request (" + last_error + ")");
    }
    if (attempts > profile_.retry.max_retries) {
      ledger_.record_failure(attempts);
      throw transport_error("giving up after " + std::to_string(attempts) + " attempts: " + last_error, true);
    }
    spdlog::debug("llm retry after {}: backing off {} ms", last_error, backoff.count());
    std::this_thread::sleep_for(backoff);
    backoff = std::min(profile_.retry.max_backoff,
                       std::chrono::milliseconds(static_cast<std::int64_t>(
                           static_cast<double>(backoff.count()) * profile_.retry.multiplier)));
  }
}

Completion complete(const EndpointProfile& profile, std::span<const ChatMessage> messages) {
  ChatClient client(profile);
  return client.complete(messages);
}

std::string redact(std::string text, std::string_view secret) {
  if (secret.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), "***");
    pos += 3;
  }
  return text;
}

}  // namespace faultline::llm
