#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "ckg/random.hpp"
#include "ckg/schema.hpp"

namespace ckg {

struct ChatMessage {
  std::string role;
  std::string content;
};

// Routing hints for mocks and transcripts; never sent over the wire.
struct RequestTag {
  PromptKind kind = PromptKind::HeadDistill;
  int expected_items = 0;
  std::optional<Relation> relation;
};

struct CompletionRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  RequestTag tag;

  // Throws RequestError(0, ...) on an empty message list or a temperature
  // outside [0, 2].
  void validate() const;

  static CompletionRequest user_prompt(std::string model_id, std::string prompt, double temperature,
                                       int max_output_tokens, RequestTag tag = {});
};

enum class FinishReason : std::uint8_t { Complete, Truncated, Refused };
std::string_view to_string(FinishReason f);
std::optional<FinishReason> parse_finish_reason(std::string_view s);

struct Usage {
  int input_tokens = 0;
  int output_tokens = 0;
};

struct CompletionResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Complete;
  Usage usage;
};

// One attempt's outcome as seen by a transport. status 200 means success,
// 0 means the request never produced an HTTP status (timeout, reset).
struct TransportReply {
  int status = 200;
  CompletionResponse response;
  std::string error;

  bool ok() const { return status == 200; }
  static TransportReply success(std::string text, FinishReason f = FinishReason::Complete);
  static TransportReply failure(int status, std::string error);
};

// Transient statuses worth retrying: 0 (no response), 408, 409, 425, 429, 5xx.
bool is_retryable(int status);

class Transport {
 public:
  virtual ~Transport() = default;
  // Must be safe to call from several threads at once.
  virtual TransportReply send(const CompletionRequest& req) = 0;
};

class Clock {
 public:
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override;
};

// Time advances only when somebody sleeps; sleeping returns immediately.
class VirtualClock final : public Clock {
 public:
  time_point now() override { return time_point(duration(ticks_.load())); }
  void sleep_for(duration d) override;
  void advance(duration d) { sleep_for(d); }
  duration slept() const { return duration(slept_.load()); }

 private:
  std::atomic<std::int64_t> ticks_{0};
  std::atomic<std::int64_t> slept_{0};
};

std::shared_ptr<Clock> steady_clock();

// Sliding-log limiter: at most `per_window` acquisitions in any window of
// length `window`.
class RateLimiter {
 public:
  RateLimiter(int per_window, std::shared_ptr<Clock> clock, Clock::duration window = std::chrono::minutes(1));
  // Blocks (via the clock) until a slot is free, then takes it.
  Clock::time_point acquire();

 private:
  int per_window_;
  Clock::duration window_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

struct GatewayConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env_name = "OPENAI_API_KEY";
  std::string model_id = "gpt-3.5-turbo";
  int max_concurrent = 4;
  int requests_per_minute = 60;
  int max_retries = 5;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30000};
  // Hard cap on attempts issued through one gateway; 0 disables the cap.
  std::int64_t request_cap = 1000;
  int max_output_tokens = 1024;
  std::chrono::seconds timeout{60};

  // Throws ConfigError on non-positive bounds.
  void validate() const;
};

struct GatewayStats {
  std::int64_t attempts = 0;
  std::int64_t successes = 0;
  std::int64_t retries = 0;
  std::int64_t failures = 0;
};

struct BatchResult {
  std::size_t index = 0;
  std::optional<CompletionResponse> response;
  std::string error;
  // Last status seen for failures; 200 on success.
  int status = 200;
  bool cap_reached = false;

  bool ok() const { return response.has_value(); }
};

class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<Clock> clock = steady_clock(),
          std::uint64_t jitter_seed = 0);

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Retries transient failures with capped exponential backoff and jitter.
  // Throws TransportError when retries run out, RequestError on a
  // non-retryable status, RequestCapReached when the cap is hit.
  CompletionResponse complete(const CompletionRequest& req);

  // At most max_concurrent requests in flight; results are ordered by index
  // and a failing item never aborts the others.
  std::vector<BatchResult> complete_batch(std::span<const CompletionRequest> reqs);

  // Delay before retry number `attempt` (0-based), before jitter.
  Clock::duration backoff_delay(int attempt) const;

  GatewayStats stats() const;
  const GatewayConfig& config() const { return config_; }
  std::int64_t requests_issued() const { return attempts_.load(); }
  // Lets a resumed run count attempts made before the restart.
  void preload_request_count(std::int64_t n) { attempts_.store(n); }

 private:
  Clock::duration jittered(int attempt);

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<Clock> clock_;
  RateLimiter limiter_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::mutex jitter_mu_;
  Rng jitter_rng_;
  std::atomic<std::int64_t> attempts_{0};
  std::atomic<std::int64_t> successes_{0};
  std::atomic<std::int64_t> retries_{0};
  std::atomic<std::int64_t> failures_{0};
};

}  // namespace ckg
