#include "ckg/gateway.hpp"

#include <algorithm>
#include <thread>

#include "ckg/error.hpp"

namespace ckg {

void CompletionRequest::validate() const {
  if (messages.empty()) throw RequestError(0, "completion request has no messages");
  if (temperature < 0.0 || temperature > 2.0) throw RequestError(0, "temperature must be within [0, 2]");
}

CompletionRequest CompletionRequest::user_prompt(std::string model_id, std::string prompt, double temperature,
                                                 int max_output_tokens, RequestTag tag) {
  CompletionRequest r;
  r.model_id = std::move(model_id);
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.max_output_tokens = max_output_tokens;
  r.tag = tag;
  return r;
}

std::string_view to_string(FinishReason f) {
  switch (f) {
    case FinishReason::Complete: return "complete";
    case FinishReason::Truncated: return "truncated";
    case FinishReason::Refused: return "refused";
  }
  return "?";
}

std::optional<FinishReason> parse_finish_reason(std::string_view s) {
  for (auto f : {FinishReason::Complete, FinishReason::Truncated, FinishReason::Refused}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

TransportReply TransportReply::success(std::string text, FinishReason f) {
  TransportReply r;
  r.response.text = std::move(text);
  r.response.finish_reason = f;
  return r;
}

TransportReply TransportReply::failure(int status, std::string error) {
  TransportReply r;
  r.status = status;
  r.error = std::move(error);
  return r;
}

bool is_retryable(int status) {
  return status == 0 || status == 408 || status == 409 || status == 425 || status == 429 ||
         (status >= 500 && status <= 599);
}

void SteadyClock::sleep_for(duration d) {
  if (d > duration::zero()) std::this_thread::sleep_for(d);
}

void VirtualClock::sleep_for(duration d) {
  if (d <= duration::zero()) return;
  ticks_.fetch_add(d.count());
  slept_.fetch_add(d.count());
}

std::shared_ptr<Clock> steady_clock() {
  static auto clock = std::make_shared<SteadyClock>();
  return clock;
}

RateLimiter::RateLimiter(int per_window, std::shared_ptr<Clock> clock, Clock::duration window)
    : per_window_(per_window), window_(window), clock_(std::move(clock)) {
  if (per_window_ < 1) throw ConfigError("rate limit must be at least one request per window");
}

Clock::time_point RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = clock_->now();
    // A request issued exactly `window_` ago no longer counts.
    while (!issued_.empty() && issued_.front() + window_ <= now) issued_.pop_front();
    if (static_cast<int>(issued_.size()) < per_window_) {
      issued_.push_back(now);
      return now;
    }
    const auto wait = issued_.front() + window_ - now;
    lock.unlock();
    clock_->sleep_for(wait);
    lock.lock();
  }
}

void GatewayConfig::validate() const {
  if (max_concurrent < 1) throw ConfigError("gateway.max_concurrent must be >= 1");
  if (requests_per_minute < 1) throw ConfigError("gateway.requests_per_minute must be >= 1");
  if (max_retries < 0) throw ConfigError("gateway.max_retries must be >= 0");
  if (backoff_base.count() <= 0 || backoff_cap.count() <= 0) throw ConfigError("gateway backoff must be positive");
  if (request_cap < 0) throw ConfigError("gateway.request_cap must be >= 0");
  if (max_output_tokens < 1) throw ConfigError("gateway.max_output_tokens must be >= 1");
  if (timeout.count() < 1) throw ConfigError("gateway.timeout must be positive");
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<Clock> clock,
                 std::uint64_t jitter_seed)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(config_.requests_per_minute, clock_),
      jitter_rng_(jitter_seed) {
  config_.validate();
  if (!transport_) throw ConfigError("gateway needs a transport");
  slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_concurrent);
}

Clock::duration Gateway::backoff_delay(int attempt) const {
  const auto cap = std::chrono::duration_cast<Clock::duration>(config_.backoff_cap);
  auto delay = std::chrono::duration_cast<Clock::duration>(config_.backoff_base);
  for (int i = 0; i < attempt && delay < cap; ++i) delay *= 2;
  return std::min(delay, cap);
}

Clock::duration Gateway::jittered(int attempt) {
  double u;
  {
    std::lock_guard lock(jitter_mu_);
    u = jitter_rng_.uniform();
  }
  // Equal jitter: half fixed, half random.
  const auto d = backoff_delay(attempt);
  return Clock::duration(static_cast<Clock::duration::rep>(static_cast<double>(d.count()) * (0.5 + 0.5 * u)));
}

CompletionResponse Gateway::complete(const CompletionRequest& req) {
  req.validate();
  TransportReply last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (config_.request_cap > 0) {
      if (attempts_.fetch_add(1) >= config_.request_cap) {
        attempts_.fetch_sub(1);
        throw RequestCapReached("request cap of " + std::to_string(config_.request_cap) + " reached");
      }
    } else {
      attempts_.fetch_add(1);
    }
    limiter_.acquire();
    slots_->acquire();
    try {
      last = transport_->send(req);
    } catch (...) {
      slots_->release();
      throw;
    }
    slots_->release();

    if (last.ok()) {
      if (last.response.text.empty()) last.response.finish_reason = FinishReason::Refused;
      successes_.fetch_add(1);
      return std::move(last.response);
    }
    if (!is_retryable(last.status)) {
      failures_.fetch_add(1);
      throw RequestError(last.status, "request rejected with status " + std::to_string(last.status) +
                                          (last.error.empty() ? "" : ": " + last.error));
    }
    if (attempt < config_.max_retries) {
      retries_.fetch_add(1);
      clock_->sleep_for(jittered(attempt));
    }
  }
  failures_.fetch_add(1);
  throw TransportError(last.status, "retries exhausted after " + std::to_string(config_.max_retries + 1) +
                                        " attempts, last status " + std::to_string(last.status) +
                                        (last.error.empty() ? "" : ": " + last.error));
}

std::vector<BatchResult> Gateway::complete_batch(std::span<const CompletionRequest> reqs) {
  std::vector<BatchResult> results(reqs.size());
  if (reqs.empty()) return results;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < reqs.size(); i = next.fetch_add(1)) {
      auto& r = results[i];
      r.index = i;
      try {
        r.response = complete(reqs[i]);
      } catch (const TransportError& e) {
        r.error = e.what();
        r.status = e.last_status();
      } catch (const RequestError& e) {
        r.error = e.what();
        r.status = e.status();
      } catch (const RequestCapReached& e) {
        r.error = e.what();
        r.status = 0;
        r.cap_reached = true;
      } catch (const std::exception& e) {
        r.error = e.what();
        r.status = 0;
      }
    }
  };

  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrent), reqs.size());
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return results;
}

GatewayStats Gateway::stats() const {
  return {attempts_.load(), successes_.load(), retries_.load(), failures_.load()};
}

}  // namespace ckg
