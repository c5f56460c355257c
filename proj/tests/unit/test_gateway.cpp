#include <doctest.h>

#include <algorithm>
#include <thread>

#include "ckg/error.hpp"
#include "ckg/gateway.hpp"
#include "ckg/transports.hpp"

using namespace ckg;
using namespace std::chrono_literals;

namespace {

GatewayConfig fast_config() {
  GatewayConfig c;
  c.max_concurrent = 3;
  c.requests_per_minute = 100000;
  c.max_retries = 3;
  c.backoff_base = 1ms;
  c.backoff_cap = 4ms;
  c.request_cap = 0;
  return c;
}

CompletionRequest req(std::string prompt = "hello") {
  return CompletionRequest::user_prompt("m", std::move(prompt), 0.7, 64);
}

// Checks that every window of `window` length holds at most `limit` points.
bool window_respected(std::vector<Clock::time_point> ts, Clock::duration window, int limit) {
  std::sort(ts.begin(), ts.end());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto end = std::lower_bound(ts.begin() + static_cast<std::ptrdiff_t>(i), ts.end(), ts[i] + window);
    if (end - (ts.begin() + static_cast<std::ptrdiff_t>(i)) > limit) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("scripted fixture text comes back verbatim") {
  const std::string fixture = "1. 学做饭\n2. 去跑步\n\n  3、 看书。 ";
  auto t = ScriptedTransport::fixed(fixture);
  Gateway g(fast_config(), t, std::make_shared<VirtualClock>());
  auto r = g.complete(req());
  CHECK(r.text == fixture);
  CHECK(r.finish_reason == FinishReason::Complete);
  CHECK(t->calls() == 1);
}

TEST_CASE("fail twice then succeed with max_retries 3 takes 3 attempts") {
  auto t = ScriptedTransport::sequence(
      {TransportReply::failure(503, "busy"), TransportReply::failure(0, "timeout"), TransportReply::success("ok")});
  auto clock = std::make_shared<VirtualClock>();
  Gateway g(fast_config(), t, clock);
  CHECK(g.complete(req()).text == "ok");
  CHECK(t->calls() == 3);
  CHECK(g.stats().attempts == 3);
  CHECK(g.stats().retries == 2);
  CHECK(clock->slept() > Clock::duration::zero());
}

TEST_CASE("always 429 with max_retries 2 exhausts after 3 attempts") {
  auto t = ScriptedTransport::sequence({TransportReply::failure(429, "slow down")});
  auto cfg = fast_config();
  cfg.max_retries = 2;
  Gateway g(cfg, t, std::make_shared<VirtualClock>());
  try {
    g.complete(req());
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.last_status() == 429);
  }
  CHECK(t->calls() == 3);
  CHECK(g.stats().failures == 1);
}

TEST_CASE("non-retryable 4xx is a request error after one attempt") {
  auto t = ScriptedTransport::sequence({TransportReply::failure(401, "bad key")});
  Gateway g(fast_config(), t, std::make_shared<VirtualClock>());
  try {
    g.complete(req());
    FAIL("expected RequestError");
  } catch (const RequestError& e) {
    CHECK(e.status() == 401);
  }
  CHECK(t->calls() == 1);
}

TEST_CASE("invalid requests never reach the transport") {
  auto t = ScriptedTransport::fixed("x");
  Gateway g(fast_config(), t, std::make_shared<VirtualClock>());
  CompletionRequest empty;
  CHECK_THROWS_AS(g.complete(empty), RequestError);
  auto hot = req();
  hot.temperature = 2.1;
  CHECK_THROWS_AS(g.complete(hot), RequestError);
  CHECK(t->calls() == 0);
}

TEST_CASE("empty reply text is treated as a refusal") {
  Gateway g(fast_config(), ScriptedTransport::fixed(""), std::make_shared<VirtualClock>());
  CHECK(g.complete(req()).finish_reason == FinishReason::Refused);
}

TEST_CASE("batch of 10 with max_concurrent 3 never exceeds 3 in flight") {
  auto t = std::make_shared<ScriptedTransport>(
      [](const CompletionRequest& r, std::size_t) { return TransportReply::success(r.messages[0].content); }, 20ms);
  Gateway g(fast_config(), t);
  std::vector<CompletionRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(req("p" + std::to_string(i)));
  auto results = g.complete_batch(reqs);
  REQUIRE(results.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(results[i].index == i);
    REQUIRE(results[i].ok());
    CHECK(results[i].response->text == "p" + std::to_string(i));
  }
  CHECK(t->peak_in_flight() <= 3);
  CHECK(t->peak_in_flight() >= 2);
}

TEST_CASE("one poisoned request fails alone at its own index") {
  auto t = std::make_shared<ScriptedTransport>([](const CompletionRequest& r, std::size_t) {
    if (r.messages[0].content == "poison") return TransportReply::failure(400, "bad");
    return TransportReply::success("fine");
  });
  Gateway g(fast_config(), t, std::make_shared<VirtualClock>());
  std::vector<CompletionRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(req(i == 6 ? "poison" : "p" + std::to_string(i)));
  auto results = g.complete_batch(reqs);
  REQUIRE(results.size() == 10);
  int ok = 0;
  for (const auto& r : results) ok += r.ok();
  CHECK(ok == 9);
  CHECK_FALSE(results[6].ok());
  CHECK(results[6].status == 400);
  CHECK_FALSE(results[6].error.empty());
}

TEST_CASE("empty batch yields an empty list") {
  auto t = ScriptedTransport::fixed("x");
  Gateway g(fast_config(), t, std::make_shared<VirtualClock>());
  CHECK(g.complete_batch({}).empty());
  CHECK(t->calls() == 0);
}

TEST_CASE("rate limiter keeps every 60 s window within the limit") {
  for (int limit : {1, 5, 17}) {
    auto clock = std::make_shared<VirtualClock>();
    RateLimiter rl(limit, clock);
    std::vector<Clock::time_point> ts;
    for (int i = 0; i < limit * 6 + 3; ++i) {
      ts.push_back(rl.acquire());
      if (i % 4 == 0) clock->advance(7s);
    }
    CHECK(window_respected(ts, 60s, limit));
    CHECK_FALSE(window_respected(ts, 60s, limit - 1));
  }
}

TEST_CASE("rate limiter shared by several threads still respects the window") {
  auto clock = std::make_shared<VirtualClock>();
  RateLimiter rl(7, clock);
  std::mutex mu;
  std::vector<Clock::time_point> ts;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w) {
      pool.emplace_back([&] {
        for (int i = 0; i < 10; ++i) {
          auto at = rl.acquire();
          std::lock_guard lock(mu);
          ts.push_back(at);
        }
      });
    }
  }
  REQUIRE(ts.size() == 40);
  CHECK(window_respected(ts, 60s, 7));
}

TEST_CASE("gateway issues at most requests_per_minute in any window") {
  auto clock = std::make_shared<VirtualClock>();
  std::vector<Clock::time_point> sent;
  auto t = std::make_shared<ScriptedTransport>([&](const CompletionRequest&, std::size_t) {
    sent.push_back(clock->now());
    return TransportReply::success("ok");
  });
  auto cfg = fast_config();
  cfg.requests_per_minute = 7;
  cfg.max_concurrent = 1;
  Gateway g(cfg, t, clock);
  std::vector<CompletionRequest> reqs(40, req());
  auto results = g.complete_batch(reqs);
  for (const auto& r : results) CHECK(r.ok());
  REQUIRE(sent.size() == 40);
  CHECK(window_respected(sent, 60s, 7));
  CHECK(clock->now().time_since_epoch() >= 5min);
}

TEST_CASE("request cap stops issuing and counts retries as requests") {
  auto cfg = fast_config();
  cfg.request_cap = 5;
  auto t = ScriptedTransport::fixed("x");
  Gateway g(cfg, t, std::make_shared<VirtualClock>());
  for (int i = 0; i < 5; ++i) g.complete(req());
  CHECK_THROWS_AS(g.complete(req()), RequestCapReached);
  CHECK(t->calls() == 5);
  CHECK(g.requests_issued() == 5);

  auto flaky = ScriptedTransport::sequence({TransportReply::failure(500, "x"), TransportReply::failure(500, "x"),
                                            TransportReply::success("ok")});
  cfg.request_cap = 2;
  Gateway g2(cfg, flaky, std::make_shared<VirtualClock>());
  CHECK_THROWS_AS(g2.complete(req()), RequestCapReached);
  CHECK(flaky->calls() == 2);

  Gateway g3(cfg, ScriptedTransport::fixed("x"), std::make_shared<VirtualClock>());
  auto results = g3.complete_batch(std::vector<CompletionRequest>(4, req()));
  int capped = 0;
  for (const auto& r : results) capped += r.cap_reached;
  CHECK(capped == 2);
}

TEST_CASE("backoff doubles up to the cap and jitter stays within half to full delay") {
  auto cfg = fast_config();
  cfg.backoff_base = 500ms;
  cfg.backoff_cap = 30s;
  cfg.max_retries = 8;
  Gateway g(cfg, ScriptedTransport::fixed("x"), std::make_shared<VirtualClock>());
  CHECK(g.backoff_delay(0) == 500ms);
  CHECK(g.backoff_delay(1) == 1000ms);
  CHECK(g.backoff_delay(3) == 4000ms);
  CHECK(g.backoff_delay(6) == 30s);
  CHECK(g.backoff_delay(40) == 30s);

  auto clock = std::make_shared<VirtualClock>();
  auto t = ScriptedTransport::sequence({TransportReply::failure(503, "busy")});
  cfg.max_retries = 4;
  Gateway g2(cfg, t, clock);
  CHECK_THROWS_AS(g2.complete(req()), TransportError);
  Clock::duration full = 500ms + 1000ms + 2000ms + 4000ms;
  CHECK(clock->slept() >= full / 2);
  CHECK(clock->slept() <= full);
}

TEST_CASE("configuration bounds are enforced") {
  auto cfg = fast_config();
  cfg.max_concurrent = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = fast_config();
  cfg.requests_per_minute = 0;
  CHECK_THROWS_AS(Gateway(cfg, ScriptedTransport::fixed("x")), ConfigError);
  CHECK_THROWS_AS(Gateway(fast_config(), nullptr), ConfigError);
  CHECK(is_retryable(429));
  CHECK(is_retryable(502));
  CHECK_FALSE(is_retryable(404));
}
