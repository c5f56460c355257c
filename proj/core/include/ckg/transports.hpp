#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ckg/gateway.hpp"

namespace ckg {

// Test double driven by a callback. Counts calls and tracks how many sends
// overlap so tests can check the gateway's concurrency bound.
class ScriptedTransport final : public Transport {
 public:
  using Responder = std::function<TransportReply(const CompletionRequest&, std::size_t call)>;

  explicit ScriptedTransport(Responder responder, std::chrono::milliseconds latency = std::chrono::milliseconds(0));

  // Replies in order; the last reply repeats once the list is exhausted.
  static std::shared_ptr<ScriptedTransport> sequence(std::vector<TransportReply> replies);
  static std::shared_ptr<ScriptedTransport> fixed(std::string text);

  TransportReply send(const CompletionRequest& req) override;

  std::size_t calls() const { return calls_.load(); }
  int peak_in_flight() const { return peak_.load(); }
  std::vector<CompletionRequest> requests() const;

 private:
  Responder responder_;
  std::chrono::milliseconds latency_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  mutable std::mutex mu_;
  std::vector<CompletionRequest> requests_;
};

struct SyntheticOptions {
  std::uint64_t seed = 0;
  // Share of HinderedBy tails that carry `invalid_marker`.
  double invalid_rate = 0.3;
  std::string invalid_marker = "乱";
  // Used when a request tag does not say how many items to emit.
  int default_items = 10;
};

// Offline stand-in for the model. Every reply is a pure function of the
// seed, the request body and how many times that body was seen before, so a
// run is reproducible and repeated prompts still yield fresh items.
//   head_distill -> numbered list of "PersonX<word>" items
//   tail_distill -> numbered list of distinct words; HinderedBy tails carry
//                   the invalid marker at `invalid_rate`
//   judge        -> "否，不合理" when the prompt holds the marker, else "是"
// Items never repeat within one reply.
class SyntheticTransport final : public Transport {
 public:
  explicit SyntheticTransport(SyntheticOptions options = {});
  TransportReply send(const CompletionRequest& req) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  SyntheticOptions options_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mu_;
  std::map<std::string, std::uint64_t> seen_;
};

// Serves replies from a transcript file, matching on the request body. Each
// body's replies are consumed in recorded order. A request with no entry left
// fails with status 404, which the gateway does not retry.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& transcript);
  TransportReply send(const CompletionRequest& req) override;
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<TransportReply>> entries_;
  std::map<std::string, std::size_t> cursor_;
};

// Forwards to `inner` and appends every exchange to a transcript file.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, const std::filesystem::path& transcript, bool append = false);
  TransportReply send(const CompletionRequest& req) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

// HTTP POST of the chat-completions body to config.endpoint_url with a
// bearer token read from the environment variable config.api_key_env_name.
// An empty variable name sends no Authorization header (local servers).
class HttpTransport final : public Transport {
 public:
  // Throws ConfigError when the credential variable is unset or the URL is
  // not http(s).
  explicit HttpTransport(const GatewayConfig& config);
  TransportReply send(const CompletionRequest& req) override;

 private:
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

}  // namespace ckg
