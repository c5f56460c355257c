#pragma once

#include <string>
#include <string_view>

#include "ckg/gateway.hpp"

namespace ckg::wire {

// Chat-completions request body: {"model", "messages", "temperature", "max_tokens"}.
std::string chat_request_body(const CompletionRequest& req);

// Parses choices[0].message.content and finish_reason ("stop" -> complete,
// "length" -> truncated, "content_filter" -> refused) plus usage counts.
// Throws TransportError(502, ...) on a body that does not have that shape.
CompletionResponse parse_chat_response(std::string_view body);

// Inverse of parse_chat_response, used by the loopback test server.
std::string chat_response_body(const CompletionResponse& resp);

// Stable identity of a request for transcripts: SHA-256 of the wire body.
std::string request_key(const CompletionRequest& req);

// One transcript line: {"key", "request", "status", "response", "error"}.
std::string transcript_line(const CompletionRequest& req, const TransportReply& reply);

struct TranscriptEntry {
  std::string key;
  TransportReply reply;
};
TranscriptEntry parse_transcript_line(std::string_view line);

}  // namespace ckg::wire
