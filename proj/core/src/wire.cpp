#include "ckg/wire.hpp"

#include <json.hpp>

#include "ckg/digest.hpp"
#include "ckg/error.hpp"

namespace ckg::wire {

namespace {

using nlohmann::json;

json request_json(const CompletionRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", req.model_id},
          {"messages", std::move(messages)},
          {"temperature", req.temperature},
          {"max_tokens", req.max_output_tokens}};
}

FinishReason finish_from_wire(const json& v) {
  if (!v.is_string()) return FinishReason::Complete;
  const auto s = v.get<std::string>();
  if (s == "length") return FinishReason::Truncated;
  if (s == "content_filter") return FinishReason::Refused;
  return FinishReason::Complete;
}

std::string finish_to_wire(FinishReason f) {
  switch (f) {
    case FinishReason::Complete: return "stop";
    case FinishReason::Truncated: return "length";
    case FinishReason::Refused: return "content_filter";
  }
  return "stop";
}

json response_json(const CompletionResponse& r) {
  return {{"text", r.text},
          {"finish_reason", std::string(to_string(r.finish_reason))},
          {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}}};
}

}  // namespace

std::string chat_request_body(const CompletionRequest& req) { return request_json(req).dump(); }

CompletionResponse parse_chat_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(502, std::string("malformed completion body: ") + e.what());
  }
  try {
    const auto& choice = j.at("choices").at(0);
    CompletionResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_string() ? content.get<std::string>() : std::string();
    r.finish_reason = finish_from_wire(choice.value("finish_reason", json()));
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      r.usage.input_tokens = u->value("prompt_tokens", 0);
      r.usage.output_tokens = u->value("completion_tokens", 0);
    }
    if (r.text.empty()) r.finish_reason = FinishReason::Refused;
    return r;
  } catch (const json::exception& e) {
    throw TransportError(502, std::string("unexpected completion body: ") + e.what());
  }
}

std::string chat_response_body(const CompletionResponse& resp) {
  json j = {{"object", "chat.completion"},
            {"choices", json::array({{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", resp.text}}},
                                      {"finish_reason", finish_to_wire(resp.finish_reason)}}})},
            {"usage",
             {{"prompt_tokens", resp.usage.input_tokens},
              {"completion_tokens", resp.usage.output_tokens},
              {"total_tokens", resp.usage.input_tokens + resp.usage.output_tokens}}}};
  return j.dump();
}

std::string request_key(const CompletionRequest& req) { return sha256_hex(chat_request_body(req)); }

std::string transcript_line(const CompletionRequest& req, const TransportReply& reply) {
  json j = {{"key", request_key(req)}, {"request", request_json(req)}, {"status", reply.status}};
  if (reply.ok()) {
    j["response"] = response_json(reply.response);
  } else {
    j["error"] = reply.error;
  }
  return j.dump();
}

TranscriptEntry parse_transcript_line(std::string_view line) {
  try {
    auto j = json::parse(line);
    TranscriptEntry e;
    e.key = j.at("key").get<std::string>();
    e.reply.status = j.at("status").get<int>();
    if (e.reply.ok()) {
      const auto& r = j.at("response");
      e.reply.response.text = r.at("text").get<std::string>();
      auto f = parse_finish_reason(r.value("finish_reason", std::string("complete")));
      e.reply.response.finish_reason = f.value_or(FinishReason::Complete);
      if (auto u = r.find("usage"); u != r.end()) {
        e.reply.response.usage.input_tokens = u->value("input_tokens", 0);
        e.reply.response.usage.output_tokens = u->value("output_tokens", 0);
      }
    } else {
      e.reply.error = j.value("error", std::string());
    }
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed transcript line: ") + ex.what());
  }
}

}  // namespace ckg::wire
