#include "ckg/transports.hpp"

#include <set>
#include <thread>

#include "ckg/error.hpp"
#include "ckg/text.hpp"
#include "ckg/wire.hpp"

namespace ckg {

ScriptedTransport::ScriptedTransport(Responder responder, std::chrono::milliseconds latency)
    : responder_(std::move(responder)), latency_(latency) {}

std::shared_ptr<ScriptedTransport> ScriptedTransport::sequence(std::vector<TransportReply> replies) {
  if (replies.empty()) throw ConfigError("scripted sequence needs at least one reply");
  return std::make_shared<ScriptedTransport>(
      [replies = std::move(replies)](const CompletionRequest&, std::size_t call) {
        return replies[std::min(call, replies.size() - 1)];
      });
}

std::shared_ptr<ScriptedTransport> ScriptedTransport::fixed(std::string text) {
  return sequence({TransportReply::success(std::move(text))});
}

TransportReply ScriptedTransport::send(const CompletionRequest& req) {
  const auto call = calls_.fetch_add(1);
  {
    std::lock_guard lock(mu_);
    requests_.push_back(req);
  }
  const int now = in_flight_.fetch_add(1) + 1;
  int peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  TransportReply reply;
  try {
    reply = responder_(req, call);
  } catch (...) {
    in_flight_.fetch_sub(1);
    throw;
  }
  in_flight_.fetch_sub(1);
  return reply;
}

std::vector<CompletionRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

namespace {

// Characters for synthetic words. Disjoint from the shipped name pool so that
// restoring the subject placeholder never rewrites part of a synthetic word.
constexpr std::string_view kSyntheticChars =
    "吃喝读写画唱跑跳游爬买卖洗扫修种烤煮切搬借还寄送拍看听说想学练考拿放"
    "开关推拉追躲等找问答笑哭睡醒坐站穿脱戴摘擦晒收拆装";

std::vector<std::string_view> synthetic_alphabet() {
  static const auto chars = text::split_code_points(kSyntheticChars);
  return chars;
}

std::string synthetic_word(Rng& rng) {
  const auto& alphabet = synthetic_alphabet();
  const auto len = 2 + rng.below(3);
  std::string w;
  for (std::uint64_t i = 0; i < len; ++i) w += alphabet[rng.below(alphabet.size())];
  return w;
}

std::string numbered_reply(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + items[i] + "\n";
  }
  return out;
}

}  // namespace

SyntheticTransport::SyntheticTransport(SyntheticOptions options) : options_(std::move(options)) {}

TransportReply SyntheticTransport::send(const CompletionRequest& req) {
  calls_.fetch_add(1);
  const auto key = wire::request_key(req);
  std::uint64_t occurrence;
  {
    std::lock_guard lock(mu_);
    occurrence = seen_[key]++;
  }
  Rng rng(text::fnv1a64(key, options_.seed ^ 0xcbf29ce484222325ULL) ^ (occurrence * 0x9e3779b97f4a7c15ULL));

  const int n = req.tag.expected_items > 0 ? req.tag.expected_items : options_.default_items;
  const auto& prompt = req.messages.back().content;

  switch (req.tag.kind) {
    case PromptKind::HeadDistill: {
      std::set<std::string> seen;
      std::vector<std::string> items;
      while (static_cast<int>(items.size()) < n) {
        auto item = std::string(kPersonPlaceholder) + synthetic_word(rng);
        if (seen.insert(item).second) items.push_back(std::move(item));
      }
      return TransportReply::success(numbered_reply(items));
    }
    case PromptKind::TailDistill: {
      const bool hindered = req.tag.relation == Relation::HinderedBy;
      std::set<std::string> seen;
      std::vector<std::string> items;
      while (static_cast<int>(items.size()) < n) {
        auto item = synthetic_word(rng);
        if (hindered && rng.uniform() < options_.invalid_rate) item = options_.invalid_marker + item;
        if (seen.insert(item).second) items.push_back(std::move(item));
      }
      return TransportReply::success(numbered_reply(items));
    }
    case PromptKind::Judge: {
      const bool invalid = prompt.find(options_.invalid_marker) != std::string::npos;
      return TransportReply::success(invalid ? "否，不合理" : "是");
    }
  }
  return TransportReply::success("是");
}

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  std::ifstream in(transcript, std::ios::binary);
  if (!in) throw ConfigError("cannot open transcript " + transcript.string());
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto entry = wire::parse_transcript_line(line);
    entries_[entry.key].push_back(std::move(entry.reply));
  }
}

TransportReply ReplayTransport::send(const CompletionRequest& req) {
  const auto key = wire::request_key(req);
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  auto& pos = cursor_[key];
  if (it == entries_.end() || pos >= it->second.size()) {
    return TransportReply::failure(404, "no transcript entry left for request " + key.substr(0, 12));
  }
  return it->second[pos++];
}

std::size_t ReplayTransport::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, replies] : entries_) {
    auto c = cursor_.find(key);
    n += replies.size() - (c == cursor_.end() ? 0 : c->second);
  }
  return n;
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, const std::filesystem::path& transcript,
                                       bool append)
    : inner_(std::move(inner)),
      out_(transcript, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
  if (!inner_) throw ConfigError("recording transport needs an inner transport");
  if (!out_) throw IoError("cannot write transcript " + transcript.string());
}

TransportReply RecordingTransport::send(const CompletionRequest& req) {
  auto reply = inner_->send(req);
  std::lock_guard lock(mu_);
  out_ << wire::transcript_line(req, reply) << '\n';
  out_.flush();
  return reply;
}

}  // namespace ckg
