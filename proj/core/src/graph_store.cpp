#include "ckg/graph_store.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_set>

#include <json.hpp>

#include "ckg/digest.hpp"
#include "ckg/error.hpp"
#include "ckg/text.hpp"

namespace ckg {

namespace {

using nlohmann::json;

constexpr std::string_view kHeader = "CKGSTORE\t1";

std::string head_record(const HeadItem& h) {
  return json{{"op", "head"},
              {"text", h.text},
              {"kt", std::string(to_string(h.knowledge_type))},
              {"origin", std::string(to_string(h.origin))}}
      .dump();
}

std::string triple_record(const Triple& t) {
  return json{{"op", "triple"},
              {"head", t.head.text},
              {"kt", std::string(to_string(t.head.knowledge_type))},
              {"head_origin", std::string(to_string(t.head.origin))},
              {"rel", std::string(to_string(t.relation))},
              {"tail", t.tail},
              {"origin", std::string(to_string(t.origin))},
              {"status", std::string(to_string(t.filter_status))}}
      .dump();
}

std::string status_record(const std::string& key, FilterStatus s) {
  return json{{"op", "status"}, {"key", key}, {"status", std::string(to_string(s))}}.dump();
}

std::string commit_record(std::size_t n) { return json{{"op", "commit"}, {"records", n}}.dump(); }

template <class T>
T parse_or_throw(std::optional<T> v, const std::string& what) {
  if (!v) throw StoreError("corrupt store record: bad " + what);
  return *v;
}

HeadItem head_from(const json& j, const char* text_field, const char* origin_field) {
  HeadItem h;
  h.text = j.at(text_field).get<std::string>();
  h.knowledge_type = parse_or_throw(parse_knowledge_type(j.at("kt").get<std::string>()), "knowledge type");
  h.origin = parse_or_throw(parse_origin(j.at(origin_field).get<std::string>()), "origin");
  return h;
}

bool export_order(const Triple& a, const Triple& b) {
  if (a.relation != b.relation) return a.relation < b.relation;
  if (a.head.text != b.head.text) return a.head.text < b.head.text;
  if (a.head.knowledge_type != b.head.knowledge_type) return a.head.knowledge_type < b.head.knowledge_type;
  return a.tail < b.tail;
}

bool in_edition(const Triple& t, Edition e) {
  return e == Edition::Raw || t.filter_status != FilterStatus::Removed;
}

}  // namespace

std::string_view to_string(Edition e) { return e == Edition::Raw ? "raw" : "high"; }

std::optional<Edition> parse_edition(std::string_view s) {
  if (s == "raw") return Edition::Raw;
  if (s == "high") return Edition::High;
  return std::nullopt;
}

GraphStats GraphStats::from_relation_rows(Edition edition, const std::array<RelationStats, 7>& rows,
                                          std::int64_t unique_heads, std::int64_t unique_tails) {
  GraphStats s;
  s.edition = edition;
  s.per_relation = rows;
  s.unique_heads = unique_heads;
  s.unique_tails = unique_tails;
  s.triples = s.sum_relation_triples();
  return s;
}

std::int64_t GraphStats::sum_relation_triples() const {
  std::int64_t total = 0;
  for (const auto& r : per_relation) total += r.triples;
  return total;
}

std::int64_t high_edition_triples(const GraphStats& raw, std::int64_t hindered_kept) {
  return raw.triples - (raw.of(Relation::HinderedBy).triples - hindered_kept);
}

GraphStore::GraphStore() = default;

GraphStore::GraphStore(std::filesystem::path path) : path_(std::move(path)) {
  replay();
  log_.open(*path_, std::ios::binary | std::ios::app);
  if (!log_) throw IoError("cannot open store for appending: " + path_->string());
}

GraphStore::~GraphStore() = default;

std::string GraphStore::head_key(const HeadItem& h) {
  return h.text + '\t' + std::string(to_string(h.knowledge_type));
}

void GraphStore::replay() {
  const auto& p = *path_;
  if (!std::filesystem::exists(p)) {
    std::ofstream create(p, std::ios::binary);
    if (!create) throw IoError("cannot create store " + p.string());
    create << kHeader << '\n';
    return;
  }
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open store " + p.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw StoreError("not a ckg store (bad header): " + p.string());

  std::streamoff committed_end = in.tellg();
  std::vector<json> pending;
  while (true) {
    if (!std::getline(in, line)) break;
    // A final line without '\n' was never completely written.
    if (in.eof()) break;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      if (in.peek() != std::char_traits<char>::eof()) {
        throw StoreError("corrupt store: unparseable record before the end of " + p.string());
      }
      break;
    }
    if (j.value("op", "") != "commit") {
      pending.push_back(std::move(j));
      continue;
    }
    try {
      for (const auto& rec : pending) {
        const auto op = rec.at("op").get<std::string>();
        if (op == "head") {
          auto h = head_from(rec, "text", "origin");
          auto key = head_key(h);
          if (head_index_.emplace(key, heads_.size()).second) heads_.push_back(std::move(h));
        } else if (op == "triple") {
          Triple t;
          t.head = head_from(rec, "head", "head_origin");
          t.relation = parse_or_throw(parse_relation(rec.at("rel").get<std::string>()), "relation");
          t.tail = rec.at("tail").get<std::string>();
          t.origin = parse_or_throw(parse_origin(rec.at("origin").get<std::string>()), "origin");
          t.filter_status = parse_or_throw(parse_filter_status(rec.at("status").get<std::string>()), "status");
          if (auto diag = check(t)) throw StoreError("corrupt store record: " + *diag);
          auto hk = head_key(t.head);
          if (head_index_.emplace(hk, heads_.size()).second) heads_.push_back(t.head);
          auto key = t.key();
          if (triple_index_.emplace(key, triples_.size()).second) triples_.push_back(std::move(t));
        } else if (op == "status") {
          auto it = triple_index_.find(rec.at("key").get<std::string>());
          if (it == triple_index_.end()) throw StoreError("corrupt store: status update for unknown triple");
          triples_[it->second].filter_status =
              parse_or_throw(parse_filter_status(rec.at("status").get<std::string>()), "status");
        } else {
          throw StoreError("corrupt store: unknown op " + op);
        }
      }
    } catch (const json::exception& e) {
      throw StoreError(std::string("corrupt store record: ") + e.what());
    }
    pending.clear();
    committed_end = in.tellg();
  }
  in.close();
  if (static_cast<std::uintmax_t>(committed_end) < std::filesystem::file_size(p)) {
    std::filesystem::resize_file(p, static_cast<std::uintmax_t>(committed_end));
  }
}

void GraphStore::append(const std::vector<std::string>& records) {
  if (records.empty()) return;
  std::string chunk;
  for (const auto& r : records) {
    chunk += r;
    chunk += '\n';
  }
  chunk += commit_record(records.size());
  chunk += '\n';
  if (path_) {
    log_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    log_.flush();
    if (!log_) throw IoError("failed to append to store " + path_->string());
  } else {
    memory_log_ += chunk;
  }
}

InsertResult GraphStore::insert_heads(std::span<const HeadItem> batch) {
  std::unique_lock lock(mu_);
  InsertResult res;
  std::vector<std::string> records;
  std::vector<HeadItem> accepted;
  std::unordered_set<std::string> batch_keys;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& h = batch[i];
    if (h.text.empty() || h.text.find_first_of("\t\n") != std::string::npos) {
      res.rejected.push_back(std::to_string(i) + ": head text is empty or contains a tab/newline");
      continue;
    }
    auto key = head_key(h);
    if (head_index_.contains(key) || !batch_keys.insert(key).second) {
      ++res.duplicates;
      continue;
    }
    records.push_back(head_record(h));
    accepted.push_back(h);
  }
  append(records);
  for (auto& h : accepted) {
    head_index_.emplace(head_key(h), heads_.size());
    heads_.push_back(std::move(h));
  }
  res.inserted = static_cast<std::int64_t>(accepted.size());
  return res;
}

InsertResult GraphStore::insert_triples(std::span<const Triple> batch) {
  std::unique_lock lock(mu_);
  InsertResult res;
  std::vector<std::string> records;
  std::vector<Triple> accepted;
  std::vector<HeadItem> new_heads;
  std::unordered_set<std::string> batch_keys;
  std::unordered_set<std::string> batch_heads;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    if (auto diag = check(t)) {
      res.rejected.push_back(std::to_string(i) + ": " + *diag);
      continue;
    }
    auto key = t.key();
    if (triple_index_.contains(key) || !batch_keys.insert(key).second) {
      ++res.duplicates;
      continue;
    }
    auto hk = head_key(t.head);
    if (!head_index_.contains(hk) && batch_heads.insert(hk).second) new_heads.push_back(t.head);
    records.push_back(triple_record(t));
    accepted.push_back(t);
  }
  append(records);
  for (auto& h : new_heads) {
    head_index_.emplace(head_key(h), heads_.size());
    heads_.push_back(std::move(h));
  }
  for (auto& t : accepted) {
    triple_index_.emplace(t.key(), triples_.size());
    triples_.push_back(std::move(t));
  }
  res.inserted = static_cast<std::int64_t>(accepted.size());
  return res;
}

std::int64_t GraphStore::set_filter_status(std::span<const StatusUpdate> updates) {
  std::unique_lock lock(mu_);
  std::vector<std::pair<std::size_t, FilterStatus>> changes;
  std::vector<std::string> records;
  for (const auto& u : updates) {
    auto it = triple_index_.find(u.key);
    if (it == triple_index_.end()) throw StoreError("status update for unknown triple " + u.key);
    const auto& t = triples_[it->second];
    if (t.relation != Relation::HinderedBy) throw StoreError("filter status only applies to HinderedBy triples");
    if (u.status == FilterStatus::NotApplicable) throw StoreError("HinderedBy triples cannot be not_applicable");
    if (t.filter_status == u.status) continue;
    changes.emplace_back(it->second, u.status);
    records.push_back(status_record(u.key, u.status));
  }
  append(records);
  for (auto [idx, st] : changes) triples_[idx].filter_status = st;
  return static_cast<std::int64_t>(changes.size());
}

GraphStats GraphStore::compute_stats(Edition edition) const {
  std::shared_lock lock(mu_);
  std::array<RelationStats, 7> rows{};
  std::array<std::unordered_set<std::string_view>, 7> tails_by_rel;
  std::unordered_set<std::string_view> all_tails;
  for (const auto& t : triples_) {
    if (!in_edition(t, edition)) continue;
    const auto r = static_cast<std::size_t>(t.relation);
    ++rows[r].triples;
    tails_by_rel[r].insert(t.tail);
    all_tails.insert(t.tail);
  }
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r].unique_tails = static_cast<std::int64_t>(tails_by_rel[r].size());
  // Filtering removes triples, never heads.
  return GraphStats::from_relation_rows(edition, rows, static_cast<std::int64_t>(heads_.size()),
                                        static_cast<std::int64_t>(all_tails.size()));
}

std::vector<HeadItem> GraphStore::heads() const {
  std::shared_lock lock(mu_);
  return heads_;
}

std::vector<HeadItem> GraphStore::heads(KnowledgeType kt) const {
  std::shared_lock lock(mu_);
  std::vector<HeadItem> out;
  for (const auto& h : heads_) {
    if (h.knowledge_type == kt) out.push_back(h);
  }
  return out;
}

std::vector<Triple> GraphStore::triples() const {
  std::shared_lock lock(mu_);
  return triples_;
}

std::vector<Triple> GraphStore::triples(Relation r) const {
  std::shared_lock lock(mu_);
  std::vector<Triple> out;
  for (const auto& t : triples_) {
    if (t.relation == r) out.push_back(t);
  }
  return out;
}

std::vector<Triple> GraphStore::edition_triples(Edition e) const {
  std::vector<Triple> out;
  {
    std::shared_lock lock(mu_);
    for (const auto& t : triples_) {
      if (in_edition(t, e)) out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end(), export_order);
  return out;
}

std::optional<Triple> GraphStore::find(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = triple_index_.find(key);
  if (it == triple_index_.end()) return std::nullopt;
  return triples_[it->second];
}

std::size_t GraphStore::head_count() const {
  std::shared_lock lock(mu_);
  return heads_.size();
}

std::size_t GraphStore::triple_count() const {
  std::shared_lock lock(mu_);
  return triples_.size();
}

std::string GraphStore::digest() const {
  std::shared_lock lock(mu_);
  if (path_) return sha256_file(*path_);
  return sha256_hex(std::string(kHeader) + "\n" + memory_log_);
}

}  // namespace ckg
