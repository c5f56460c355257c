#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckg/schema.hpp"

namespace ckg {

// raw counts every HinderedBy triple; high drops those the filter removed.
enum class Edition : std::uint8_t { Raw, High };
std::string_view to_string(Edition e);
std::optional<Edition> parse_edition(std::string_view s);

struct RelationStats {
  std::int64_t unique_tails = 0;
  std::int64_t triples = 0;

  bool operator==(const RelationStats&) const = default;
};

struct GraphStats {
  Edition edition = Edition::Raw;
  std::int64_t unique_heads = 0;
  // Distinct tail strings across all relations.
  std::int64_t unique_tails = 0;
  std::int64_t triples = 0;
  std::array<RelationStats, 7> per_relation{};

  const RelationStats& of(Relation r) const { return per_relation[static_cast<std::size_t>(r)]; }

  // Builds stats from per-relation rows; `triples` is their sum.
  static GraphStats from_relation_rows(Edition edition, const std::array<RelationStats, 7>& rows,
                                       std::int64_t unique_heads, std::int64_t unique_tails);
  std::int64_t sum_relation_triples() const;

  bool operator==(const GraphStats&) const = default;
};

// High-edition triple total from raw stats and the HinderedBy count that
// survived filtering: raw - (HinderedBy raw - HinderedBy kept).
std::int64_t high_edition_triples(const GraphStats& raw, std::int64_t hindered_kept);

struct InsertResult {
  std::int64_t inserted = 0;
  std::int64_t duplicates = 0;
  // One diagnostic per rejected record: "<index>: <reason>".
  std::vector<std::string> rejected;
};

struct StatusUpdate {
  std::string key;  // Triple::key()
  FilterStatus status = FilterStatus::Kept;
};

// Deduplicating triple store. On disk it is a single append-only log:
//   line 1        "CKGSTORE\t1"
//   then records  JSON objects with "op" in {head, triple, status, commit}
// A batch is durable once its commit record has been written; records
// after the last commit are discarded (and truncated) on open. The dedup
// index lives in memory and is rebuilt from the log.
//
// One writer at a time; readers may run concurrently and see whole batches.
class GraphStore {
 public:
  // In-memory store, nothing persisted.
  GraphStore();
  // Opens or creates the log at `path`. Throws StoreError on a corrupt
  // header or record, IoError when the file cannot be opened.
  explicit GraphStore(std::filesystem::path path);
  ~GraphStore();

  GraphStore(const GraphStore&) = delete;
  GraphStore& operator=(const GraphStore&) = delete;

  // Heads are unique by (text, knowledge type).
  InsertResult insert_heads(std::span<const HeadItem> batch);
  // Unique by Triple::key(). Invalid triples are rejected with a diagnostic
  // and the rest of the batch continues. The triple's head is registered
  // too if unseen.
  InsertResult insert_triples(std::span<const Triple> batch);
  // Applies status changes to stored HinderedBy triples; returns how many
  // changed. Unknown keys or non-HinderedBy targets throw StoreError before
  // anything is written.
  std::int64_t set_filter_status(std::span<const StatusUpdate> updates);

  GraphStats compute_stats(Edition edition) const;

  std::vector<HeadItem> heads() const;
  std::vector<HeadItem> heads(KnowledgeType kt) const;
  std::vector<Triple> triples() const;
  std::vector<Triple> triples(Relation r) const;
  // Triples in the given edition, in canonical export order: relation,
  // then head text, head type, tail.
  std::vector<Triple> edition_triples(Edition e) const;
  std::optional<Triple> find(const std::string& key) const;

  std::size_t head_count() const;
  std::size_t triple_count() const;

  // SHA-256 of the log file, or of the canonical record stream when in-memory.
  std::string digest() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void replay();
  void append(const std::vector<std::string>& records);
  static std::string head_key(const HeadItem& h);

  mutable std::shared_mutex mu_;
  std::optional<std::filesystem::path> path_;
  std::ofstream log_;
  std::string memory_log_;
  std::vector<HeadItem> heads_;
  std::unordered_map<std::string, std::size_t> head_index_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::size_t> triple_index_;
};

}  // namespace ckg
