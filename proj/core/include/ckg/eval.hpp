#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ckg/graph_store.hpp"
#include "ckg/prompts.hpp"
#include "ckg/random.hpp"
#include "ckg/schema.hpp"

namespace ckg {

// One stratum per relation, with HinderedBy split into the unfiltered
// population and the triples the filter kept.
enum class Stratum : std::uint8_t {
  xWant,
  xReact,
  xEffect,
  xAttr,
  xNeed,
  xIntent,
  HinderedByRaw,
  HinderedByFiltered
};

inline constexpr std::array<Stratum, 8> kAllStrata = {
    Stratum::xWant, Stratum::xReact,  Stratum::xEffect,       Stratum::xAttr,
    Stratum::xNeed, Stratum::xIntent, Stratum::HinderedByRaw, Stratum::HinderedByFiltered};

std::string_view to_string(Stratum s);  // "xWant", ..., "HinderedBy-raw", "HinderedBy-filtered"
std::optional<Stratum> parse_stratum(std::string_view s);

struct EvalItem {
  // Opaque to annotators; derived from the triple, never from the stratum.
  std::string sample_id;
  Triple triple;
  Stratum stratum = Stratum::xWant;
};

struct EvalSample {
  std::vector<EvalItem> items;
  int per_stratum = 0;

  const EvalItem* find(const std::string& sample_id) const;
  std::size_t size() const { return items.size(); }

  // One JSON object per item.
  void save(const std::filesystem::path& path) const;
  static EvalSample load(const std::filesystem::path& path);
};

// Draws per_stratum_n triples uniformly without replacement for each
// stratum. HinderedBy-raw draws from every HinderedBy triple first;
// HinderedBy-filtered then draws from kept triples not already taken, so
// strata never overlap. Throws EvalError naming the first stratum that is
// too small.
EvalSample build_eval_sample(std::span<const Triple> triples, int per_stratum_n, Rng& rng);
EvalSample build_eval_sample(const GraphStore& store, int per_stratum_n, Rng& rng);

enum class AnnotationLabel : std::uint8_t { Reasonable, Unreasonable };
std::string_view to_string(AnnotationLabel l);
std::optional<AnnotationLabel> parse_annotation_label(std::string_view s);

struct AnnotationRecord {
  std::string sample_id;
  std::string annotator_id;
  AnnotationLabel label = AnnotationLabel::Reasonable;
  // ISO-8601 UTC; filled in on submission when empty.
  std::string timestamp;
};

struct AcceptanceReport {
  // nullopt when the annotator has no completed items.
  std::map<std::string, std::optional<double>> per_annotator;
  // Mean of the defined per-annotator proportions.
  std::optional<double> overall;
  // The same statistic restricted to each stratum.
  std::map<Stratum, std::optional<double>> per_stratum;
  // Completed (sample, annotator) pairs over items x annotators.
  double coverage = 0.0;
  // Share of judged items that a strict majority of their annotators found
  // reasonable (ties count as unreasonable).
  std::optional<double> majority_vote;
  std::map<Stratum, std::optional<double>> majority_vote_per_stratum;
  std::int64_t records = 0;
};

// Later records for the same (sample, annotator) pair replace earlier ones.
// `annotators` fixes the coverage denominator; when empty, the annotators
// seen in `records` are used. Throws ValidationError for a record naming an
// unknown sample.
AcceptanceReport compute_acceptance(const EvalSample& sample, std::span<const AnnotationRecord> records,
                                    std::span<const std::string> annotators = {});

struct NextItem {
  std::string sample_id;
  Triple triple;
  Stratum stratum = Stratum::xWant;
  std::string relation_sentence;
};

struct AnnotatorProgress {
  std::string annotator_id;
  std::size_t done = 0;
  std::size_t total = 0;
};

struct ProgressReport {
  std::size_t total_items = 0;
  std::vector<AnnotatorProgress> annotators;
  double coverage = 0.0;
};

// Collects judgments for one evaluation sample. Every registered annotator
// sees every item, in an order shuffled per annotator. Records are appended
// to a JSONL file when a path is given and replayed on construction. Safe
// for concurrent use.
class EvalService {
 public:
  EvalService(EvalSample sample, std::vector<std::string> annotators, TemplateSet templates,
              std::optional<std::filesystem::path> records_path = std::nullopt, std::uint64_t order_seed = 0);

  // Throws ValidationError for an unknown sample or annotator. Returns true
  // when an earlier record was replaced.
  bool submit(AnnotationRecord record);

  // First item in the annotator's order without a record, or nullopt when
  // the annotator is done. Throws ValidationError for an unknown annotator.
  std::optional<NextItem> next_for(const std::string& annotator_id) const;
  AnnotatorProgress progress_of(const std::string& annotator_id) const;
  ProgressReport progress() const;
  AcceptanceReport acceptance() const;
  std::vector<AnnotationRecord> records() const;

  const EvalSample& sample() const { return sample_; }
  const std::vector<std::string>& annotators() const { return annotators_; }
  const std::vector<std::size_t>& order_for(const std::string& annotator_id) const;

 private:
  bool is_annotator(const std::string& id) const;
  bool store_locked(AnnotationRecord record);

  EvalSample sample_;
  std::vector<std::string> annotators_;
  TemplateSet templates_;
  std::optional<std::filesystem::path> records_path_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::map<std::string, std::vector<std::size_t>> orders_;

  mutable std::shared_mutex mu_;
  // (sample_id, annotator) -> position in records_.
  std::map<std::pair<std::string, std::string>, std::size_t> latest_;
  std::vector<AnnotationRecord> records_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  // 0 picks a free port.
  int port = 8080;
  // Served at "/" when set (the annotation UI bundle).
  std::optional<std::filesystem::path> static_dir;
  // Adds stratum and filter status to /api/next replies.
  bool reviewer = false;
};

// JSON API over an EvalService:
//   GET  /api/next?annotator=ID   next item or {"complete": true}
//   POST /api/judgment            {"sample_id", "annotator", "label"}
//   GET  /api/progress
//   GET  /api/acceptance
//   GET  /api/records             JSONL audit export
class AnnotationServer {
 public:
  AnnotationServer(EvalService& service, ServerOptions options);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds and starts serving on a background thread; returns the bound
  // port. Throws IoError when the address cannot be bound.
  int start();
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace ckg
