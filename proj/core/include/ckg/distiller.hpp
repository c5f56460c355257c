#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ckg/error.hpp"
#include "ckg/gateway.hpp"
#include "ckg/graph_store.hpp"
#include "ckg/prompts.hpp"
#include "ckg/random.hpp"
#include "ckg/schema.hpp"

namespace ckg {

struct DistillPlan {
  int target_heads_per_type = 1000;
  int seeds_per_type = 200;
  int triple_seeds_per_relation = 100;
  PromptSpec head_spec = PromptSpec::head_default();
  PromptSpec tail_spec = PromptSpec::tail_default();
  std::uint64_t rng_seed = 0;
  // Consecutive head cycles without a new item before giving up.
  int stall_limit = 20;
  // Tail tasks between checkpoint writes.
  int checkpoint_every = 500;
  // Consecutive failed head requests tolerated before the error propagates.
  int max_consecutive_errors = 3;

  // Throws PlanError when a bound is violated.
  void validate() const;
};

std::vector<std::string> default_refusal_markers();

struct ParseOptions {
  // Lines containing any marker (ASCII-case-insensitive) are dropped.
  std::vector<std::string> refusal_markers = default_refusal_markers();
};

struct RejectedLine {
  std::string line;
  std::string reason;  // "empty", "refusal", "header"
};

// Every candidate line ends up in exactly one bucket:
// parsed_count + rejected_lines.size() + duplicate_count == candidate lines.
struct ParseReport {
  int parsed_count = 0;
  std::vector<RejectedLine> rejected_lines;
  int duplicate_count = 0;

  int candidate_lines() const { return parsed_count + static_cast<int>(rejected_lines.size()) + duplicate_count; }
  int refusal_count() const;
};

struct ParsedItems {
  std::vector<std::string> items;
  ParseReport report;

  // Nothing usable and at least one refusal line.
  bool is_refusal() const { return items.empty() && report.refusal_count() > 0; }
};

// Splits a numbered-list reply into normalized items, in order, without
// duplicates. Lines ending with ':' (e.g. "以下是十个例子：") count as headers.
ParsedItems parse_items(std::string_view response_text, const ParseOptions& options = {});

// k distinct elements of `pool` in random order. Throws PlanError when the
// pool is smaller than k.
template <class T>
std::vector<T> sample_seeds(std::span<const T> pool, std::size_t k, Rng& rng) {
  if (pool.size() < k) {
    throw PlanError("seed pool has " + std::to_string(pool.size()) + " items, " + std::to_string(k) + " needed");
  }
  std::vector<T> out;
  out.reserve(k);
  for (auto i : rng.sample_indices(pool.size(), k)) out.push_back(pool[i]);
  return out;
}

struct HeadDistillResult {
  // Newly distilled heads in discovery order; excludes seeds and `existing`.
  std::vector<HeadItem> heads;
  int requests = 0;
  int cycles = 0;
  bool stalled = false;
  bool cap_reached = false;
  std::vector<std::string> warnings;
  std::vector<ParseReport> reports;
};

struct HeadDistillOptions {
  // Already collected heads of this type; they count toward the target.
  std::span<const HeadItem> existing;
  ParseOptions parse;
  int max_output_tokens = 1024;
};

// Collects distilled heads of type `kt` until existing + new reaches
// plan.target_heads_per_type, the gateway's request cap is hit, or
// plan.stall_limit consecutive cycles add nothing. A refused reply is
// retried once with a fresh seed sample within the same cycle.
HeadDistillResult distill_heads(KnowledgeType kt, std::span<const HeadItem> seeds, const DistillPlan& plan,
                                Gateway& gateway, const TemplateSet& templates, Rng& rng,
                                const HeadDistillOptions& options = {});

struct TailTask {
  HeadItem head;
  Relation relation = Relation::xWant;

  std::string id() const;
};

// All valid (head, relation) pairs ordered by head text, head type, then
// relation name.
std::vector<TailTask> enumerate_tail_tasks(std::span<const HeadItem> heads);

// Triple seeds grouped by relation.
class TripleSeedIndex {
 public:
  explicit TripleSeedIndex(std::span<const Triple> seeds);
  std::span<const Triple> of(Relation r) const { return by_relation_[static_cast<std::size_t>(r)]; }

 private:
  std::array<std::vector<Triple>, 7> by_relation_;
};

struct TailPrompt {
  TailTask task;
  std::string name;
  SentenceFrame frame;
  CompletionRequest request;
};

// Stream used to prepare the prompt for `task`: a function of the stage
// stream's state and the task id only. `stage` is not advanced, so a task's
// prompt does not depend on which other tasks ran before it.
Rng tail_task_rng(const Rng& stage, const TailTask& task);

// Samples examples and a name, then renders the request.
TailPrompt prepare_tail_prompt(const TailTask& task, const TripleSeedIndex& seeds, const DistillPlan& plan,
                               const TemplateSet& templates, std::span<const std::string> names, Rng& rng,
                               const std::string& model_id, int max_output_tokens);

struct TailResult {
  std::vector<Triple> triples;
  ParseReport report;
  std::string error;
  bool cap_reached = false;

  bool ok() const { return error.empty(); }
};

// Parses a reply: strips an echoed query sentence, normalizes, maps the
// prompt's name back to the placeholder, dedups, and keeps at most
// tails_per_request triples.
TailResult parse_tail_reply(const TailPrompt& prompt, std::string_view reply, const DistillPlan& plan,
                            const ParseOptions& options = {});

struct TailDistillOptions {
  ParseOptions parse;
  int max_output_tokens = 1024;
};

TailResult distill_tails(const TailTask& task, const TripleSeedIndex& seeds, const DistillPlan& plan,
                         Gateway& gateway, const TemplateSet& templates, std::span<const std::string> names,
                         const Rng& rng, const TailDistillOptions& options = {});

// One request per task through complete_batch; results follow task order.
// Each task's prompt is prepared from tail_task_rng(rng, task).
std::vector<TailResult> distill_tails_batch(std::span<const TailTask> tasks, const TripleSeedIndex& seeds,
                                            const DistillPlan& plan, Gateway& gateway, const TemplateSet& templates,
                                            std::span<const std::string> names, const Rng& rng,
                                            const TailDistillOptions& options = {});

// Resumable progress of the tail stage.
struct Checkpoint {
  std::set<std::string> completed;
  std::int64_t request_count = 0;
  // State of the stage stream the run started from.
  std::string rng_state;

  // Atomic replace via a temporary file.
  void save(const std::filesystem::path& path) const;
  // Empty checkpoint when the file does not exist.
  static Checkpoint load(const std::filesystem::path& path);
};

struct TailRunSummary {
  std::size_t tasks_total = 0;
  std::size_t tasks_done = 0;
  std::size_t tasks_resumed = 0;
  std::size_t tasks_failed = 0;
  std::int64_t inserted = 0;
  std::int64_t duplicates = 0;
  std::int64_t rejected = 0;
  bool cap_reached = false;
  bool cancelled = false;
  std::vector<std::string> errors;
};

struct TailRunOptions {
  TailDistillOptions distill;
  std::optional<std::filesystem::path> checkpoint;
  const std::atomic<bool>* cancel = nullptr;
};

// Runs the tail stage over `tasks` in chunks of plan.checkpoint_every,
// inserting each chunk into `store` and checkpointing after it. Completed
// task ids in the checkpoint are skipped; failed tasks are left for a rerun.
// A resumed run uses the stage stream recorded in the checkpoint, so an
// interrupted run followed by a resume builds the same prompts as one
// uninterrupted run.
TailRunSummary run_tail_stage(std::span<const TailTask> tasks, const TripleSeedIndex& seeds, const DistillPlan& plan,
                              Gateway& gateway, const TemplateSet& templates, std::span<const std::string> names,
                              Rng& rng, GraphStore& store, const TailRunOptions& options = {});

}  // namespace ckg
