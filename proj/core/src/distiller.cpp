#include "ckg/distiller.hpp"

#include <algorithm>
#include <unordered_set>

#include "ckg/text.hpp"

namespace ckg {

namespace {

bool contains_marker(std::string_view line, const std::vector<std::string>& markers) {
  const auto lower = text::to_lower_ascii(line);
  return std::any_of(markers.begin(), markers.end(),
                     [&](const std::string& m) { return !m.empty() && lower.find(text::to_lower_ascii(m)) != std::string::npos; });
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool is_header(std::string_view normalized) { return ends_with(normalized, ":") || ends_with(normalized, "："); }

}  // namespace

void DistillPlan::validate() const {
  head_spec.validate();
  tail_spec.validate();
  if (head_spec.kind != PromptKind::HeadDistill) throw PlanError("plan.head_spec must be a head_distill spec");
  if (tail_spec.kind != PromptKind::TailDistill) throw PlanError("plan.tail_spec must be a tail_distill spec");
  if (target_heads_per_type < 1) throw PlanError("target_heads_per_type must be positive");
  if (seeds_per_type < head_spec.example_count) {
    throw PlanError("seeds_per_type (" + std::to_string(seeds_per_type) + ") is below the head example count (" +
                    std::to_string(head_spec.example_count) + ")");
  }
  if (triple_seeds_per_relation < tail_spec.example_count) {
    throw PlanError("triple_seeds_per_relation (" + std::to_string(triple_seeds_per_relation) +
                    ") is below the tail example count (" + std::to_string(tail_spec.example_count) + ")");
  }
  if (stall_limit < 1) throw PlanError("stall_limit must be positive");
  if (checkpoint_every < 1) throw PlanError("checkpoint_every must be positive");
  if (max_consecutive_errors < 0) throw PlanError("max_consecutive_errors must be >= 0");
}

std::vector<std::string> default_refusal_markers() {
  return {"抱歉", "作为一个AI", "作为一个人工智能", "作为AI语言模型", "sorry", "as an ai", "i cannot", "i can't",
          "i am unable", "i'm unable"};
}

int ParseReport::refusal_count() const {
  return static_cast<int>(std::count_if(rejected_lines.begin(), rejected_lines.end(),
                                        [](const RejectedLine& r) { return r.reason == "refusal"; }));
}

ParsedItems parse_items(std::string_view response_text, const ParseOptions& options) {
  ParsedItems out;
  std::unordered_set<std::string> seen;
  for (auto line : text::split_lines(response_text)) {
    auto norm = text::normalize_item(line);
    if (norm.empty()) {
      out.report.rejected_lines.push_back({std::string(line), "empty"});
    } else if (contains_marker(line, options.refusal_markers)) {
      out.report.rejected_lines.push_back({std::string(line), "refusal"});
    } else if (is_header(norm)) {
      out.report.rejected_lines.push_back({std::string(line), "header"});
    } else if (!seen.insert(norm).second) {
      ++out.report.duplicate_count;
    } else {
      ++out.report.parsed_count;
      out.items.push_back(std::move(norm));
    }
  }
  return out;
}

HeadDistillResult distill_heads(KnowledgeType kt, std::span<const HeadItem> seeds, const DistillPlan& plan,
                                Gateway& gateway, const TemplateSet& templates, Rng& rng,
                                const HeadDistillOptions& options) {
  plan.validate();
  for (const auto& s : seeds) {
    if (s.knowledge_type != kt) {
      throw SchemaError("seed \"" + s.text + "\" is " + std::string(to_string(s.knowledge_type)) + ", expected " +
                        std::string(to_string(kt)));
    }
  }

  HeadDistillResult result;
  std::unordered_set<std::string> known;
  for (const auto& s : seeds) known.insert(s.text);
  std::size_t have = 0;
  for (const auto& e : options.existing) {
    if (e.knowledge_type == kt && known.insert(e.text).second) ++have;
  }
  const auto target = static_cast<std::size_t>(plan.target_heads_per_type);
  const auto k = static_cast<std::size_t>(plan.head_spec.example_count);

  int stalled_cycles = 0;
  int consecutive_errors = 0;
  while (have + result.heads.size() < target) {
    ++result.cycles;
    bool added = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto sample = sample_seeds(seeds, k, rng);
      auto prompt = render_head_prompt(templates, sample, kt, plan.head_spec);
      auto req = CompletionRequest::user_prompt(gateway.config().model_id, std::move(prompt),
                                                plan.head_spec.temperature, options.max_output_tokens,
                                                RequestTag{PromptKind::HeadDistill, plan.head_spec.example_count, {}});
      CompletionResponse resp;
      try {
        ++result.requests;
        resp = gateway.complete(req);
        consecutive_errors = 0;
      } catch (const RequestCapReached& e) {
        --result.requests;
        result.cap_reached = true;
        result.warnings.push_back(std::string(to_string(kt)) + ": stopped early, " + e.what());
        return result;
      } catch (const Error& e) {
        if (++consecutive_errors > plan.max_consecutive_errors) throw;
        result.warnings.push_back(std::string(to_string(kt)) + ": request failed: " + e.what());
        break;
      }
      auto parsed = parse_items(resp.text, options.parse);
      const bool refused = resp.finish_reason == FinishReason::Refused || parsed.is_refusal();
      result.reports.push_back(parsed.report);
      if (refused && attempt == 0) continue;
      for (auto& item : parsed.items) {
        if (have + result.heads.size() >= target) break;
        if (!known.insert(item).second) continue;
        result.heads.push_back(HeadItem{std::move(item), kt, Origin::Distilled});
        added = true;
      }
      break;
    }
    if (added) {
      stalled_cycles = 0;
    } else if (++stalled_cycles >= plan.stall_limit) {
      result.stalled = true;
      result.warnings.push_back(std::string(to_string(kt)) + ": no new items for " + std::to_string(stalled_cycles) +
                                " cycles, returning " + std::to_string(have + result.heads.size()) + " of " +
                                std::to_string(target));
      break;
    }
  }
  return result;
}

std::string TailTask::id() const {
  return text::hex64(text::fnv1a64(head.text + '\t' + std::string(to_string(head.knowledge_type)) + '\t' +
                                  std::string(to_string(relation))));
}

std::vector<TailTask> enumerate_tail_tasks(std::span<const HeadItem> heads) {
  std::vector<TailTask> tasks;
  for (const auto& h : heads) {
    for (auto r : valid_relations(h.knowledge_type)) tasks.push_back({h, r});
  }
  std::sort(tasks.begin(), tasks.end(), [](const TailTask& a, const TailTask& b) {
    if (a.head.text != b.head.text) return a.head.text < b.head.text;
    if (a.head.knowledge_type != b.head.knowledge_type) return a.head.knowledge_type < b.head.knowledge_type;
    return to_string(a.relation) < to_string(b.relation);
  });
  return tasks;
}

TripleSeedIndex::TripleSeedIndex(std::span<const Triple> seeds) {
  for (const auto& t : seeds) by_relation_[static_cast<std::size_t>(t.relation)].push_back(t);
}

Rng tail_task_rng(const Rng& stage, const TailTask& task) {
  Rng copy = stage;
  return copy.fork(text::fnv1a64(task.id()));
}

TailPrompt prepare_tail_prompt(const TailTask& task, const TripleSeedIndex& seeds, const DistillPlan& plan,
                               const TemplateSet& templates, std::span<const std::string> names, Rng& rng,
                               const std::string& model_id, int max_output_tokens) {
  if (!is_valid_pair(task.head.knowledge_type, task.relation)) {
    throw SchemaError("relation " + std::string(to_string(task.relation)) + " is not valid for " +
                      std::string(to_string(task.head.knowledge_type)) + " head items");
  }
  if (names.empty()) throw PlanError("name pool is empty");
  auto examples = sample_seeds(seeds.of(task.relation), static_cast<std::size_t>(plan.tail_spec.example_count), rng);
  const auto& name = names[rng.below(names.size())];

  TailPrompt p;
  p.task = task;
  p.name = name;
  auto frame = sentence_frame(templates, task.relation, task.head.text);
  p.frame = {substitute_name(frame.prefix, name), substitute_name(frame.suffix, name)};
  auto prompt = render_tail_prompt(templates, examples, task.head, task.relation, name, plan.tail_spec);
  p.request = CompletionRequest::user_prompt(
      model_id, std::move(prompt), plan.tail_spec.temperature, max_output_tokens,
      RequestTag{PromptKind::TailDistill, plan.tail_spec.tails_per_request, task.relation});
  return p;
}

TailResult parse_tail_reply(const TailPrompt& prompt, std::string_view reply, const DistillPlan& plan,
                            const ParseOptions& options) {
  TailResult result;
  auto parsed = parse_items(reply, options);
  result.report = parsed.report;
  auto& report = result.report;
  const auto prefix = text::normalize_item(prompt.frame.prefix);
  const auto suffix = text::normalize_item(prompt.frame.suffix);
  std::unordered_set<std::string> seen;
  for (auto& item : parsed.items) {
    std::string_view body = item;
    // The model sometimes repeats the whole query sentence.
    if (!prefix.empty() && starts_with(body, prefix)) body.remove_prefix(prefix.size());
    if (!suffix.empty() && ends_with(body, suffix)) body.remove_suffix(suffix.size());
    auto tail = text::normalize_item(text::replace_all(body, prompt.name, kPersonPlaceholder));
    if (tail.empty()) {
      --report.parsed_count;
      report.rejected_lines.push_back({item, "empty"});
      continue;
    }
    if (!seen.insert(tail).second) {
      --report.parsed_count;
      ++report.duplicate_count;
      continue;
    }
    if (static_cast<int>(result.triples.size()) >= plan.tail_spec.tails_per_request) {
      --report.parsed_count;
      report.rejected_lines.push_back({item, "overflow"});
      continue;
    }
    result.triples.push_back(Triple::make(prompt.task.head, prompt.task.relation, tail, Origin::Distilled));
  }
  return result;
}

TailResult distill_tails(const TailTask& task, const TripleSeedIndex& seeds, const DistillPlan& plan,
                         Gateway& gateway, const TemplateSet& templates, std::span<const std::string> names,
                         const Rng& rng, const TailDistillOptions& options) {
  auto results = distill_tails_batch(std::span<const TailTask>(&task, 1), seeds, plan, gateway, templates, names, rng,
                                     options);
  return std::move(results.front());
}

std::vector<TailResult> distill_tails_batch(std::span<const TailTask> tasks, const TripleSeedIndex& seeds,
                                            const DistillPlan& plan, Gateway& gateway, const TemplateSet& templates,
                                            std::span<const std::string> names, const Rng& rng,
                                            const TailDistillOptions& options) {
  std::vector<TailPrompt> prompts;
  prompts.reserve(tasks.size());
  for (const auto& t : tasks) {
    auto task_rng = tail_task_rng(rng, t);
    prompts.push_back(prepare_tail_prompt(t, seeds, plan, templates, names, task_rng, gateway.config().model_id,
                                          options.max_output_tokens));
  }
  std::vector<CompletionRequest> reqs;
  reqs.reserve(prompts.size());
  for (const auto& p : prompts) reqs.push_back(p.request);

  auto replies = gateway.complete_batch(reqs);
  std::vector<TailResult> results;
  results.reserve(tasks.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& r = replies[i];
    if (!r.ok()) {
      TailResult failed;
      failed.error = r.error;
      failed.cap_reached = r.cap_reached;
      results.push_back(std::move(failed));
      continue;
    }
    results.push_back(parse_tail_reply(prompts[i], r.response->text, plan, options.parse));
  }
  return results;
}

TailRunSummary run_tail_stage(std::span<const TailTask> tasks, const TripleSeedIndex& seeds, const DistillPlan& plan,
                              Gateway& gateway, const TemplateSet& templates, std::span<const std::string> names,
                              Rng& rng, GraphStore& store, const TailRunOptions& options) {
  plan.validate();
  TailRunSummary summary;
  summary.tasks_total = tasks.size();

  Checkpoint cp = options.checkpoint ? Checkpoint::load(*options.checkpoint) : Checkpoint{};
  if (cp.rng_state.empty()) {
    cp.rng_state = rng.state();
  } else {
    rng.restore(cp.rng_state);
  }

  std::vector<TailTask> pending;
  for (const auto& t : tasks) {
    if (cp.completed.contains(t.id())) {
      ++summary.tasks_resumed;
    } else {
      pending.push_back(t);
    }
  }

  const auto chunk = static_cast<std::size_t>(plan.checkpoint_every);
  for (std::size_t begin = 0; begin < pending.size(); begin += chunk) {
    if (options.cancel && options.cancel->load()) {
      summary.cancelled = true;
      break;
    }
    const auto end = std::min(pending.size(), begin + chunk);
    std::span<const TailTask> slice(pending.data() + begin, end - begin);
    const auto requests_before = gateway.requests_issued();
    auto results = distill_tails_batch(slice, seeds, plan, gateway, templates, names, rng, options.distill);

    std::vector<Triple> batch;
    for (std::size_t i = 0; i < results.size(); ++i) {
      auto& r = results[i];
      if (!r.ok()) {
        ++summary.tasks_failed;
        summary.cap_reached = summary.cap_reached || r.cap_reached;
        if (summary.errors.size() < 20) summary.errors.push_back(slice[i].id() + ": " + r.error);
        continue;
      }
      ++summary.tasks_done;
      cp.completed.insert(slice[i].id());
      std::move(r.triples.begin(), r.triples.end(), std::back_inserter(batch));
    }
    auto ins = store.insert_triples(batch);
    summary.inserted += ins.inserted;
    summary.duplicates += ins.duplicates;
    summary.rejected += static_cast<std::int64_t>(ins.rejected.size());

    cp.request_count += gateway.requests_issued() - requests_before;
    if (options.checkpoint) cp.save(*options.checkpoint);
    if (summary.cap_reached) break;
  }
  return summary;
}

}  // namespace ckg
