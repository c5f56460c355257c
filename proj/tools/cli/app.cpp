#include "app.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ckg/distiller.hpp"
#include "ckg/error.hpp"
#include "ckg/eval.hpp"
#include "ckg/export.hpp"
#include "ckg/filter.hpp"
#include "ckg/graph_store.hpp"
#include "ckg/prompts.hpp"
#include "ckg/seeds.hpp"
#include "ckg/text.hpp"
#include "ckg/transports.hpp"
#include "config.hpp"

namespace ckg::app {

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::string work_dir;
  std::optional<std::uint64_t> rng_seed;
  std::optional<std::int64_t> request_cap;
  std::string mock;
  double mock_invalid_rate = 0.3;
  std::string replay;
  std::string record;
  bool dry_run = false;
  int limit = 10;
  std::string summary;

  std::string edition;
  std::string format;
  std::string out_dir;
  std::string split;
  bool no_split = false;
  bool rejudge = false;
  bool force = false;
  std::optional<int> per_stratum;
  std::string host;
  std::optional<int> port;
  std::string static_dir;
  bool reviewer = false;
};

// Bad seed input: exits like a config error.
class SeedCheckFailed : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

json stats_json(const GraphStats& s) {
  json rel = json::object();
  for (auto r : kAllRelations) {
    rel[std::string(to_string(r))] = {{"unique_tails", s.of(r).unique_tails}, {"triples", s.of(r).triples}};
  }
  return json{{"edition", std::string(to_string(s.edition))},
              {"unique_heads", s.unique_heads},
              {"unique_tails", s.unique_tails},
              {"triples", s.triples},
              {"per_relation", rel}};
}

void print_stats(std::ostream& out, const GraphStats& s) {
  out << "edition " << to_string(s.edition) << ": " << s.unique_heads << " heads, " << s.unique_tails
      << " unique tails, " << s.triples << " triples\n";
  out << "  " << std::left << std::setw(12) << "relation" << std::right << std::setw(12) << "triples" << std::setw(14)
      << "unique tails" << '\n';
  for (auto r : kAllRelations) {
    out << "  " << std::left << std::setw(12) << to_string(r) << std::right << std::setw(12) << s.of(r).triples
        << std::setw(14) << s.of(r).unique_tails << '\n';
  }
}

SplitFractions parse_split(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--split expects three comma-separated fractions, got '" + s + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("--split expects three comma-separated fractions, got '" + s + "'");
  SplitFractions f{parts[0], parts[1], parts[2]};
  try {
    f.validate();
  } catch (const PlanError& e) {
    throw ConfigError(std::string("--split: ") + e.what());
  }
  return f;
}

class Runner {
 public:
  Runner(PipelineConfig cfg, Flags flags, std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel)
      : cfg_(std::move(cfg)), flags_(std::move(flags)), out_(out), err_(err), cancel_(cancel) {
    std::filesystem::create_directories(cfg_.work_dir);
  }

  json seed_check() {
    std::vector<std::string> problems;
    try {
      (void)templates();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
    auto heads = read_head_seeds(cfg_.assets.head_seeds);
    auto triples = read_triple_seeds(cfg_.assets.triple_seeds);
    for (const auto& i : heads.issues) problems.push_back(i.describe());
    for (const auto& i : triples.issues) problems.push_back(i.describe());
    std::size_t names = 0;
    try {
      names = load_name_pool(cfg_.assets.names).size();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }

    json per_type = json::object();
    for (auto kt : kAllKnowledgeTypes) {
      auto n = std::count_if(heads.items.begin(), heads.items.end(),
                             [&](const HeadItem& h) { return h.knowledge_type == kt; });
      per_type[std::string(to_string(kt))] = n;
      if (n < cfg_.plan.seeds_per_type) {
        problems.push_back(cfg_.assets.head_seeds.string() + ": " + std::to_string(n) + " " +
                           std::string(to_string(kt)) + " seeds, plan.seeds_per_type needs " +
                           std::to_string(cfg_.plan.seeds_per_type));
      }
    }
    json per_rel = json::object();
    for (auto r : kAllRelations) {
      auto n = std::count_if(triples.items.begin(), triples.items.end(),
                             [&](const Triple& t) { return t.relation == r; });
      per_rel[std::string(to_string(r))] = n;
      if (n < cfg_.plan.triple_seeds_per_relation) {
        problems.push_back(cfg_.assets.triple_seeds.string() + ": " + std::to_string(n) + " " +
                           std::string(to_string(r)) + " seeds, plan.triple_seeds_per_relation needs " +
                           std::to_string(cfg_.plan.triple_seeds_per_relation));
      }
    }
    for (const auto& p : problems) err_ << "seed-check: " << p << '\n';
    json s{{"head_seeds", per_type}, {"triple_seeds", per_rel}, {"names", names}, {"problems", problems}};
    if (!problems.empty()) {
      summary_["seed-check"] = s;
      throw SeedCheckFailed("seed check found " + std::to_string(problems.size()) + " problem(s)");
    }
    out_ << "seed-check: ok (" << heads.items.size() << " head seeds, " << triples.items.size()
         << " triple seeds, " << names << " names)\n";
    return s;
  }

  json distill_heads() {
    auto pool = load_head_seeds(cfg_.assets.head_seeds);
    json s = json::object();
    for (auto kt : kAllKnowledgeTypes) {
      auto rng = stage_rng("distill-heads:" + std::string(to_string(kt)));
      std::vector<HeadItem> of_type;
      for (const auto& h : pool) {
        if (h.knowledge_type == kt) of_type.push_back(h);
      }
      auto seeds = sample_seeds<HeadItem>(of_type, static_cast<std::size_t>(cfg_.plan.seeds_per_type), rng);
      for (auto& h : seeds) h.origin = Origin::Seed;
      const auto name = std::string(to_string(kt));

      if (flags_.dry_run) {
        Rng preview = rng;
        auto sample = sample_seeds<HeadItem>(seeds, static_cast<std::size_t>(cfg_.plan.head_spec.example_count),
                                              preview);
        out_ << "=== head prompt (" << name << ") ===\n"
             << render_head_prompt(templates(), sample, kt, cfg_.plan.head_spec) << "\n";
        continue;
      }

      store().insert_heads(seeds);
      std::vector<HeadItem> existing;
      for (const auto& h : store().heads(kt)) {
        if (h.origin == Origin::Distilled) existing.push_back(h);
      }
      HeadDistillOptions opts;
      opts.existing = existing;
      opts.max_output_tokens = cfg_.gateway.max_output_tokens;
      auto res = ckg::distill_heads(kt, seeds, cfg_.plan, gateway(), templates(), rng, opts);
      auto ins = store().insert_heads(res.heads);
      for (const auto& w : res.warnings) err_ << "distill-heads: " << w << '\n';
      s[name] = {{"new", ins.inserted},
                 {"existing", existing.size()},
                 {"seeds", seeds.size()},
                 {"total", store().heads(kt).size()},
                 {"requests", res.requests},
                 {"cycles", res.cycles},
                 {"stalled", res.stalled},
                 {"cap_reached", res.cap_reached}};
      out_ << "distill-heads: " << name << " +" << ins.inserted << " (" << store().heads(kt).size()
           << " stored, " << res.requests << " requests" << (res.stalled ? ", stalled" : "") << ")\n";
      if (res.cap_reached) {
        err_ << "distill-heads: request cap reached; rerun to continue\n";
        break;
      }
    }
    return s;
  }

  json distill_tails() {
    auto seeds = triple_seed_index();
    auto names = load_name_pool(cfg_.assets.names);
    auto heads = store().heads();
    auto tasks = enumerate_tail_tasks(heads);
    auto rng = stage_rng("distill-tails");
    if (flags_.dry_run) {
      auto cp = Checkpoint::load(checkpoint_path());
      if (!cp.rng_state.empty()) rng.restore(cp.rng_state);
      int shown = 0;
      for (const auto& t : tasks) {
        if (cp.completed.contains(t.id())) continue;
        if (shown++ >= flags_.limit) break;
        auto task_rng = tail_task_rng(rng, t);
        auto p = prepare_tail_prompt(t, seeds, cfg_.plan, templates(), names, task_rng, cfg_.gateway.model_id,
                                     cfg_.gateway.max_output_tokens);
        out_ << "=== tail prompt " << t.id() << " ===\n" << p.request.messages.back().content << "\n";
      }
      return json{{"tasks", tasks.size()}, {"shown", std::min<int>(shown, flags_.limit)}};
    }
    auto& gw = gateway();
    TailRunOptions opts;
    opts.checkpoint = checkpoint_path();
    opts.cancel = cancel_;
    opts.distill.max_output_tokens = cfg_.gateway.max_output_tokens;
    auto res = run_tail_stage(tasks, seeds, cfg_.plan, gw, templates(), names, rng, store(), opts);
    for (const auto& e : res.errors) err_ << "distill-tails: " << e << '\n';
    out_ << "distill-tails: " << res.tasks_done << " tasks done, " << res.tasks_resumed << " resumed, "
         << res.tasks_failed << " failed, +" << res.inserted << " triples\n";
    if (res.cap_reached) err_ << "distill-tails: request cap reached; rerun to continue\n";
    if (res.cancelled) err_ << "distill-tails: interrupted; checkpoint saved\n";
    return json{{"tasks_total", res.tasks_total}, {"tasks_done", res.tasks_done},
                {"tasks_resumed", res.tasks_resumed}, {"tasks_failed", res.tasks_failed},
                {"inserted", res.inserted}, {"duplicates", res.duplicates},
                {"rejected", res.rejected}, {"cap_reached", res.cap_reached},
                {"cancelled", res.cancelled}};
  }

  json filter() {
    std::vector<Triple> raw;
    for (auto& t : store().triples(Relation::HinderedBy)) {
      if (t.filter_status == FilterStatus::Raw) raw.push_back(std::move(t));
    }
    if (raw.empty()) {
      out_ << "filter: no unfiltered HinderedBy triples\n";
      return json{{"total", 0}, {"kept", 0}, {"removed", 0}};
    }
    const auto dir = cfg_.work_dir / "filter";
    std::filesystem::create_directories(dir);
    const auto judged_path = dir / "judged.jsonl";
    const auto model_path = dir / "model.txt";
    auto rng = stage_rng("filter");
    json s = json::object();

    FilterModel model;
    if (!cfg_.filter.external_command.empty()) {
      model = FilterModel::external(cfg_.filter.external_command, cfg_.filter.train.threshold);
      s["model"] = "external";
    } else {
      std::vector<JudgedSample> judged;
      if (std::filesystem::exists(judged_path) && !flags_.rejudge) {
        judged = read_judged_samples(judged_path);
        s["judged_reused"] = judged.size();
      } else {
        auto sample = sample_for_judging(raw, static_cast<std::size_t>(cfg_.filter.judge_sample), rng);
        if (flags_.dry_run) {
          for (int i = 0; i < flags_.limit && i < static_cast<int>(sample.size()); ++i) {
            out_ << "=== judge prompt " << sample[i].id() << " ===\n"
                 << render_judge_prompt(templates(), sample[i], cfg_.filter.judge_name) << "\n";
          }
          return json{{"sample", sample.size()}};
        }
        JudgeOptions jo;
        jo.name = cfg_.filter.judge_name;
        auto jr = judge(sample, gateway(), templates(), jo);
        if (jr.cap_reached) throw RequestCapReached("request cap reached while judging; rerun with a larger cap");
        for (const auto& [i, e] : jr.skipped) err_ << "filter: judge skipped " << sample[i].id() << ": " << e << '\n';
        judged = std::move(jr.samples);
        write_judged_samples(judged_path, judged);
        s["judged"] = judged.size();
        s["unmappable"] = jr.unmappable;
        s["skipped"] = jr.skipped.size();
      }
      std::size_t valid = std::count_if(judged.begin(), judged.end(),
                                        [](const JudgedSample& j) { return j.label == JudgeLabel::Valid; });
      s["judged_valid"] = valid;
      auto tr = train_filter(judged, cfg_.filter.holdout_fraction, rng, cfg_.filter.train);
      model = std::move(tr.model);
      s["model"] = "ngram_linear";
      s["holdout_accuracy"] = tr.holdout_accuracy;
      s["threshold"] = model.threshold;
      out_ << "filter: judged " << judged.size() << " (" << valid << " valid), holdout accuracy "
           << tr.holdout_accuracy << '\n';
    }
    if (flags_.dry_run) return s;
    model.save(model_path);

    auto outcome = apply_filter(raw, model);
    std::vector<StatusUpdate> updates;
    updates.reserve(raw.size());
    for (const auto& t : outcome.kept) updates.push_back({t.key(), FilterStatus::Kept});
    for (const auto& t : outcome.removed) updates.push_back({t.key(), FilterStatus::Removed});
    store().set_filter_status(updates);
    s["total"] = outcome.report.total;
    s["kept"] = outcome.report.kept;
    s["removed"] = outcome.report.removed;
    s["kept_rate"] = outcome.report.kept_rate;
    write_json(dir / "report.json", s);
    out_ << "filter: kept " << outcome.report.kept << " of " << outcome.report.total << " HinderedBy triples\n";
    return s;
  }

  json stats() {
    std::vector<Edition> editions;
    if (flags_.edition.empty() || flags_.edition == "both") editions = {Edition::Raw, Edition::High};
    else editions = {edition_flag(Edition::High)};
    json s = json::object();
    for (auto e : editions) {
      auto st = store().compute_stats(e);
      print_stats(out_, st);
      s[std::string(to_string(e))] = stats_json(st);
    }
    s["store_digest"] = store().digest();
    write_json(cfg_.work_dir / "stats.json", s);
    return s;
  }

  json export_editions(std::vector<Edition> editions) {
    auto format = cfg_.exports.format;
    if (!flags_.format.empty()) {
      auto f = parse_export_format(flags_.format);
      if (!f) throw ConfigError("--format must be tsv or jsonl");
      format = *f;
    }
    auto split = cfg_.exports.split;
    if (!flags_.split.empty()) split = parse_split(flags_.split);
    if (flags_.no_split) split.reset();
    json s = json::object();
    for (auto e : editions) {
      auto dir = flags_.out_dir.empty() ? cfg_.work_dir / "export" / std::string(to_string(e))
                                        : std::filesystem::path(flags_.out_dir) / std::string(to_string(e));
      auto rng = stage_rng("export");
      auto m = export_triples(store(), e, format, split, rng, dir);
      out_ << "export: " << m.total << " " << to_string(e) << " triples to " << dir.string() << '\n';
      s[std::string(to_string(e))] = {{"dir", dir.string()}, {"total", m.total}, {"digest", m.digest}};
    }
    return s;
  }

  json export_cmd() {
    if (flags_.edition.empty() || flags_.edition == "both") return export_editions({Edition::Raw, Edition::High});
    return export_editions({edition_flag(Edition::High)});
  }

  json eval_sample() {
    const auto path = sample_path();
    if (std::filesystem::exists(path) && !flags_.force) {
      auto existing = EvalSample::load(path);
      out_ << "eval-sample: keeping existing sample of " << existing.size() << " items (" << path.string()
           << "); pass --force to redraw\n";
      return json{{"items", existing.size()}, {"reused", true}};
    }
    int n = flags_.per_stratum.value_or(cfg_.eval.per_stratum);
    auto rng = stage_rng("eval-sample");
    auto sample = build_eval_sample(store(), n, rng);
    std::filesystem::create_directories(path.parent_path());
    sample.save(path);
    out_ << "eval-sample: " << sample.size() << " items in " << kAllStrata.size() << " strata -> " << path.string()
         << '\n';
    return json{{"items", sample.size()}, {"per_stratum", n}, {"path", path.string()}};
  }

  json serve() {
    const auto path = sample_path();
    if (!std::filesystem::exists(path)) throw ConfigError("no eval sample at " + path.string() + "; run eval-sample");
    auto sample = EvalSample::load(path);
    EvalService service(std::move(sample), cfg_.eval.annotators, templates(),
                        cfg_.work_dir / "eval" / "annotations.jsonl", cfg_.rng_seed);
    ServerOptions so;
    so.host = flags_.host.empty() ? cfg_.eval.host : flags_.host;
    so.port = flags_.port.value_or(cfg_.eval.port);
    so.reviewer = flags_.reviewer || cfg_.eval.reviewer;
    if (!flags_.static_dir.empty()) so.static_dir = std::filesystem::path(flags_.static_dir);
    else so.static_dir = cfg_.eval.static_dir;
    AnnotationServer server(service, so);
    int port = server.start();
    out_ << "serve: listening on http://" << so.host << ":" << port << "/\n" << std::flush;
    while (!(cancel_ && cancel_->load())) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    auto p = service.progress();
    return json{{"port", port}, {"coverage", p.coverage}};
  }

  json run_all() {
    json s = json::object();
    s["seed-check"] = seed_check();
    s["distill-heads"] = distill_heads();
    if (flags_.dry_run) return s;
    s["distill-tails"] = distill_tails();
    if (cancelled()) return s;
    s["filter"] = filter();
    s["stats"] = stats();
    s["export"] = export_editions({Edition::Raw, Edition::High});
    s["eval-sample"] = eval_sample();
    return s;
  }

  json& summary() { return summary_; }
  std::int64_t requests_issued() const { return gateway_ ? gateway_->requests_issued() : 0; }
  std::string transport_name() const {
    if (!flags_.replay.empty()) return "replay";
    if (!flags_.mock.empty()) return "mock:" + flags_.mock;
    return "http";
  }

 private:
  bool cancelled() const { return cancel_ && cancel_->load(); }

  Edition edition_flag(Edition fallback) const {
    if (flags_.edition.empty()) return fallback;
    auto e = parse_edition(flags_.edition);
    if (!e) throw ConfigError("--edition must be raw, high or both");
    return *e;
  }

  Rng stage_rng(std::string_view stage) const {
    Rng base(cfg_.rng_seed);
    return base.fork(text::fnv1a64(stage));
  }

  std::filesystem::path checkpoint_path() const { return cfg_.work_dir / "tail_checkpoint.json"; }
  std::filesystem::path sample_path() const { return cfg_.work_dir / "eval" / "sample.jsonl"; }

  const TemplateSet& templates() {
    if (!templates_) templates_ = TemplateSet::load(cfg_.assets.templates);
    return *templates_;
  }

  GraphStore& store() {
    if (!store_) store_ = std::make_unique<GraphStore>(cfg_.work_dir / "graph.ckgstore");
    return *store_;
  }

  TripleSeedIndex triple_seed_index() {
    auto all = load_triple_seeds(cfg_.assets.triple_seeds);
    auto rng = stage_rng("triple-seeds");
    std::vector<Triple> picked;
    for (auto r : kAllRelations) {
      std::vector<Triple> of_rel;
      for (const auto& t : all) {
        if (t.relation == r) of_rel.push_back(t);
      }
      auto s = sample_seeds<Triple>(of_rel, static_cast<std::size_t>(cfg_.plan.triple_seeds_per_relation), rng);
      picked.insert(picked.end(), s.begin(), s.end());
    }
    return TripleSeedIndex(picked);
  }

  Gateway& gateway() {
    if (gateway_) return *gateway_;
    std::shared_ptr<Transport> t;
    bool simulated = true;
    if (!flags_.replay.empty()) {
      if (!flags_.mock.empty()) throw ConfigError("--replay and --mock are mutually exclusive");
      t = std::make_shared<ReplayTransport>(flags_.replay);
    } else if (!flags_.mock.empty()) {
      if (flags_.mock != "synthetic") throw ConfigError("--mock supports only 'synthetic'");
      SyntheticOptions so;
      so.seed = cfg_.rng_seed;
      so.invalid_rate = flags_.mock_invalid_rate;
      t = std::make_shared<SyntheticTransport>(so);
    } else {
      t = std::make_shared<HttpTransport>(cfg_.gateway);
      simulated = false;
    }
    if (!flags_.record.empty()) t = std::make_shared<RecordingTransport>(t, flags_.record, true);
    // Simulated endpoints run on virtual time so rate limits and backoff cost nothing.
    std::shared_ptr<Clock> clock = simulated ? std::shared_ptr<Clock>(std::make_shared<VirtualClock>()) : steady_clock();
    gateway_ = std::make_unique<Gateway>(cfg_.gateway, t, clock, cfg_.rng_seed);
    return *gateway_;
  }

  static void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << j.dump(2) << '\n';
  }

  PipelineConfig cfg_;
  Flags flags_;
  std::ostream& out_;
  std::ostream& err_;
  const std::atomic<bool>* cancel_;
  std::optional<TemplateSet> templates_;
  std::unique_ptr<GraphStore> store_;
  std::unique_ptr<Gateway> gateway_;
  json summary_ = json::object();
};

std::string iso_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel) {
  CLI::App app{"Commonsense knowledge graph distillation pipeline", "ckg"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config, "Pipeline config (JSON)");
  app.add_option("--work-dir", f.work_dir, "Override the working directory");
  app.add_option("--rng-seed", f.rng_seed, "Override the RNG seed");
  app.add_option("--request-cap", f.request_cap, "Override the request cap (0 disables)");
  app.add_option("--mock", f.mock, "Use a simulated endpoint instead of HTTP")->check(CLI::IsMember({"synthetic"}));
  app.add_option("--mock-invalid-rate", f.mock_invalid_rate, "Share of HinderedBy tails the mock marks invalid")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--replay", f.replay, "Answer requests from a recorded transcript");
  app.add_option("--record", f.record, "Append every exchange to a transcript");
  app.add_flag("--dry-run", f.dry_run, "Print the prompts that would be sent and stop");
  app.add_option("--limit", f.limit, "Prompts shown by --dry-run")->check(CLI::PositiveNumber);
  app.add_option("--summary", f.summary, "Where to write the run summary JSON");

  app.add_subcommand("seed-check", "Validate seed files, templates and the name pool");
  app.add_subcommand("distill-heads", "Collect head items for every knowledge type");
  app.add_subcommand("distill-tails", "Collect tail items for every valid (head, relation) pair");
  auto* filt = app.add_subcommand("filter", "Judge a HinderedBy sample, train the filter and apply it");
  filt->add_flag("--rejudge", f.rejudge, "Judge a fresh sample even if one is on disk");
  auto* stats = app.add_subcommand("stats", "Print and save graph statistics");
  stats->add_option("--edition", f.edition, "raw, high or both")->check(CLI::IsMember({"raw", "high", "both"}));
  auto* exp = app.add_subcommand("export", "Write triples for downstream training");
  exp->add_option("--edition", f.edition, "raw, high or both")->check(CLI::IsMember({"raw", "high", "both"}));
  exp->add_option("--format", f.format, "tsv or jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));
  exp->add_option("--out", f.out_dir, "Output root (default <work>/export)");
  exp->add_option("--split", f.split, "train,dev,test fractions, e.g. 0.8,0.1,0.1");
  exp->add_flag("--no-split", f.no_split, "Write a single file even if the config sets a split");
  auto* evs = app.add_subcommand("eval-sample", "Draw the stratified evaluation sample");
  evs->add_option("--per-stratum", f.per_stratum, "Items per stratum")->check(CLI::PositiveNumber);
  evs->add_flag("--force", f.force, "Replace an existing sample");
  auto* serve = app.add_subcommand("serve", "Serve the annotation API and UI");
  serve->add_option("--host", f.host, "Bind address");
  serve->add_option("--port", f.port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--static-dir", f.static_dir, "Directory with the annotation UI bundle");
  serve->add_flag("--reviewer", f.reviewer, "Show strata and filter status to annotators");
  auto* all = app.add_subcommand("run-all", "Run every stage from seed-check to eval-sample");
  all->add_option("--per-stratum", f.per_stratum, "Items per stratum")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ckg: " << e.what() << '\n';
    return kExitConfig;
  }

  std::string command = app.get_subcommands().front()->get_name();
  std::unique_ptr<Runner> runner;
  std::filesystem::path summary_path;
  nlohmann::json summary{{"command", command}, {"started_at", iso_now()}};
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    if (f.config.empty()) throw ConfigError("--config is required");
    auto cfg = load_config(f.config);
    if (!f.work_dir.empty()) cfg.work_dir = std::filesystem::absolute(f.work_dir);
    if (f.rng_seed) cfg.rng_seed = *f.rng_seed;
    if (f.request_cap) cfg.gateway.request_cap = *f.request_cap;
    if (f.per_stratum) cfg.eval.per_stratum = *f.per_stratum;
    cfg.validate();
    summary_path = f.summary.empty() ? cfg.work_dir / "runs" / (command + ".summary.json")
                                     : std::filesystem::path(f.summary);
    summary["config"] = std::filesystem::absolute(cfg.source).string();
    summary["work_dir"] = cfg.work_dir.string();
    summary["rng_seed"] = cfg.rng_seed;
    summary["dry_run"] = f.dry_run;
    runner = std::make_unique<Runner>(std::move(cfg), f, out, err, cancel);
    summary["transport"] = runner->transport_name();

    nlohmann::json result;
    if (command == "seed-check") result = runner->seed_check();
    else if (command == "distill-heads") result = runner->distill_heads();
    else if (command == "distill-tails") result = runner->distill_tails();
    else if (command == "filter") result = runner->filter();
    else if (command == "stats") result = runner->stats();
    else if (command == "export") result = runner->export_cmd();
    else if (command == "eval-sample") result = runner->eval_sample();
    else if (command == "serve") result = runner->serve();
    else if (command == "run-all") result = runner->run_all();
    summary["result"] = result;
    summary["status"] = "ok";
  } catch (const ConfigError& e) {
    err << "ckg " << command << ": " << e.what() << '\n';
    summary["status"] = "error";
    summary["error"] = e.what();
    code = kExitConfig;
  } catch (const std::exception& e) {
    err << "ckg " << command << ": " << e.what() << '\n';
    summary["status"] = "error";
    summary["error"] = e.what();
    code = kExitFailure;
  }

  summary["exit_code"] = code;
  summary["elapsed_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  if (runner) {
    summary["requests_issued"] = runner->requests_issued();
    if (!runner->summary().empty()) summary["partial"] = runner->summary();
  }
  if (!summary_path.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(summary_path.parent_path(), ec);
    std::ofstream sout(summary_path, std::ios::binary | std::ios::trunc);
    if (sout) sout << summary.dump(2) << '\n';
  }
  return code;
}

}  // namespace ckg::app
