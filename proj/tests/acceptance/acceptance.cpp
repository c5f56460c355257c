// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails or exceeds its time limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app.hpp"
#include "ckg/distiller.hpp"
#include "ckg/eval.hpp"
#include "ckg/filter.hpp"
#include "ckg/graph_store.hpp"
#include "ckg/seeds.hpp"
#include "ckg/text.hpp"
#include "ckg/transports.hpp"
#include "helpers.hpp"

using namespace ckg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && ok_) {
      ok_ = false;
      first_ = what;
    }
  }
  Outcome done(std::string detail) const { return {ok_, ok_ ? std::move(detail) : first_}; }

 private:
  bool ok_ = true;
  std::string first_;
};

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

GatewayConfig mock_gateway() {
  GatewayConfig c;
  c.max_concurrent = 8;
  c.requests_per_minute = 1000000;
  c.max_retries = 2;
  c.request_cap = 0;
  return c;
}

Outcome relation_matrix() {
  Check c;
  const std::set<std::pair<KnowledgeType, Relation>> expected_invalid = {
      {KnowledgeType::Involuntary, Relation::xIntent},
      {KnowledgeType::State, Relation::xReact},
      {KnowledgeType::State, Relation::xIntent}};
  int valid = 0, invalid = 0;
  for (auto kt : kAllKnowledgeTypes) {
    for (auto r : kAllRelations) {
      bool v = is_valid_pair(kt, r);
      c.expect(v != expected_invalid.contains({kt, r}),
               std::string(to_string(kt)) + "/" + std::string(to_string(r)) + " decided wrongly");
      (v ? valid : invalid)++;
    }
  }
  c.expect(valid == 18 && invalid == 3, "expected 18 valid and 3 invalid cells");
  return c.done(std::to_string(valid) + " valid, " + std::to_string(invalid) + " invalid");
}

Outcome corpus_totals() {
  Check c;
  std::ifstream in(std::string(CKG_FIXTURE_DIR) + "/relation_stats.tsv");
  std::string line;
  std::int64_t raw = 0, hindered_raw = -1, hindered_kept = -1;
  std::array<RelationStats, 7> rows{};
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string rel;
    std::int64_t tails = 0, triples = 0;
    ls >> rel >> tails >> triples;
    if (rel == "HinderedBy-kept") {
      hindered_kept = triples;
      continue;
    }
    auto r = parse_relation(rel);
    c.expect(r.has_value(), "unknown relation row " + rel);
    if (!r) continue;
    rows[static_cast<std::size_t>(*r)] = {tails, triples};
    raw += triples;
    if (*r == Relation::HinderedBy) hindered_raw = triples;
  }
  auto stats = GraphStats::from_relation_rows(Edition::Raw, rows, 185075, 5783395);
  c.expect(raw == 11087873, "raw sum is " + std::to_string(raw));
  c.expect(stats.triples == 11087873, "stats triples " + std::to_string(stats.triples));
  c.expect(hindered_raw == 1848522 && hindered_kept == 1223868, "HinderedBy rows missing");
  auto high = high_edition_triples(stats, hindered_kept);
  c.expect(high == 10463219, "high edition is " + std::to_string(high));
  return c.done("raw " + std::to_string(raw) + ", high " + std::to_string(high));
}

Outcome volume_identity() {
  Check c;
  const int H = 20;
  const auto assets = testing::asset_dir();
  auto templates = TemplateSet::load(assets + "/templates/zh");
  auto head_seeds = load_head_seeds(assets + "/seeds/toy/heads.jsonl");
  auto triple_seeds = load_triple_seeds(assets + "/seeds/toy/triples.jsonl");
  auto names = load_name_pool(assets + "/seeds/names.txt");
  DistillPlan plan;
  plan.target_heads_per_type = H;
  plan.seeds_per_type = 6;
  plan.triple_seeds_per_relation = 4;
  plan.head_spec.example_count = 3;
  plan.tail_spec.example_count = 2;
  plan.tail_spec.tails_per_request = 10;
  plan.checkpoint_every = 100;

  SyntheticOptions so;
  so.seed = 11;
  Gateway g(mock_gateway(), std::make_shared<SyntheticTransport>(so), std::make_shared<VirtualClock>());
  Rng rng(11);
  std::vector<HeadItem> heads;
  for (auto kt : kAllKnowledgeTypes) {
    std::vector<HeadItem> seeds;
    for (const auto& h : head_seeds) {
      if (h.knowledge_type == kt) seeds.push_back(h);
    }
    auto r = distill_heads(kt, seeds, plan, g, templates, rng);
    c.expect(static_cast<int>(r.heads.size()) == H, std::string(to_string(kt)) + " heads: " + std::to_string(r.heads.size()));
    heads.insert(heads.end(), r.heads.begin(), r.heads.end());
  }
  GraphStore store;
  auto tasks = enumerate_tail_tasks(heads);
  TripleSeedIndex idx(triple_seeds);
  auto summary = run_tail_stage(tasks, idx, plan, g, templates, names, rng, store);
  c.expect(summary.tasks_failed == 0, "tail tasks failed");
  auto stats = store.compute_stats(Edition::Raw);
  std::string detail;
  for (auto r : kAllRelations) {
    auto expected = static_cast<std::int64_t>(H) * static_cast<std::int64_t>(relation_info(r).valid_types.size()) * 10;
    c.expect(stats.of(r).triples == expected, std::string(to_string(r)) + ": " + std::to_string(stats.of(r).triples) +
                                                  " != " + std::to_string(expected));
    if (r == Relation::xWant || r == Relation::xReact || r == Relation::xIntent) {
      detail += std::string(to_string(r)) + " " + std::to_string(stats.of(r).triples) + " ";
    }
  }
  return c.done(detail + "(H = 20)");
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = app::run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome end_to_end_determinism(const testing::TempDir& dir) {
  Check c;
  auto j = nlohmann::json::parse(testing::read_file(testing::asset_dir() + "/config/toy.json"));
  const auto a = testing::asset_dir();
  j["assets"] = {{"templates", a + "/templates/zh"},
                 {"head_seeds", a + "/seeds/toy/heads.jsonl"},
                 {"triple_seeds", a + "/seeds/toy/triples.jsonl"},
                 {"names", a + "/seeds/names.txt"}};
  j["work_dir"] = (dir / "unused").string();
  testing::write_file(dir / "config.json", j.dump(2));
  const auto cfg = (dir / "config.json").string();
  const auto transcript = (dir / "transcript.jsonl").string();

  c.expect(cli({"--config", cfg, "--work-dir", (dir / "rec").string(), "--mock", "synthetic", "--record", transcript,
                "run-all"}) == 0,
           "recording run failed");
  for (const char* w : {"r1", "r2"}) {
    c.expect(cli({"--config", cfg, "--work-dir", (dir / w).string(), "--replay", transcript, "run-all"}) == 0,
             std::string("replay run ") + w + " failed");
  }
  auto digest_of = [&](const char* w) {
    return nlohmann::json::parse(testing::read_file(dir / w / "stats.json"))["store_digest"].get<std::string>();
  };
  auto d1 = digest_of("r1");
  c.expect(d1 == digest_of("r2"), "store digests differ");
  c.expect(d1 == digest_of("rec"), "replayed store differs from the recorded run");
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "r1" / "export")) {
    if (e.path().extension() != ".tsv") continue;
    auto rel = fs::relative(e.path(), dir / "r1");
    c.expect(testing::read_file(e.path()) == testing::read_file(dir / "r2" / rel), rel.string() + " differs");
    ++files;
  }
  c.expect(files == 6, "expected 6 TSV files, found " + std::to_string(files));
  return c.done(std::to_string(files) + " TSV files identical, digest " + d1.substr(0, 12));
}

std::vector<JudgedSample> labeled(const std::vector<testing::PlantedTriple>& p) {
  std::vector<JudgedSample> out;
  for (const auto& x : p) out.push_back({x.triple, x.valid ? JudgeLabel::Valid : JudgeLabel::Invalid, "", false});
  return out;
}

Outcome filter_efficacy() {
  Check c;
  auto samples = labeled(testing::planted_hindered(2000, 0.3, 7));
  Rng rng(5);
  TrainOptions opts;
  opts.features.hash_size = 1u << 14;
  auto res = train_filter(samples, 0.2, rng, opts);
  c.expect(res.holdout_size == 400, "holdout size " + std::to_string(res.holdout_size));
  c.expect(res.holdout_accuracy >= 0.95, "holdout accuracy " + std::to_string(res.holdout_accuracy));

  auto fresh = testing::planted_hindered(5000, 0.3, 8);
  std::vector<Triple> raw;
  for (const auto& p : fresh) raw.push_back(p.triple);
  auto out = apply_filter(raw, res.model);
  std::set<std::string> removed;
  for (const auto& t : out.removed) removed.insert(t.key());
  double inv = 0, inv_rm = 0, val = 0, val_rm = 0;
  for (const auto& p : fresh) {
    bool r = removed.contains(p.triple.key());
    if (p.valid) {
      ++val;
      val_rm += r;
    } else {
      ++inv;
      inv_rm += r;
    }
  }
  c.expect(inv_rm / inv >= 0.90, "removed only " + std::to_string(inv_rm / inv) + " of planted-invalid");
  c.expect(val_rm / val <= 0.10, "removed " + std::to_string(val_rm / val) + " of planted-valid");
  char buf[160];
  std::snprintf(buf, sizeof buf, "holdout accuracy %.4f, invalid removed %.4f, valid removed %.4f",
                res.holdout_accuracy, inv_rm / inv, val_rm / val);
  return c.done(buf);
}

Outcome gradient_check() {
  Check c;
  Rng rng(2024);
  double worst = 0;
  for (int instance = 0; instance < 100; ++instance) {
    const std::uint32_t dim = 8 + static_cast<std::uint32_t>(rng.below(24));
    const std::size_t n = 3 + rng.below(8);
    std::vector<SparseVector> xs(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < dim; ++j) {
        if (rng.uniform() < 0.4) {
          xs[i].index.push_back(j);
          xs[i].value.push_back(rng.uniform() * 2 - 1);
        }
      }
      ys[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    std::vector<double> w(dim);
    for (auto& x : w) x = rng.uniform() * 2 - 1;
    const double b = rng.uniform() - 0.5;
    const double l2 = rng.uniform() * 0.1;
    auto g = logistic_loss_gradient(w, b, xs, ys, l2);
    const double h = 1e-6;
    auto rel_err = [](double fd, double an) {
      return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    };
    for (std::uint32_t j = 0; j < dim; ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      double fd = (logistic_loss_gradient(wp, b, xs, ys, l2).loss - logistic_loss_gradient(wm, b, xs, ys, l2).loss) / (2 * h);
      worst = std::max(worst, rel_err(fd, g.grad_weights[j]));
    }
    double fdb = (logistic_loss_gradient(w, b + h, xs, ys, l2).loss - logistic_loss_gradient(w, b - h, xs, ys, l2).loss) / (2 * h);
    worst = std::max(worst, rel_err(fdb, g.grad_bias));
  }
  c.expect(worst < 1e-5, "worst relative error " + std::to_string(worst));
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 instances, worst relative error %.2e", worst);
  return c.done(buf);
}

Outcome dedup_idempotence() {
  Check c;
  std::ifstream in(std::string(CKG_FIXTURE_DIR) + "/triples_10k.tsv");
  std::string line;
  std::vector<Triple> batch;
  std::set<std::string> oracle;
  std::set<std::string> oracle_heads;
  std::map<Relation, std::set<std::string>> oracle_tails;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 5) continue;
    auto kt = parse_knowledge_type(f[1]);
    auto r = parse_relation(f[2]);
    if (!kt || !r) continue;
    batch.push_back(Triple::make(HeadItem::make(f[0], *kt), *r, f[3]));
    oracle.insert(f[0] + "\t" + f[1] + "\t" + f[2] + "\t" + f[4]);
    oracle_heads.insert(f[0] + "\t" + f[1]);
    oracle_tails[*r].insert(f[4]);
  }
  c.expect(batch.size() == 10000, "fixture rows " + std::to_string(batch.size()));
  GraphStore store;
  auto first = store.insert_triples(batch);
  c.expect(first.inserted == static_cast<std::int64_t>(oracle.size()), "inserted " + std::to_string(first.inserted));
  c.expect(first.inserted + first.duplicates == 10000, "inserted + duplicates != rows");
  auto before = store.compute_stats(Edition::Raw);
  c.expect(before.triples == static_cast<std::int64_t>(oracle.size()), "stats triples disagree with oracle");
  c.expect(before.unique_heads == static_cast<std::int64_t>(oracle_heads.size()), "head count disagrees with oracle");
  for (auto r : kAllRelations) {
    c.expect(before.of(r).unique_tails == static_cast<std::int64_t>(oracle_tails[r].size()),
             std::string(to_string(r)) + " unique tails disagree with oracle");
  }
  std::int64_t reinserted = 0;
  for (std::size_t off = 0; off < batch.size(); off += 1000) {
    std::span<const Triple> chunk(batch.data() + off, std::min<std::size_t>(1000, batch.size() - off));
    reinserted += store.insert_triples(chunk).inserted;
  }
  reinserted += store.insert_triples(batch).inserted;
  c.expect(reinserted == 0, "re-ingest inserted " + std::to_string(reinserted));
  c.expect(store.compute_stats(Edition::Raw) == before, "stats changed after re-ingest");
  return c.done(std::to_string(oracle.size()) + " unique of 10000 rows; re-ingest inserted 0");
}

EvalSample fixed_sample(int n) {
  EvalSample s;
  for (int i = 0; i < n; ++i) {
    auto t = Triple::make(HeadItem::make("PersonX事", KnowledgeType::Voluntary), Relation::xWant, "尾" + std::to_string(i));
    s.items.push_back({t.id(), t, Stratum::xWant});
  }
  return s;
}

Outcome acceptance_math() {
  Check c;
  auto s = fixed_sample(10);
  std::vector<AnnotationRecord> recs;
  const std::map<std::string, int> yes = {{"a", 8}, {"b", 9}, {"c", 10}};
  for (const auto& [who, k] : yes) {
    for (int i = 0; i < 10; ++i) {
      recs.push_back({s.items[i].sample_id, who, i < k ? AnnotationLabel::Reasonable : AnnotationLabel::Unreasonable, ""});
    }
  }
  auto rep = compute_acceptance(s, recs);
  c.expect(rep.overall && std::abs(*rep.overall - 0.9) < 1e-12, "overall is not 0.9");
  std::vector<std::string> order = {"a", "b", "c"};
  Rng rng(1);
  for (int k = 0; k < 6; ++k) {
    std::next_permutation(order.begin(), order.end());
    auto shuffled = recs;
    rng.shuffle(shuffled);
    auto p = compute_acceptance(s, shuffled, order);
    c.expect(p.overall && *p.overall == *rep.overall, "overall depends on order");
  }

  // 5 items x 3 annotators; reasonable votes per item: 3, 2, 2, 1, 0 -> 3/5.
  auto m = fixed_sample(5);
  const int votes[] = {3, 2, 2, 1, 0};
  std::vector<AnnotationRecord> mv;
  for (int i = 0; i < 5; ++i) {
    for (int a = 0; a < 3; ++a) {
      mv.push_back({m.items[i].sample_id, "a" + std::to_string(a),
                    a < votes[i] ? AnnotationLabel::Reasonable : AnnotationLabel::Unreasonable, ""});
    }
  }
  auto mrep = compute_acceptance(m, mv);
  c.expect(mrep.majority_vote && std::abs(*mrep.majority_vote - 0.6) < 1e-12, "majority vote is not 3/5");
  // a0: 4/5, a1: 3/5, a2: 1/5
  c.expect(mrep.overall && std::abs(*mrep.overall - (0.8 + 0.6 + 0.2) / 3) < 1e-12, "5x3 overall mismatch");
  return c.done("overall 0.9, majority 0.6 on the 5x3 fixture");
}

Outcome stratified_sampling() {
  Check c;
  GraphStore store;
  std::vector<Triple> pop;
  for (auto r : kAllRelations) {
    int n = r == Relation::HinderedBy ? 400 : 150;
    for (int i = 0; i < n; ++i) {
      auto kt = r == Relation::xIntent ? KnowledgeType::Voluntary : kAllKnowledgeTypes[i % 3];
      if (r == Relation::xReact && kt == KnowledgeType::State) kt = KnowledgeType::Involuntary;
      pop.push_back(Triple::make(HeadItem::make("PersonX事" + std::to_string(i % 37), kt), r, "尾" + std::to_string(i)));
    }
  }
  store.insert_triples(pop);
  std::vector<StatusUpdate> upd;
  int k = 0;
  for (const auto& t : store.triples(Relation::HinderedBy)) {
    upd.push_back({t.key(), k++ % 3 == 0 ? FilterStatus::Removed : FilterStatus::Kept});
  }
  store.set_filter_status(upd);
  Rng rng(800);
  auto s = build_eval_sample(store, 100, rng);
  std::map<Stratum, int> per;
  std::set<std::string> keys;
  for (const auto& it : s.items) {
    ++per[it.stratum];
    keys.insert(it.triple.key());
  }
  c.expect(s.size() == 800, "sample size " + std::to_string(s.size()));
  c.expect(keys.size() == 800, "strata overlap");
  for (auto st : kAllStrata) c.expect(per[st] == 100, std::string(to_string(st)) + " has " + std::to_string(per[st]));
  return c.done(std::to_string(s.size()) + " items, " + std::to_string(per.size()) + " disjoint strata");
}

}  // namespace

int main() {
  testing::TempDir dir("acceptance");
  const std::vector<Criterion> criteria = {
      {"relation matrix", 1, relation_matrix},
      {"corpus total arithmetic", 1, corpus_totals},
      {"volume identity on the mock", 10, volume_identity},
      {"end-to-end replay determinism", 30, [&] { return end_to_end_determinism(dir); }},
      {"filter efficacy on planted data", 30, filter_efficacy},
      {"gradient check", 5, gradient_check},
      {"dedup idempotence on the 10K fixture", 10, dedup_idempotence},
      {"acceptance math", 1, acceptance_math},
      {"stratified sampling", 5, stratified_sampling},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs > cr.limit_seconds) {
      o.ok = false;
      o.detail = "took " + std::to_string(secs) + " s, limit " + std::to_string(cr.limit_seconds) + " s";
    }
    char t[32];
    std::snprintf(t, sizeof t, "%.2fs", secs);
    std::cout << (o.ok ? "[PASS] " : "[FAIL] ") << cr.name << " (" << t << "): " << o.detail << '\n';
    failed += !o.ok;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
