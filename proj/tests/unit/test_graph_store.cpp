#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "ckg/error.hpp"
#include "ckg/graph_store.hpp"
#include "ckg/text.hpp"
#include "helpers.hpp"

using namespace ckg;
using KT = KnowledgeType;
using R = Relation;

namespace {

struct FixtureRow {
  Triple triple;
  std::tuple<std::string, std::string, std::string, std::string> canonical;
};

std::vector<FixtureRow> load_10k() {
  std::ifstream in(testing::fixture_dir() + "/triples_10k.tsv");
  std::vector<FixtureRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    REQUIRE(f.size() == 5);
    auto kt = parse_knowledge_type(f[1]);
    auto rel = parse_relation(f[2]);
    REQUIRE(kt);
    REQUIRE(rel);
    rows.push_back({Triple::make(HeadItem::make(f[0], *kt), *rel, f[3]), {f[0], f[1], f[2], f[4]}});
  }
  return rows;
}

std::array<RelationStats, 7> table3_rows(std::int64_t& hindered_kept) {
  std::ifstream in(testing::fixture_dir() + "/relation_stats.tsv");
  std::array<RelationStats, 7> rows{};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string name;
    std::int64_t tails = 0, triples = 0;
    std::getline(ss, name, '\t');
    ss >> tails >> triples;
    if (name == "HinderedBy-kept") {
      hindered_kept = triples;
      continue;
    }
    auto r = parse_relation(name);
    REQUIRE(r);
    rows[static_cast<std::size_t>(*r)] = {tails, triples};
  }
  return rows;
}

std::vector<Triple> five_fresh() {
  return {testing::triple("PersonX去跑步", R::xWant, "喝水"), testing::triple("PersonX去跑步", R::xNeed, "买鞋"),
          testing::hindered("PersonX去跑步", "下雨"), testing::triple("PersonX很饿", R::xWant, "吃饭", KT::State),
          testing::triple("PersonX摔倒了", R::xReact, "疼", KT::Involuntary)};
}

}  // namespace

TEST_CASE("five fresh plus two repeats inserts five") {
  GraphStore s;
  auto batch = five_fresh();
  batch.push_back(batch[0]);
  batch.push_back(testing::triple("PersonX去跑步", R::xNeed, "买鞋。"));
  auto r = s.insert_triples(batch);
  CHECK(r.inserted == 5);
  CHECK(r.duplicates == 2);
  CHECK(r.rejected.empty());
  auto again = s.insert_triples(batch);
  CHECK(again.inserted == 0);
  CHECK(again.duplicates == 7);
  CHECK(s.triple_count() == 5);
  CHECK(s.head_count() == 3);
}

TEST_CASE("invalid triples are rejected with a diagnostic and the batch continues") {
  GraphStore s;
  auto batch = five_fresh();
  Triple bad = testing::triple("PersonX很饿", R::xWant, "吃饭", KT::State);
  bad.relation = R::xIntent;
  batch.insert(batch.begin() + 2, bad);
  auto r = s.insert_triples(batch);
  CHECK(r.inserted == 5);
  REQUIRE(r.rejected.size() == 1);
  CHECK(r.rejected[0].rfind("2: ", 0) == 0);
  CHECK(r.rejected[0].find("xIntent") != std::string::npos);
}

TEST_CASE("10K fixture counts equal a set-based oracle and re-ingest changes nothing") {
  auto rows = load_10k();
  REQUIRE(rows.size() == 10000);
  std::set<std::tuple<std::string, std::string, std::string, std::string>> oracle;
  std::set<std::pair<std::string, std::string>> head_oracle;
  std::array<std::set<std::string>, 7> tails_oracle;
  for (const auto& r : rows) {
    oracle.insert(r.canonical);
    head_oracle.insert({std::get<0>(r.canonical), std::get<1>(r.canonical)});
  }
  for (const auto& c : oracle) {
    tails_oracle[static_cast<std::size_t>(*parse_relation(std::get<2>(c)))].insert(std::get<3>(c));
  }
  std::vector<Triple> batch;
  for (const auto& r : rows) batch.push_back(r.triple);

  GraphStore s;
  std::int64_t inserted = 0, dups = 0;
  for (std::size_t begin = 0; begin < batch.size(); begin += 997) {
    std::span<const Triple> chunk(batch.data() + begin, std::min<std::size_t>(997, batch.size() - begin));
    auto res = s.insert_triples(chunk);
    inserted += res.inserted;
    dups += res.duplicates;
  }
  CHECK(inserted == static_cast<std::int64_t>(oracle.size()));
  CHECK(inserted + dups == 10000);
  CHECK(s.triple_count() == oracle.size());
  CHECK(s.head_count() == head_oracle.size());
  auto stats = s.compute_stats(Edition::Raw);
  CHECK(stats.triples == static_cast<std::int64_t>(oracle.size()));
  for (auto r : kAllRelations) {
    CHECK(stats.of(r).unique_tails == static_cast<std::int64_t>(tails_oracle[static_cast<std::size_t>(r)].size()));
  }

  auto before = s.compute_stats(Edition::Raw);
  auto again = s.insert_triples(batch);
  CHECK(again.inserted == 0);
  CHECK(again.duplicates == 10000);
  CHECK(s.compute_stats(Edition::Raw) == before);
}

TEST_CASE("stats equal a brute-force recount of a full scan") {
  auto rows = load_10k();
  GraphStore s;
  std::vector<Triple> batch;
  for (std::size_t i = 0; i < 2000; ++i) batch.push_back(rows[i].triple);
  s.insert_triples(batch);
  std::vector<StatusUpdate> updates;
  int n = 0;
  for (const auto& t : s.triples(R::HinderedBy)) {
    updates.push_back({t.key(), (n++ % 3 == 0) ? FilterStatus::Removed : FilterStatus::Kept});
  }
  s.set_filter_status(updates);
  for (auto e : {Edition::Raw, Edition::High}) {
    auto stats = s.compute_stats(e);
    std::array<std::int64_t, 7> count{};
    std::array<std::set<std::string>, 7> tails;
    std::set<std::string> all_tails;
    for (const auto& t : s.triples()) {
      if (e == Edition::High && t.filter_status == FilterStatus::Removed) continue;
      ++count[static_cast<std::size_t>(t.relation)];
      tails[static_cast<std::size_t>(t.relation)].insert(t.tail);
      all_tails.insert(t.tail);
    }
    std::int64_t total = 0;
    for (auto r : kAllRelations) {
      const auto i = static_cast<std::size_t>(r);
      CHECK(stats.of(r).triples == count[i]);
      CHECK(stats.of(r).unique_tails == static_cast<std::int64_t>(tails[i].size()));
      total += count[i];
    }
    CHECK(stats.triples == total);
    CHECK(stats.triples == stats.sum_relation_triples());
    CHECK(stats.unique_tails == static_cast<std::int64_t>(all_tails.size()));
    CHECK(stats.unique_heads == static_cast<std::int64_t>(s.head_count()));
    CHECK(stats.edition == e);
  }
  auto raw = s.compute_stats(Edition::Raw);
  auto high = s.compute_stats(Edition::High);
  CHECK(high.triples < raw.triples);
  CHECK(high.triples == raw.triples - (n + 2) / 3);
}

TEST_CASE("per-relation fixture sums to the published corpus totals") {
  std::int64_t kept = 0;
  auto rows = table3_rows(kept);
  auto raw = GraphStats::from_relation_rows(Edition::Raw, rows, 185075, 5783395);
  CHECK(raw.triples == 11087873);
  CHECK(raw.sum_relation_triples() == 11087873);
  CHECK(kept == 1223868);
  CHECK(high_edition_triples(raw, kept) == 10463219);
  CHECK(high_edition_triples(raw, raw.of(R::HinderedBy).triples) == raw.triples);
}

TEST_CASE("empty store has all-zero stats") {
  GraphStore s;
  for (auto e : {Edition::Raw, Edition::High}) {
    auto st = s.compute_stats(e);
    CHECK(st.triples == 0);
    CHECK(st.unique_heads == 0);
    CHECK(st.unique_tails == 0);
    for (auto r : kAllRelations) CHECK(st.of(r) == RelationStats{});
  }
  CHECK(s.edition_triples(Edition::High).empty());
}

TEST_CASE("high edition equals raw iff nothing was removed") {
  GraphStore s;
  s.insert_triples(five_fresh());
  auto key = testing::hindered("PersonX去跑步", "下雨").key();
  CHECK(s.compute_stats(Edition::High).triples == s.compute_stats(Edition::Raw).triples);
  std::vector<StatusUpdate> keep = {{key, FilterStatus::Kept}};
  CHECK(s.set_filter_status(keep) == 1);
  CHECK(s.set_filter_status(keep) == 0);
  CHECK(s.compute_stats(Edition::High).triples == s.compute_stats(Edition::Raw).triples);
  std::vector<StatusUpdate> remove = {{key, FilterStatus::Removed}};
  s.set_filter_status(remove);
  CHECK(s.compute_stats(Edition::High).triples == s.compute_stats(Edition::Raw).triples - 1);
  CHECK(s.compute_stats(Edition::High).unique_heads == s.compute_stats(Edition::Raw).unique_heads);
}

TEST_CASE("status updates are validated before anything is applied") {
  GraphStore s;
  s.insert_triples(five_fresh());
  auto hb = testing::hindered("PersonX去跑步", "下雨").key();
  auto want = testing::triple("PersonX去跑步", R::xWant, "喝水").key();
  std::vector<StatusUpdate> mixed = {{hb, FilterStatus::Removed}, {want, FilterStatus::Kept}};
  CHECK_THROWS_AS(s.set_filter_status(mixed), StoreError);
  CHECK(s.find(hb)->filter_status == FilterStatus::Raw);
  std::vector<StatusUpdate> unknown = {{"nope", FilterStatus::Kept}};
  CHECK_THROWS_AS(s.set_filter_status(unknown), StoreError);
  std::vector<StatusUpdate> na = {{hb, FilterStatus::NotApplicable}};
  CHECK_THROWS_AS(s.set_filter_status(na), StoreError);
}

TEST_CASE("persistent store reopens with the same content and digest") {
  testing::TempDir dir("store");
  const auto path = dir / "g.ckgstore";
  std::string digest;
  {
    GraphStore s(path);
    std::vector<HeadItem> seeds = {HeadItem::make("PersonX种子", KT::Voluntary, Origin::Seed)};
    s.insert_heads(seeds);
    s.insert_triples(five_fresh());
    std::vector<StatusUpdate> u = {{testing::hindered("PersonX去跑步", "下雨").key(), FilterStatus::Removed}};
    s.set_filter_status(u);
    digest = s.digest();
  }
  GraphStore back(path);
  CHECK(back.triple_count() == 5);
  CHECK(back.head_count() == 4);
  CHECK(back.digest() == digest);
  CHECK(back.find(testing::hindered("PersonX去跑步", "下雨").key())->filter_status == FilterStatus::Removed);
  auto seeds = back.heads(KT::Voluntary);
  CHECK(std::any_of(seeds.begin(), seeds.end(), [](const HeadItem& h) { return h.origin == Origin::Seed; }));
  CHECK(back.insert_triples(five_fresh()).inserted == 0);
}

TEST_CASE("a torn final batch is dropped and truncated on open") {
  testing::TempDir dir("store");
  const auto path = dir / "g.ckgstore";
  {
    GraphStore s(path);
    s.insert_triples(five_fresh());
  }
  const auto good_size = std::filesystem::file_size(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << R"({"op":"triple","head":"PersonX新","head_type":"voluntary"})" << '\n' << R"({"op":"tri)";
  }
  {
    GraphStore s(path);
    CHECK(s.triple_count() == 5);
  }
  CHECK(std::filesystem::file_size(path) == good_size);
  {
    GraphStore s(path);
    s.insert_triples(std::vector<Triple>{testing::triple("PersonX去跑步", R::xAttr, "勤快")});
  }
  GraphStore s(path);
  CHECK(s.triple_count() == 6);
}

TEST_CASE("corruption before the end of the log is an error") {
  testing::TempDir dir("store");
  const auto path = dir / "g.ckgstore";
  testing::write_file(path, "NOT A STORE\n");
  CHECK_THROWS_AS(GraphStore{path}, StoreError);
  {
    GraphStore s(path.parent_path() / "ok.ckgstore");
    s.insert_triples(five_fresh());
    s.insert_triples(std::vector<Triple>{testing::triple("PersonX去跑步", R::xAttr, "勤快")});
  }
  auto body = testing::read_file(dir / "ok.ckgstore");
  auto first_nl = body.find('\n');
  auto second_nl = body.find('\n', first_nl + 1);
  body.replace(first_nl + 1, second_nl - first_nl - 1, "garbage");
  testing::write_file(dir / "bad.ckgstore", body);
  CHECK_THROWS_AS(GraphStore(dir / "bad.ckgstore"), StoreError);
}

TEST_CASE("edition triples come in canonical order") {
  GraphStore s;
  auto batch = five_fresh();
  std::reverse(batch.begin(), batch.end());
  s.insert_triples(batch);
  auto out = s.edition_triples(Edition::Raw);
  REQUIRE(out.size() == 5);
  for (std::size_t i = 1; i < out.size(); ++i) {
    CHECK(std::tie(out[i - 1].relation, out[i - 1].head.text) <= std::tie(out[i].relation, out[i].head.text));
  }
  GraphStore t;
  t.insert_triples(five_fresh());
  CHECK(t.digest() != s.digest());
  auto a = t.edition_triples(Edition::Raw);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].key() == out[i].key());
}

TEST_CASE("readers see whole batches while a writer inserts") {
  GraphStore s;
  auto rows = load_10k();
  std::atomic<bool> done{false};
  std::atomic<bool> torn{false};
  std::thread reader([&] {
    while (!done) {
      auto n = s.triple_count();
      auto stats = s.compute_stats(Edition::Raw);
      if (stats.triples < static_cast<std::int64_t>(n)) torn = true;
    }
  });
  std::vector<Triple> batch;
  for (const auto& r : rows) batch.push_back(r.triple);
  for (std::size_t b = 0; b < batch.size(); b += 500) {
    s.insert_triples(std::span<const Triple>(batch.data() + b, std::min<std::size_t>(500, batch.size() - b)));
  }
  done = true;
  reader.join();
  CHECK_FALSE(torn);
}

TEST_CASE("edition names round trip") {
  CHECK(parse_edition("raw") == Edition::Raw);
  CHECK(parse_edition("high") == Edition::High);
  CHECK_FALSE(parse_edition("medium"));
  CHECK(to_string(Edition::High) == "high");
}
