#include <doctest.h>

#include "ckg/error.hpp"
#include "ckg/prompts.hpp"
#include "ckg/text.hpp"
#include "helpers.hpp"

using namespace ckg;
using KT = KnowledgeType;
using R = Relation;

namespace {

std::vector<HeadItem> seeds(KT kt, int n) {
  std::vector<HeadItem> out;
  for (int i = 0; i < n; ++i) out.push_back(HeadItem::make("PersonX做第" + std::to_string(i) + "件事", kt, Origin::Seed));
  return out;
}

std::vector<Triple> examples(R r, int n) {
  std::vector<Triple> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(Triple::make(HeadItem::make("PersonX去公园" + std::to_string(i), KT::Voluntary), r,
                               "PersonX想休息" + std::to_string(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("templates load for both shipped languages") {
  for (auto t : {testing::zh_templates(), testing::en_templates()}) {
    for (auto r : kAllRelations) CHECK_FALSE(t.sentence(r).empty());
    for (auto kt : kAllKnowledgeTypes) CHECK_FALSE(t.label(kt).empty());
    CHECK(t.judge_prompt.find("{SENTENCE}") != std::string::npos);
  }
}

TEST_CASE("missing template directory or relation row is a config error") {
  CHECK_THROWS_AS(TemplateSet::load("/nonexistent/templates"), ConfigError);
  testing::TempDir dir("tmpl");
  for (auto f : {"head_prompt.txt", "tail_prompt.txt", "judge_prompt.txt", "knowledge_types.tsv"}) {
    std::filesystem::copy_file(testing::asset_dir() + "/templates/zh/" + f, dir / f);
  }
  testing::write_file(dir / "relations.tsv", "xWant\t{Head}，PersonX想{Tail}\n");
  CHECK_THROWS_AS(TemplateSet::load(dir.path()), ConfigError);
  testing::write_file(dir / "relations.tsv", "xWant\tno slots here\n");
  CHECK_THROWS_AS(TemplateSet::load(dir.path()), ConfigError);
}

TEST_CASE("head prompt lists all seeds in order on numbered lines") {
  auto t = testing::zh_templates();
  auto s = seeds(KT::Voluntary, 10);
  auto p = render_head_prompt(t, s, KT::Voluntary, PromptSpec::head_default());
  std::size_t pos = 0;
  for (int i = 0; i < 10; ++i) {
    auto line = std::to_string(i + 1) + ". " + s[i].text + "\n";
    auto at = p.find(line);
    REQUIRE(at != std::string::npos);
    CHECK(at >= pos);
    CHECK((at == 0 || p[at - 1] == '\n'));
    pos = at;
  }
  CHECK(p.find(t.label(KT::Voluntary)) != std::string::npos);
}

TEST_CASE("head prompt rejects a mismatched seed type and a wrong count") {
  auto t = testing::zh_templates();
  auto s = seeds(KT::Voluntary, 10);
  s[4] = HeadItem::make("PersonX摔倒了", KT::Involuntary, Origin::Seed);
  CHECK_THROWS_AS(render_head_prompt(t, s, KT::Voluntary, PromptSpec::head_default()), SchemaError);
  auto nine = seeds(KT::Voluntary, 9);
  CHECK_THROWS_AS(render_head_prompt(t, nine, KT::Voluntary, PromptSpec::head_default()), SchemaError);
  CHECK_THROWS_AS(render_head_prompt(t, seeds(KT::Voluntary, 8), KT::Voluntary, PromptSpec::tail_default()),
                  SchemaError);
}

TEST_CASE("rendering is pure") {
  auto t = testing::zh_templates();
  auto s = seeds(KT::State, 10);
  CHECK(render_head_prompt(t, s, KT::State, PromptSpec::head_default()) ==
        render_head_prompt(t, s, KT::State, PromptSpec::head_default()));
  auto ex = examples(R::xNeed, 8);
  auto h = testing::head("PersonX去爬山");
  CHECK(render_tail_prompt(t, ex, h, R::xNeed, "小红", PromptSpec::tail_default()) ==
        render_tail_prompt(t, ex, h, R::xNeed, "小红", PromptSpec::tail_default()));
}

TEST_CASE("tail prompt ends with the query sentence carrying the name") {
  for (auto t : {testing::zh_templates(), testing::en_templates()}) {
    auto ex = examples(R::xWant, 8);
    auto h = testing::head("PersonX去跑步");
    auto p = render_tail_prompt(t, ex, h, R::xWant, "小明", PromptSpec::tail_default());
    auto expected_end = substitute_name(render_relation_sentence(t, R::xWant, h.text, t.tail_blank), "小明");
    REQUIRE(p.size() >= expected_end.size());
    CHECK(p.substr(p.size() - expected_end.size()) == expected_end);
    CHECK(text::count_occurrences(p, "PersonX") == 0);
    CHECK(text::count_occurrences(p, "[NAME]") == 0);
    CHECK(text::count_occurrences(p, "小明") >= 9);
    CHECK(p.find("10") != std::string::npos);
    for (const auto& e : ex) CHECK(p.find(substitute_name(e.tail, "小明")) != std::string::npos);
  }
}

TEST_CASE("tail prompt refuses invalid pairs, foreign examples and empty names") {
  auto t = testing::zh_templates();
  auto state = testing::head("PersonX很饿", KT::State);
  CHECK_THROWS_AS(render_tail_prompt(t, examples(R::xIntent, 8), state, R::xIntent, "小明", PromptSpec::tail_default()),
                  SchemaError);
  auto mixed = examples(R::xWant, 8);
  mixed[3] = examples(R::xNeed, 1)[0];
  CHECK_THROWS_AS(render_tail_prompt(t, mixed, testing::head("PersonX去跑步"), R::xWant, "小明",
                                     PromptSpec::tail_default()),
                  SchemaError);
  CHECK_THROWS_AS(render_tail_prompt(t, examples(R::xWant, 8), testing::head("PersonX去跑步"), R::xWant, "",
                                     PromptSpec::tail_default()),
                  SchemaError);
}

TEST_CASE("no tail prompt can be built for any invalid cell") {
  auto t = testing::zh_templates();
  for (auto kt : kAllKnowledgeTypes) {
    auto h = testing::head("PersonX在家", kt);
    for (auto r : kAllRelations) {
      if (is_valid_pair(kt, r)) {
        CHECK_NOTHROW(render_tail_prompt(t, examples(r, 8), h, r, "小明", PromptSpec::tail_default()));
      } else {
        CHECK_THROWS_AS(render_tail_prompt(t, examples(r, 8), h, r, "小明", PromptSpec::tail_default()), SchemaError);
      }
    }
  }
}

TEST_CASE("judge prompt embeds the relation sentence") {
  auto t = testing::zh_templates();
  auto tr = testing::hindered("PersonX去跑步", "下大雨");
  auto p = render_judge_prompt(t, tr);
  CHECK(p.find(render_relation_sentence(t, R::HinderedBy, tr.head.text, tr.tail)) != std::string::npos);
  auto named = render_judge_prompt(t, tr, "小李");
  CHECK(named.find("PersonX") == std::string::npos);
  CHECK(named.find("小李去跑步") != std::string::npos);
}

TEST_CASE("sentence frame splits around the tail slot") {
  auto t = testing::zh_templates();
  auto f = sentence_frame(t, R::xWant, "PersonX去跑步");
  CHECK(f.prefix + "喝水" + f.suffix == render_relation_sentence(t, R::xWant, "PersonX去跑步", "喝水"));
  CHECK(substitute_name("[NAME]和PersonX", "阿强") == "阿强和阿强");
}
