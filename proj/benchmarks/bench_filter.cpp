#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ckg/filter.hpp"

namespace {

ckg::Triple sample(int i) {
  auto h = ckg::HeadItem::make("PersonX去跑步" + std::to_string(i % 50), ckg::KnowledgeType::Voluntary);
  return ckg::Triple::make(h, ckg::Relation::HinderedBy, "外面下着大雨" + std::to_string(i));
}

void BM_Featurize(benchmark::State& state) {
  ckg::FeatureSpec spec;
  auto t = sample(1);
  for (auto _ : state) benchmark::DoNotOptimize(ckg::featurize(t, spec));
}
BENCHMARK(BM_Featurize);

void BM_ScoreModel(benchmark::State& state) {
  ckg::FilterModel m;
  m.weights.assign(m.features.hash_size, 0.01);
  std::vector<ckg::Triple> batch;
  for (int i = 0; i < 1000; ++i) batch.push_back(sample(i));
  for (auto _ : state) {
    for (const auto& t : batch) benchmark::DoNotOptimize(m.score(t));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_ScoreModel);

void BM_Train(benchmark::State& state) {
  std::vector<ckg::JudgedSample> samples;
  for (int i = 0; i < 1000; ++i) {
    auto t = sample(i);
    bool bad = i % 3 == 0;
    if (bad) t.tail += "乱";
    samples.push_back({t, bad ? ckg::JudgeLabel::Invalid : ckg::JudgeLabel::Valid, "", false});
  }
  ckg::TrainOptions opts;
  opts.features.hash_size = 1u << 14;
  opts.epochs = 5;
  for (auto _ : state) {
    ckg::Rng rng(1);
    benchmark::DoNotOptimize(ckg::train_filter(samples, 0.2, rng, opts));
  }
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

}  // namespace
