#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ckg/graph_store.hpp"

namespace {

std::vector<ckg::Triple> make_batch(int n) {
  std::vector<ckg::Triple> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto h = ckg::HeadItem::make("PersonX事件" + std::to_string(i / 10), ckg::KnowledgeType::Voluntary);
    out.push_back(ckg::Triple::make(h, ckg::kAllRelations[static_cast<std::size_t>(i % 7)], "结果" + std::to_string(i)));
  }
  return out;
}

void BM_InsertInMemory(benchmark::State& state) {
  auto batch = make_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ckg::GraphStore store;
    benchmark::DoNotOptimize(store.insert_triples(batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InsertInMemory)->Arg(1000)->Arg(10000);

void BM_ReinsertDuplicates(benchmark::State& state) {
  auto batch = make_batch(static_cast<int>(state.range(0)));
  ckg::GraphStore store;
  store.insert_triples(batch);
  for (auto _ : state) benchmark::DoNotOptimize(store.insert_triples(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReinsertDuplicates)->Arg(10000);

void BM_ComputeStats(benchmark::State& state) {
  ckg::GraphStore store;
  store.insert_triples(make_batch(20000));
  for (auto _ : state) benchmark::DoNotOptimize(store.compute_stats(ckg::Edition::High));
}
BENCHMARK(BM_ComputeStats);

}  // namespace
