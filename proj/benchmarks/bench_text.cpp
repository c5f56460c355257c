#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ckg/text.hpp"

namespace {

const std::vector<std::string>& lines() {
  static const std::vector<std::string> v = {"1. PersonX去超市买菜。", "  - 喝一杯热水！ ", "（3）PersonX 和朋友 一起 去跑步",
                                             "PersonX learns to cook.", "10、整理房间；"};
  return v;
}

void BM_NormalizeItem(benchmark::State& state) {
  std::size_t bytes = 0;
  for (auto _ : state) {
    for (const auto& l : lines()) {
      auto s = ckg::text::normalize_item(l);
      bytes += l.size();
      benchmark::DoNotOptimize(s);
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_NormalizeItem);

void BM_Fnv1a64(benchmark::State& state) {
  std::string s(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(ckg::text::fnv1a64(s));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Fnv1a64)->Range(16, 4096);

}  // namespace
