#include <benchmark/benchmark.h>

#include <random>

#include "gipcnn/packing.hpp"

using namespace gipcnn;

namespace {

PlainTensor random_tensor(int c, int h) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1, 1);
  PlainTensor t(c, h, h);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// interleaved (g=4 at h=64, base=16) vs multiplexed (g=1/4 at h=4)
void BM_pack(benchmark::State& state) {
  HEContext ctx(1 << 10, 20);
  const int h = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  PlainTensor t = random_tensor(c, h);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pack(ctx, t, 16));
  }
}
BENCHMARK(BM_pack)->Args({64, 4})->Args({16, 4})->Args({4, 16});

void BM_unpack(benchmark::State& state) {
  HEContext ctx(1 << 10, 20);
  const int h = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  PackedTensor p = pack(ctx, random_tensor(c, h), 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unpack(p));
  }
}
BENCHMARK(BM_unpack)->Args({64, 4})->Args({4, 16});

}  // namespace
