#include <benchmark/benchmark.h>

#include <random>

#include "gipcnn/slotvm.hpp"

using namespace gipcnn;

namespace {

std::vector<double> random_slots(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

void BM_rotate(benchmark::State& state) {
  const auto slots = static_cast<std::size_t>(state.range(0));
  HEContext ctx(slots, 20);
  SlotVector a = ctx.encrypt(random_slots(slots));
  long r = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctx.rotate(a, r));
    r = (r * 5 + 3) % static_cast<long>(slots);
  }
}
BENCHMARK(BM_rotate)->Arg(1 << 10)->Arg(1 << 13)->Arg(1 << 15);

void BM_mul_plain(benchmark::State& state) {
  const auto slots = static_cast<std::size_t>(state.range(0));
  HEContext ctx(slots, 1 << 20);
  SlotVector a = ctx.encrypt(random_slots(slots), 1 << 19);
  PlainVector p = ctx.encode(random_slots(slots));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctx.mul_plain(a, p));
  }
}
BENCHMARK(BM_mul_plain)->Arg(1 << 10)->Arg(1 << 15);

void BM_mul_ct(benchmark::State& state) {
  const auto slots = static_cast<std::size_t>(state.range(0));
  HEContext ctx(slots, 1 << 20);
  SlotVector a = ctx.encrypt(random_slots(slots), 1 << 19);
  SlotVector b = ctx.encrypt(random_slots(slots), 1 << 19);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctx.mul(a, b));
  }
}
BENCHMARK(BM_mul_ct)->Arg(1 << 10)->Arg(1 << 15);

}  // namespace

BENCHMARK_MAIN();
