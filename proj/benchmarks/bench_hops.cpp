#include <benchmark/benchmark.h>

#include <random>

#include "gipcnn/hops.hpp"
#include "gipcnn/packing.hpp"
#include "gipcnn/polyact.hpp"

using namespace gipcnn;

namespace {

struct Fixture {
  HEContext ctx{1 << 10, 1 << 20};
  PackedTensor packed;
  int channels = 0;

  Fixture(int c, int h, int base) : channels(c) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-1, 1);
    PlainTensor t(c, h, h);
    for (double& v : t.data()) v = dist(rng);
    packed = pack(ctx, t, base);
    // keep plenty of headroom so repeated ops never exhaust levels
    for (auto& ct : packed.cts) ct = ctx.encrypt(ct.slots(), 1 << 19);
  }
};

ConvSpec conv3x3(std::mt19937_64& rng, int cin, int cout, int stride) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  ConvSpec s;
  s.kernel = 3;
  s.stride = stride;
  s.in_channels = cin;
  s.out_channels = cout;
  s.weights.resize(static_cast<std::size_t>(cout) * cin * 9);
  for (double& w : s.weights) w = dist(rng);
  return s;
}

void BM_conv3x3_interleaved(benchmark::State& state) {
  Fixture f(2, 64, 16);  // g = 4
  std::mt19937_64 rng(5);
  ConvSpec s = conv3x3(rng, 2, 2, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(f.ctx, f.packed, s));
  }
}
BENCHMARK(BM_conv3x3_interleaved)->Arg(1)->Arg(2);

void BM_conv3x3_multiplexed(benchmark::State& state) {
  Fixture f(8, 8, 16);  // g = 1/2
  std::mt19937_64 rng(7);
  ConvSpec s = conv3x3(rng, 8, 8, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(f.ctx, f.packed, s));
  }
}
BENCHMARK(BM_conv3x3_multiplexed)->Arg(1)->Arg(2);

void BM_polyact(benchmark::State& state) {
  Fixture f(4, 32, 16);
  std::vector<Monomials> coeffs(4, to_monomial(HermiteCoeffs::kRelu));
  for (auto _ : state) {
    benchmark::DoNotOptimize(polyact_eval(f.ctx, f.packed, coeffs));
  }
}
BENCHMARK(BM_polyact);

void BM_upsample_interleaved(benchmark::State& state) {
  Fixture f(2, 32, 16);  // g = 2: pure ciphertext copies
  for (auto _ : state) {
    benchmark::DoNotOptimize(upsample_nearest(f.ctx, f.packed, 2));
  }
}
BENCHMARK(BM_upsample_interleaved);

}  // namespace
