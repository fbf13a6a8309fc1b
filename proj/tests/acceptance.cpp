// Acceptance suite: runs every criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gipcnn/executor.hpp"
#include "gipcnn/graph.hpp"
#include "gipcnn/hops.hpp"
#include "gipcnn/oracle.hpp"
#include "gipcnn/packing.hpp"
#include "gipcnn/planner.hpp"
#include "gipcnn/polyact.hpp"
#include "gipcnn/slotvm.hpp"
#include "testutil.hpp"

using namespace gipcnn;

namespace {

// frozen by the pre-build dense-sampling oracle (200001-point grid)
constexpr double kReluMaxAbsErr = 0.14960335721826254;
constexpr double kReluPolyAtZero = 0.14960335721826254;

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

// ---- criterion 1: hermite constants and fusion identity -------------------

Check criterion_hermite_constants() {
  Check c;
  const HermiteCoeffs relu = HermiteCoeffs::kRelu;
  const HermiteCoeffs silu = HermiteCoeffs::kSilu;
  c.expect(relu.f == std::array<double, 5>{0.39894228, 0.5, 0.28209479, 0.0,
                                           -0.08143375},
           "relu preset drifted");
  c.expect(silu.f == std::array<double, 5>{0.20662096, 0.5, 0.24808519, 0.0,
                                           -0.03780501},
           "silu preset drifted");

  for (const HermiteCoeffs& f : {relu, silu}) {
    const Monomials a = to_monomial(f);
    c.expect(a[1] == 0.5, "a1 must be exactly 0.5");
    c.expect(a[3] == 0.0, "a3 must vanish for the presets");
    const HermiteCoeffs back = from_monomial(a);
    for (int i = 0; i < 5; ++i) {
      c.expect(std::abs(back.f[i] - f.f[i]) <= 1e-12,
               "basis round trip drifted");
    }
    for (double q : {0.5, 1.0, 2.0, 8.0}) {
      const Monomials fused = fuse_inference(a, q);
      for (int i = 0; i <= 1000; ++i) {
        const double x = -10.0 + 20.0 * i / 1000.0;
        const double lhs = eval_monomials(fused, x);
        const double rhs = q * eval_monomials(a, x / q);
        if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(rhs))) {
          c.expect(false, "fused identity broke at x=" + std::to_string(x) +
                              " q=" + std::to_string(q));
          break;
        }
      }
    }
  }
  return c;
}

// ---- criterion 2: packing bijection over the full combo grid --------------

Check criterion_packing_bijection() {
  Check c;
  HEContext ctx(1024, 5);
  std::mt19937_64 rng(2024);
  for (int C : {1, 2, 4, 8}) {
    for (int H : {1, 2, 4, 8, 16, 32}) {
      for (int base : {1, 2, 4, 8, 16}) {
        const GipLayout layout = GipLayout::make(C, H, H, base, 1024);
        const PackFactor g = layout.factor();
        const double gv = g.value();
        const int expect_cts =
            g.log2() >= 0
                ? static_cast<int>(C * gv * gv)
                : static_cast<int>(std::ceil(C * gv * gv));
        c.expect(layout.ct_count() == expect_cts,
                 "ct count mismatch at C=" + std::to_string(C) +
                     " H=" + std::to_string(H) + " base=" +
                     std::to_string(base));

        std::set<std::pair<int, std::size_t>> seen;
        bool injective = true;
        for (int ch = 0; ch < C && injective; ++ch) {
          for (int y = 0; y < H && injective; ++y) {
            for (int x = 0; x < H; ++x) {
              const SlotAddress a = layout.index_map(ch, y, x);
              if (a.ct < 0 || a.ct >= layout.ct_count() ||
                  !seen.insert({a.ct, a.slot}).second) {
                injective = false;
                break;
              }
            }
          }
        }
        c.expect(injective, "pixel/slot map not injective at C=" +
                                std::to_string(C) + " H=" + std::to_string(H) +
                                " base=" + std::to_string(base));

        PlainTensor t = test::random_tensor(rng, C, H, H);
        c.expect(unpack(pack(ctx, t, base)) == t,
                 "unpack(pack(x)) != x at C=" + std::to_string(C) +
                     " H=" + std::to_string(H) + " base=" +
                     std::to_string(base));
      }
    }
  }
  return c;
}

// ---- criterion 3: operator oracle equivalence ------------------------------

struct GCase {
  int C, H, base;
};
const GCase kGCases[] = {
    {2, 4, 8},  // g = 1/2
    {2, 4, 4},  // g = 1
    {2, 8, 4},  // g = 2
    {1, 8, 2},  // g = 4
};

Check criterion_operator_equivalence() {
  Check c;
  HEContext ctx(64, 24);
  std::mt19937_64 rng(7);
  const int kTrials = 200;

  double worst_conv = 0, worst_deconv = 0, worst_pool = 0, worst_bn = 0,
         worst_act = 0, worst_up = 0;

  for (int t = 0; t < kTrials; ++t) {
    const GCase& gc = kGCases[t % 4];
    const int k = std::array<int, 3>{1, 3, 5}[t % 3];
    const int s = 1 + (t / 4) % 2;
    PlainTensor x = test::random_tensor(rng, gc.C, gc.H, gc.H);
    PackedTensor p = pack(ctx, x, gc.base);

    {  // conv
      const int cout = 1 + static_cast<int>(rng() % 2);
      ConvSpec spec = test::random_conv(rng, gc.C, cout, k, s, t % 2 == 0);
      worst_conv = std::max(
          worst_conv,
          test::packed_vs_ref(conv2d(ctx, p, spec),
                              oracle::conv2d_ref(x, spec)));
    }
    {  // deconv, scale 2, within one family
      const PackFactor gin = p.layout.factor();
      if (relayout_boundary_check(
              gin, propagate_factor(gin, OpShape::upsample, 2))) {
        const int cout = 1 + static_cast<int>(rng() % 2);
        const int dk = 2 + t % 2;
        DeconvSpec spec =
            test::random_deconv(rng, gc.C, cout, dk, 2, t % 2 == 1);
        worst_deconv = std::max(
            worst_deconv,
            test::packed_vs_ref(deconv2d(ctx, p, spec),
                                oracle::deconv2d_ref(x, spec)));
      }
    }
    {  // avgpool 2
      worst_pool = std::max(
          worst_pool, test::packed_vs_ref(avgpool(ctx, p, 2, 2),
                                          oracle::avgpool_ref(x, 2, 2)));
    }
    {  // batchnorm
      AffineSpec af;
      af.scale = test::random_values(rng, static_cast<std::size_t>(gc.C));
      af.shift = test::random_values(rng, static_cast<std::size_t>(gc.C));
      worst_bn = std::max(worst_bn,
                          test::packed_vs_ref(batchnorm_affine(ctx, p, af),
                                              oracle::affine_ref(x, af)));
    }
    {  // polyact with per-channel fused coefficients
      std::vector<Monomials> coeffs;
      const Monomials base_poly = to_monomial(
          t % 2 == 0 ? HermiteCoeffs::kRelu : HermiteCoeffs::kSilu);
      for (int ch = 0; ch < gc.C; ++ch) {
        coeffs.push_back(fuse_inference(base_poly, 0.5 + 0.75 * ch));
      }
      worst_act = std::max(
          worst_act, test::packed_vs_ref(polyact_eval(ctx, p, coeffs),
                                         oracle::polyact_ref(x, coeffs)));
    }
    {  // nearest upsample, scale 2
      worst_up = std::max(
          worst_up, test::packed_vs_ref(upsample_nearest(ctx, p, 2),
                                        oracle::upsample_ref(x, 2)));
    }
  }

  c.expect(worst_conv <= 1e-9, "conv error " + std::to_string(worst_conv));
  c.expect(worst_deconv <= 1e-9,
           "deconv error " + std::to_string(worst_deconv));
  c.expect(worst_pool <= 1e-9, "avgpool error " + std::to_string(worst_pool));
  c.expect(worst_bn <= 1e-9, "batchnorm error " + std::to_string(worst_bn));
  c.expect(worst_act <= 1e-9, "polyact error " + std::to_string(worst_act));
  c.expect(worst_up <= 1e-9, "upsample error " + std::to_string(worst_up));
  return c;
}

// ---- criterion 4: the factor-2 stride-1 3x3 scenario -----------------------

Check criterion_factor2_conv() {
  Check c;
  HEContext ctx(64, 10);
  std::mt19937_64 rng(13);
  for (int C : {1, 2}) {
    PlainTensor x = test::random_tensor(rng, C, 8, 8);
    PackedTensor p = pack(ctx, x, 4);  // g = 2
    c.expect(p.layout.factor().str() == "2", "input factor must be 2");
    c.expect(static_cast<int>(p.cts.size()) == 4 * C,
             "expected 4 input cts per channel");

    ConvSpec spec = test::random_conv(rng, C, C, 3, 1);
    spec.padding = 1;
    PackedTensor y = conv2d(ctx, p, spec);
    c.expect(y.layout.factor().str() == "2", "output factor must be 2");
    c.expect(static_cast<int>(y.cts.size()) == 4 * C,
             "expected 4 output cts per channel");
    c.expect(test::packed_vs_ref(y, oracle::conv2d_ref(x, spec)) <= 1e-9,
             "factor-2 conv disagrees with the oracle");
    c.expect(test::inactive_slots_zero(y), "layout violation: stray slots");
  }
  return c;
}

// ---- criterion 5: propagation rules as a property --------------------------

Check criterion_propagation_property() {
  Check c;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    PackFactor g = PackFactor::from_log2(static_cast<int>(rng() % 7) - 3);
    for (int i = 0; i < 12; ++i) {
      const int pick = static_cast<int>(rng() % 3);
      const int s = 1 << (1 + rng() % 2);
      if (pick == 0) {
        const PackFactor next = propagate_factor(g, OpShape::downsample, s);
        c.expect(next.log2() == g.log2() - (s == 4 ? 2 : 1),
                 "downsample rule violated");
        g = next;
      } else if (pick == 1) {
        const PackFactor next = propagate_factor(g, OpShape::upsample, s);
        c.expect(next.log2() == g.log2() + (s == 4 ? 2 : 1),
                 "upsample rule violated");
        g = next;
      } else {
        c.expect(propagate_factor(g, OpShape::preserve, 1) == g,
                 "preserve rule violated");
      }
    }
  }
  // the planner's layout chain obeys the same law on random graphs
  HEContext ctx(64, 24);
  for (int trial = 0; trial < 20; ++trial) {
    ModelGraph m = test::random_graph(rng, 4);
    const Plan p = plan(m, ctx, 4);
    for (const PlanStep& s : p.steps) {
      OpShape shape = OpShape::preserve;
      int stride = 1;
      if (s.kind == NodeKind::conv) {
        shape = OpShape::downsample;
        stride = s.conv.stride;
      } else if (s.kind == NodeKind::avgpool) {
        shape = OpShape::downsample;
        stride = s.stride;
      } else if (s.kind == NodeKind::deconv) {
        shape = OpShape::upsample;
        stride = s.deconv.stride;
      } else if (s.kind == NodeKind::upsample) {
        shape = OpShape::upsample;
        stride = s.scale;
      }
      c.expect(s.out_layout.factor() ==
                   propagate_factor(s.in_layout.factor(), shape, stride),
               "plan edge violates the propagation rule at " + s.label());
    }
  }
  return c;
}

// ---- criterion 6: depth and cost laws --------------------------------------

Check criterion_depth_cost_laws() {
  Check c;
  HEContext ctx(64, 24);
  std::mt19937_64 rng(19);

  for (const GCase& gc : kGCases) {
    PlainTensor x = test::random_tensor(rng, gc.C, gc.H, gc.H);
    PackedTensor p = pack(ctx, x, gc.base);
    const int l0 = p.level();

    ConvSpec cs = test::random_conv(rng, gc.C, 1, 3, 1);
    c.expect(conv2d(ctx, p, cs).level() == l0 - 1, "conv depth law");
    if (gc.H >= 2) {
      c.expect(avgpool(ctx, p, 2, 2).level() == l0 - 1, "avgpool depth law");
    }
    AffineSpec af;
    af.scale = test::random_values(rng, static_cast<std::size_t>(gc.C));
    af.shift = test::random_values(rng, static_cast<std::size_t>(gc.C));
    c.expect(batchnorm_affine(ctx, p, af).level() == l0 - 1,
             "batchnorm depth law");

    std::vector<Monomials> coeffs(
        static_cast<std::size_t>(gc.C),
        to_monomial(HermiteCoeffs::kRelu));
    const CostCounters before = ctx.counter_snapshot();
    PackedTensor act = polyact_eval(ctx, p, coeffs);
    const CostCounters d = ctx.counter_snapshot() - before;
    c.expect(act.level() == l0 - 3, "polyact depth law");
    c.expect(d.ct_ct_mults == 2 * p.cts.size(),
             "polyact must use exactly 2 ct-ct mults per ciphertext");

    if (p.layout.factor().log2() >= 0) {
      const CostCounters b2 = ctx.counter_snapshot();
      PackedTensor up = upsample_nearest(ctx, p, 2);
      c.expect(up.level() == l0, "upsample depth law");
      c.expect(ctx.counter_snapshot() == b2, "upsample must be free");
    }
  }

  // plan == measured, exactly, across 50 random graphs
  for (int trial = 0; trial < 50; ++trial) {
    ModelGraph m = test::random_graph(rng, 4);
    PlainTensor x = test::random_tensor(rng, m.input.channels, m.input.height,
                                        m.input.width);
    const Plan p = plan(m, ctx, 4);
    const ExecutionResult r = execute(ctx, m, pack(ctx, x, 4));
    c.expect(p.predicted.totals == r.report.totals,
             "plan/measured totals diverge on graph " + std::to_string(trial));
    if (p.predicted.layers.size() != r.report.layers.size()) {
      c.expect(false, "plan/measured layer counts diverge");
      continue;
    }
    for (std::size_t i = 0; i < p.predicted.layers.size(); ++i) {
      c.expect(p.predicted.layers[i].counters == r.report.layers[i].counters,
               "plan/measured layer " + std::to_string(i) + " diverges");
    }
  }
  return c;
}

// ---- criterion 7: running statistic and inference purity -------------------

Check criterion_polyact_rn_semantics() {
  Check c;
  PolyActState st = PolyActState::make(1, ActMode::training, 3.0, 0.9, 1e-5);
  PlainTensor x(1, 1, 1);
  x.at(0, 0, 0) = 5.0;
  const PlainTensor batch[] = {x};
  for (int k = 1; k <= 20; ++k) {
    (void)polyact_rn_forward(batch, HermiteCoeffs::kRelu, st);
    const double expect = 5.0 - 4.0 * std::pow(0.9, k);
    c.expect(std::abs(st.running_max[0] - expect) <= 1e-12,
             "running stat at step " + std::to_string(k));
  }

  std::mt19937_64 rng(23);
  PolyActState inf = PolyActState::make(2, ActMode::inference);
  inf.running_max = {2.5, 0.75};
  PlainTensor y = test::random_tensor(rng, 2, 8, 8, -4.0, 4.0);
  const std::vector<double> before = inf.running_max;
  const PlainTensor r1 = polyact_rn_forward(y, HermiteCoeffs::kSilu, inf);
  const PlainTensor r2 = polyact_rn_forward(y, HermiteCoeffs::kSilu, inf);
  c.expect(r1 == r2, "inference repeat calls must be bit-identical");
  c.expect(inf.running_max == before, "inference must not mutate state");
  return c;
}

// ---- criterion 8: approximation-error regression ----------------------------

Check criterion_approx_regression() {
  Check c;
  const ApproxError e =
      approx_error(HermiteCoeffs::kRelu, ActTarget::relu, 3.0);
  c.expect(std::abs(e.max_abs_err - kReluMaxAbsErr) <= 1e-9,
           "max error drifted from the frozen oracle constant: " +
               std::to_string(e.max_abs_err));
  const Monomials a = to_monomial(HermiteCoeffs::kRelu);
  c.expect(std::abs(eval_monomials(a, 0.0) - 0.14960) <= 1e-5,
           "pointwise error at 0 drifted");
  c.expect(std::abs(eval_monomials(a, 0.0) - kReluPolyAtZero) <= 1e-12,
           "poly(0) regression");
  return c;
}

// ---- criterion 9: end-to-end differential, with and without bootstraps -----

ModelGraph toy_six_node(std::mt19937_64& rng) {
  // conv -> bn -> polyact -> avgpool -> conv -> polyact
  ModelGraph m;
  m.input = {1, 16, 16};
  GraphNode c1;
  c1.id = "c1";
  c1.kind = NodeKind::conv;
  c1.kernel = 3;
  c1.stride = 1;
  c1.out_channels = 2;
  c1.weights = test::random_values(rng, 2 * 9, -0.5, 0.5);
  c1.bias = test::random_values(rng, 2, -0.2, 0.2);
  m.nodes.push_back(c1);
  GraphNode bn;
  bn.id = "bn1";
  bn.kind = NodeKind::batchnorm;
  bn.bn_scale = {1.2, 0.8};
  bn.bn_shift = {0.1, -0.1};
  m.nodes.push_back(bn);
  GraphNode a1;
  a1.id = "act1";
  a1.kind = NodeKind::activation;
  a1.act = ActKind::polyact_rn;
  a1.preset = "relu";
  a1.running_max = {2.0, 3.0};
  m.nodes.push_back(a1);
  GraphNode pool;
  pool.id = "pool1";
  pool.kind = NodeKind::avgpool;
  pool.window = 2;
  pool.stride = 2;
  m.nodes.push_back(pool);
  GraphNode c2;
  c2.id = "c2";
  c2.kind = NodeKind::conv;
  c2.kernel = 3;
  c2.stride = 1;
  c2.out_channels = 1;
  c2.weights = test::random_values(rng, 2 * 9, -0.5, 0.5);
  m.nodes.push_back(c2);
  GraphNode a2;
  a2.id = "act2";
  a2.kind = NodeKind::activation;
  a2.act = ActKind::polyact_rn;
  a2.preset = "silu";
  m.nodes.push_back(a2);
  m.validate();
  return m;
}

Check criterion_end_to_end() {
  Check c;
  std::mt19937_64 rng(29);
  ModelGraph m = toy_six_node(rng);
  PlainTensor x = test::random_tensor(rng, 1, 16, 16);
  const PlainTensor ref = run_reference(m, x);

  {
    HEContext ctx(256, 20);
    const ExecutionResult r = execute(ctx, m, pack(ctx, x, 8));
    c.expect(oracle::max_abs_diff(unpack(r.output), ref) <= 1e-6,
             "deep-budget run diverges from the reference");
    c.expect(r.report.totals.bootstraps == 0, "no bootstraps expected at L=20");
  }
  {
    HEContext ctx(256, 5);  // depth 10 network: bootstraps required
    const Plan p = plan(m, ctx, 8);
    c.expect(p.predicted.totals.bootstraps >= 1,
             "short budget must plan a bootstrap");
    const ExecutionResult r = execute(ctx, m, pack(ctx, x, 8));
    c.expect(r.report.totals.bootstraps >= 1, "bootstrap did not execute");
    c.expect(oracle::max_abs_diff(unpack(r.output), ref) <= 1e-6,
             "bootstrapped run diverges from the reference");
  }
  return c;
}

// ---- criterion 10: homogeneity --------------------------------------------

Check criterion_homogeneity() {
  Check c;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(-64.0, 64.0);
  const auto relu = [](double v) { return v > 0.0 ? v : 0.0; };
  for (int j = -3; j <= 10; ++j) {
    const double q = std::ldexp(1.0, j);
    for (int i = 0; i < 200; ++i) {
      const double x = dist(rng);
      // bit-level: scaling by powers of two is exact
      if (q * relu(x / q) != relu(x)) {
        c.expect(false, "exact homogeneity broke at q=2^" + std::to_string(j));
        break;
      }
    }
  }
  const Monomials a = to_monomial(HermiteCoeffs::kRelu);
  for (int j = -3; j <= 10; ++j) {
    const double q = std::ldexp(1.0, j);
    const Monomials fused = fuse_inference(a, q);
    for (int i = 0; i < 200; ++i) {
      const double x = dist(rng);
      const double lhs = eval_monomials(fused, x);
      const double rhs = q * eval_monomials(a, x / q);
      if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(rhs))) {
        c.expect(false, "fused homogeneity broke at q=2^" + std::to_string(j));
        break;
      }
    }
  }
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {"hermite constants and fused identity", criterion_hermite_constants},
      {"packing bijection over all shape combos", criterion_packing_bijection},
      {"operator oracle equivalence (200 trials/op)",
       criterion_operator_equivalence},
      {"factor-2 stride-1 3x3 convolution scenario", criterion_factor2_conv},
      {"packing-factor propagation property", criterion_propagation_property},
      {"depth and cost laws, plan==measured on 50 graphs",
       criterion_depth_cost_laws},
      {"range-normalized activation semantics",
       criterion_polyact_rn_semantics},
      {"approximation-error regression", criterion_approx_regression},
      {"end-to-end differential with bootstrap insertion",
       criterion_end_to_end},
      {"homogeneity of rescaled activations", criterion_homogeneity},
  };

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    std::string error;
    try {
      c = criteria[i].run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] criterion %2zu: %s (%.2fs)%s%s\n",
                c.ok ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                c.ok ? "" : " -- ", c.ok ? "" : c.detail.c_str());
    if (c.ok) ++passed;
  }
  std::printf("acceptance: %d/%zu criteria passed\n", passed, criteria.size());
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
