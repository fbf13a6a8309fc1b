#include "gipcnn/executor.hpp"

#include <map>
#include <stdexcept>
#include <string>

#include "gipcnn/errors.hpp"

namespace gipcnn {

namespace {

PackedTensor bootstrap_all(HEContext& ctx, const PackedTensor& t) {
  PackedTensor out;
  out.layout = t.layout;
  out.cts.reserve(t.cts.size());
  for (const SlotVector& ct : t.cts) out.cts.push_back(ctx.bootstrap(ct));
  return out;
}

std::string describe(const CostCounters& c) {
  return "rot=" + std::to_string(c.rotations) +
         " ctmul=" + std::to_string(c.ct_ct_mults) +
         " ptmul=" + std::to_string(c.pt_ct_mults) +
         " adds=" + std::to_string(c.adds) +
         " boots=" + std::to_string(c.bootstraps);
}

}  // namespace

ExecutionResult execute(HEContext& ctx, const ModelGraph& m,
                        const PackedTensor& x) {
  const Plan p = plan(m, ctx, x.layout.base_size, x.level());
  return execute(ctx, m, x, p);
}

ExecutionResult execute(HEContext& ctx, const ModelGraph& m,
                        const PackedTensor& x, const Plan& p) {
  if (!(x.layout == p.input_layout)) {
    throw GeometryError("execute: input layout does not match the plan");
  }
  if (x.level() != p.input_level) {
    throw GeometryError("execute: input level does not match the plan");
  }
  m.validate();

  ExecutionResult result;
  result.report.max_depth = p.predicted.max_depth;

  std::map<std::string, PackedTensor> saved;
  PackedTensor cur = x;
  for (const PlanStep& step : p.steps) {
    const CostCounters before = ctx.counter_snapshot();
    if (step.bootstrap_before) cur = bootstrap_all(ctx, cur);

    switch (step.kind) {
      case NodeKind::conv:
        cur = conv2d(ctx, cur, step.conv);
        break;
      case NodeKind::deconv:
        cur = deconv2d(ctx, cur, step.deconv);
        break;
      case NodeKind::avgpool:
        cur = avgpool(ctx, cur, step.window, step.stride);
        break;
      case NodeKind::upsample:
        cur = upsample_nearest(ctx, cur, step.scale);
        break;
      case NodeKind::batchnorm:
        cur = batchnorm_affine(ctx, cur, step.affine);
        break;
      case NodeKind::activation:
        cur = polyact_eval(ctx, cur, step.coeffs);
        break;
      case NodeKind::add: {
        auto it = saved.find(step.add_with);
        if (it == saved.end()) {
          throw std::logic_error("executor lost a residual branch");
        }
        PackedTensor other = it->second;
        if (step.residual_bootstrap == PlanStep::ResidualBootstrap::main) {
          cur = bootstrap_all(ctx, cur);
        } else if (step.residual_bootstrap ==
                   PlanStep::ResidualBootstrap::saved) {
          other = bootstrap_all(ctx, other);
        }
        PackedTensor sum;
        sum.layout = cur.layout;
        sum.cts.reserve(cur.cts.size());
        for (std::size_t i = 0; i < cur.cts.size(); ++i) {
          sum.cts.push_back(ctx.add(cur.cts[i], other.cts[i]));
        }
        cur = std::move(sum);
        break;
      }
      case NodeKind::maxpool:
        throw std::logic_error("maxpool survived planning");
    }

    const CostCounters measured = ctx.counter_snapshot() - before;
    if (measured != step.predicted) {
      throw std::logic_error("plan/actual divergence at step '" +
                             step.label() + "': planned " +
                             describe(step.predicted) + ", measured " +
                             describe(measured));
    }
    if (!(cur.layout == step.out_layout)) {
      throw std::logic_error("layout divergence at step '" + step.label() +
                             "'");
    }
    if (cur.level() != step.level_after) {
      throw std::logic_error(
          "level divergence at step '" + step.label() + "': planned " +
          std::to_string(step.level_after) + ", measured " +
          std::to_string(cur.level()));
    }

    LayerCost lc;
    lc.node_id = step.label();
    lc.kind = node_kind_name(step.kind);
    lc.factor_in = step.in_layout.factor().str();
    lc.factor_out = step.out_layout.factor().str();
    lc.level_in = step.level_before;
    lc.level_out = step.level_after;
    lc.bootstrap_before =
        step.bootstrap_before ||
        step.residual_bootstrap != PlanStep::ResidualBootstrap::none;
    lc.depth = step.depth;
    lc.counters = measured;
    result.report.append(lc);

    // the last sub-step of a node publishes that node's output
    saved[step.node_id] = cur;
  }

  result.output = std::move(cur);
  return result;
}

}  // namespace gipcnn
