#include "gipcnn/planner.hpp"

#include <map>
#include <sstream>

#include "gipcnn/errors.hpp"

namespace gipcnn {

namespace {

struct BranchState {
  GipLayout layout;
  int level = 0;
  int depth = 0;  // cumulative multiplicative depth since the input
};

ConvSpec node_conv_spec(const GraphNode& n, int in_channels) {
  ConvSpec s;
  s.kernel = n.kernel;
  s.stride = n.stride;
  s.padding = n.padding;
  s.in_channels = in_channels;
  s.out_channels = n.out_channels;
  s.weights = n.weights;
  s.bias = n.bias;
  return s;
}

DeconvSpec node_deconv_spec(const GraphNode& n, int in_channels) {
  DeconvSpec s;
  s.kernel = n.kernel;
  s.stride = n.stride;
  s.in_channels = in_channels;
  s.out_channels = n.out_channels;
  s.weights = n.weights;
  s.bias = n.bias;
  return s;
}

ConvSpec identity_subsample(int channels, int stride) {
  ConvSpec s;
  s.kernel = 1;
  s.stride = stride;
  s.padding = 0;
  s.in_channels = channels;
  s.out_channels = channels;
  s.weights.assign(static_cast<std::size_t>(channels) * channels, 0.0);
  for (int c = 0; c < channels; ++c) {
    s.weights[static_cast<std::size_t>(c) * channels + c] = 1.0;
  }
  return s;
}

}  // namespace

std::string PlanStep::label() const {
  if (sub_index == 0) return node_id;
  return node_id + "#" + std::to_string(sub_index);
}

Plan plan(const ModelGraph& m, const HEContext& ctx, int base_size,
          int input_level) {
  m.validate();
  for (const GraphNode& n : m.nodes) {
    if (n.kind == NodeKind::maxpool) {
      throw SchemaError("plan requires a converted model: maxpool '" + n.id +
                        "' present");
    }
    if (n.kind == NodeKind::activation && n.act != ActKind::polyact_rn) {
      throw SchemaError("plan requires a converted model: activation '" +
                        n.id + "' is not polynomial");
    }
  }

  Plan p;
  p.input_level = input_level < 0 ? ctx.max_level() : input_level;
  p.input_layout = GipLayout::make(m.input.channels, m.input.height,
                                   m.input.width, base_size, ctx.slot_count());

  BranchState cur{p.input_layout, p.input_level, 0};
  std::map<std::string, BranchState> saved;
  const int refresh = ctx.bootstrap_refresh_level();
  const std::size_t S = ctx.slot_count();

  auto finish_step = [&](PlanStep step) {
    // lazy greedy bootstrap: refresh right before the step that would
    // otherwise run out of levels
    step.level_before = cur.level;
    step.level_start = cur.level;
    if (cur.level < step.depth) {
      step.bootstrap_before = true;
      step.level_start = refresh;
      if (refresh < step.depth) {
        throw LevelError("plan infeasible: step '" + step.label() +
                         "' needs depth " + std::to_string(step.depth) +
                         " but refresh level is " + std::to_string(refresh));
      }
      step.predicted.bootstraps +=
          static_cast<std::uint64_t>(step.in_layout.ct_count());
    }
    step.level_after = step.level_start - step.depth;
    cur.level = step.level_after;
    cur.depth += step.depth;
    cur.layout = step.out_layout;

    LayerCost lc;
    lc.node_id = step.label();
    lc.kind = node_kind_name(step.kind);
    lc.factor_in = step.in_layout.factor().str();
    lc.factor_out = step.out_layout.factor().str();
    lc.level_in = step.level_before;
    lc.level_out = step.level_after;
    lc.bootstrap_before = step.bootstrap_before;
    lc.depth = step.depth;
    lc.counters = step.predicted;
    p.predicted.append(lc);
    if (cur.depth > p.predicted.max_depth) p.predicted.max_depth = cur.depth;
    p.steps.push_back(std::move(step));
  };

  for (const GraphNode& n : m.nodes) {
    switch (n.kind) {
      case NodeKind::conv: {
        ConvSpec spec = node_conv_spec(n, cur.layout.channels);
        const PackFactor gin = cur.layout.factor();
        const PackFactor gout =
            propagate_factor(gin, OpShape::downsample, spec.stride);
        if (!relayout_boundary_check(gin, gout)) {
          // cascade through g=1: full-kernel conv with stride g, then
          // identity subsampling for the remaining factor
          const int g = gin.numerator();
          ConvSpec first = spec;
          first.stride = g;
          PlanStep s1;
          s1.node_id = n.id;
          s1.sub_index = 1;
          s1.kind = NodeKind::conv;
          s1.in_layout = cur.layout;
          s1.out_layout = conv2d_output_layout(cur.layout, first, S);
          s1.depth = 1;
          s1.predicted = estimate_conv2d(S, cur.layout, first).counters;
          s1.conv = std::move(first);
          finish_step(std::move(s1));

          ConvSpec sub = identity_subsample(cur.layout.channels,
                                            spec.stride / g);
          PlanStep s2;
          s2.node_id = n.id;
          s2.sub_index = 2;
          s2.kind = NodeKind::conv;
          s2.in_layout = cur.layout;
          s2.out_layout = conv2d_output_layout(cur.layout, sub, S);
          s2.depth = 1;
          s2.predicted = estimate_conv2d(S, cur.layout, sub).counters;
          s2.conv = std::move(sub);
          finish_step(std::move(s2));
          break;
        }
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::conv;
        s.in_layout = cur.layout;
        s.out_layout = conv2d_output_layout(cur.layout, spec, S);
        s.depth = 1;
        s.predicted = estimate_conv2d(S, cur.layout, spec).counters;
        s.conv = std::move(spec);
        finish_step(std::move(s));
        break;
      }
      case NodeKind::deconv: {
        DeconvSpec spec = node_deconv_spec(n, cur.layout.channels);
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::deconv;
        s.in_layout = cur.layout;
        s.out_layout = deconv2d_output_layout(cur.layout, spec, S);
        s.depth = 1;
        s.predicted = estimate_deconv2d(S, cur.layout, spec).counters;
        s.deconv = std::move(spec);
        finish_step(std::move(s));
        break;
      }
      case NodeKind::avgpool: {
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::avgpool;
        s.in_layout = cur.layout;
        s.out_layout = avgpool_output_layout(cur.layout, n.window, n.stride, S);
        const OpCost est = estimate_avgpool(S, cur.layout, n.window, n.stride);
        s.depth = est.depth;
        s.predicted = est.counters;
        s.window = n.window;
        s.stride = n.stride;
        finish_step(std::move(s));
        break;
      }
      case NodeKind::upsample: {
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::upsample;
        s.in_layout = cur.layout;
        s.out_layout = upsample_output_layout(cur.layout, n.scale, S);
        const OpCost est = estimate_upsample(S, cur.layout, n.scale);
        s.depth = est.depth;
        s.predicted = est.counters;
        s.scale = n.scale;
        finish_step(std::move(s));
        break;
      }
      case NodeKind::batchnorm: {
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::batchnorm;
        s.in_layout = cur.layout;
        s.out_layout = cur.layout;
        const OpCost est = estimate_batchnorm(cur.layout);
        s.depth = est.depth;
        s.predicted = est.counters;
        s.affine = AffineSpec{n.bn_scale, n.bn_shift};
        finish_step(std::move(s));
        break;
      }
      case NodeKind::activation: {
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::activation;
        s.in_layout = cur.layout;
        s.out_layout = cur.layout;
        const OpCost est = estimate_polyact(cur.layout);
        s.depth = est.depth;
        s.predicted = est.counters;
        s.coeffs = activation_monomials(n, cur.layout.channels);
        finish_step(std::move(s));
        break;
      }
      case NodeKind::add: {
        auto it = saved.find(n.add_with);
        if (it == saved.end()) {
          throw SchemaError("residual add '" + n.id +
                            "' references missing node '" + n.add_with + "'");
        }
        const BranchState& other = it->second;
        if (!(other.layout == cur.layout)) {
          throw GeometryError("residual add '" + n.id +
                              "' joins different layouts");
        }
        PlanStep s;
        s.node_id = n.id;
        s.kind = NodeKind::add;
        s.in_layout = cur.layout;
        s.out_layout = cur.layout;
        s.depth = 0;
        s.add_with = n.add_with;
        int lvl_main = cur.level;
        int lvl_saved = other.level;
        if (lvl_main != lvl_saved) {
          // equalize by refreshing the branch that burned more levels
          if (lvl_main < lvl_saved) {
            s.residual_bootstrap = PlanStep::ResidualBootstrap::main;
            lvl_main = refresh;
          } else {
            s.residual_bootstrap = PlanStep::ResidualBootstrap::saved;
            lvl_saved = refresh;
          }
          s.predicted.bootstraps +=
              static_cast<std::uint64_t>(cur.layout.ct_count());
        }
        s.predicted.adds += static_cast<std::uint64_t>(cur.layout.ct_count());
        // the add itself is level-free; result carries the min
        s.level_before = cur.level;
        cur.level = std::min(lvl_main, lvl_saved);
        cur.depth = std::max(cur.depth, other.depth);
        s.level_start = cur.level;
        s.level_after = cur.level;

        LayerCost lc;
        lc.node_id = s.label();
        lc.kind = node_kind_name(s.kind);
        lc.factor_in = s.in_layout.factor().str();
        lc.factor_out = s.out_layout.factor().str();
        lc.level_in = s.level_before;
        lc.level_out = s.level_after;
        lc.bootstrap_before =
            s.residual_bootstrap != PlanStep::ResidualBootstrap::none;
        lc.depth = 0;
        lc.counters = s.predicted;
        p.predicted.append(lc);
        if (cur.depth > p.predicted.max_depth) {
          p.predicted.max_depth = cur.depth;
        }
        p.steps.push_back(std::move(s));
        break;
      }
      case NodeKind::maxpool:
        break;  // rejected above
    }
    saved[n.id] = cur;
  }
  p.output_layout = cur.layout;
  return p;
}

std::string render_plan(const Plan& p) {
  std::ostringstream os;
  os << "input: factor " << p.input_layout.factor().str() << ", "
     << p.input_layout.ct_count() << " ct, level " << p.input_level << "\n";
  os << "step            kind        g_in    g_out   lvl_in  lvl_out boot  "
        "rot      ctmul    ptmul    adds     bstrap  depth\n";
  auto row = [&os](const std::string& label, const std::string& kind,
                   const std::string& gi, const std::string& go, int li,
                   int lo, bool boot, const CostCounters& c, int depth) {
    os << label;
    for (std::size_t i = label.size(); i < 16; ++i) os << ' ';
    os << kind;
    for (std::size_t i = kind.size(); i < 12; ++i) os << ' ';
    auto col = [&os](const std::string& s, int w) {
      os << s;
      for (int i = static_cast<int>(s.size()); i < w; ++i) os << ' ';
    };
    col(gi, 8);
    col(go, 8);
    col(std::to_string(li), 8);
    col(std::to_string(lo), 8);
    col(boot ? "yes" : "-", 6);
    col(std::to_string(c.rotations), 9);
    col(std::to_string(c.ct_ct_mults), 9);
    col(std::to_string(c.pt_ct_mults), 9);
    col(std::to_string(c.adds), 9);
    col(std::to_string(c.bootstraps), 8);
    os << depth << "\n";
  };
  for (const PlanStep& s : p.steps) {
    row(s.label(), node_kind_name(s.kind), s.in_layout.factor().str(),
        s.out_layout.factor().str(), s.level_before, s.level_after,
        s.bootstrap_before ||
            s.residual_bootstrap != PlanStep::ResidualBootstrap::none,
        s.predicted, s.depth);
  }
  const CostCounters& t = p.predicted.totals;
  row("TOTAL", "", "", "", p.input_level,
      p.steps.empty() ? p.input_level : p.steps.back().level_after, false, t,
      p.predicted.max_depth);
  return os.str();
}

}  // namespace gipcnn
