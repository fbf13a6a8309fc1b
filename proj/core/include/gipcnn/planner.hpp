#pragma once

#include <string>
#include <vector>

#include "gipcnn/graph.hpp"
#include "gipcnn/hops.hpp"

namespace gipcnn {

// One executable step of a planned run. Most nodes map to exactly one
// step; a strided conv whose factor change would jump across g=1 is
// decomposed into a conv reaching g=1 plus identity subsample steps, so
// every executed step keeps a valid single-family layout transition.
struct PlanStep {
  std::string node_id;
  int sub_index = 0;  // > 0 for synthesized decomposition steps
  NodeKind kind = NodeKind::conv;

  GipLayout in_layout;
  GipLayout out_layout;

  int level_before = 0;  // level arriving at the step
  int level_start = 0;   // after the optional bootstrap
  int level_after = 0;
  bool bootstrap_before = false;
  // residual joins: which branch gets a level-equalizing bootstrap
  enum class ResidualBootstrap { none, main, saved };
  ResidualBootstrap residual_bootstrap = ResidualBootstrap::none;

  int depth = 0;           // levels this step consumes
  CostCounters predicted;  // exact op counts, bootstraps included

  // payload for the executor
  ConvSpec conv;
  DeconvSpec deconv;
  AffineSpec affine;
  std::vector<Monomials> coeffs;
  int window = 0, stride = 0, scale = 0;
  std::string add_with;

  std::string label() const;  // node id plus sub-step suffix
};

struct Plan {
  GipLayout input_layout;
  GipLayout output_layout;
  int input_level = 0;
  std::vector<PlanStep> steps;
  CostReport predicted;  // one row per step; totals; circuit max depth
};

// Static plan for a converted model: layouts via the factor propagation
// rules, exact per-step counter predictions from the shared schedule
// enumeration, lazy-greedy bootstrap insertion whenever the remaining
// level is short of a step's depth.
Plan plan(const ModelGraph& m, const HEContext& ctx, int base_size,
          int input_level = -1);

// Fixed-column plan table (factor chain, levels, bootstraps, predicted
// counters), deterministic across runs.
std::string render_plan(const Plan& p);

}  // namespace gipcnn
