#pragma once

#include "gipcnn/planner.hpp"

namespace gipcnn {

struct ExecutionResult {
  PackedTensor output;
  CostReport report;  // measured per step; equals the plan's prediction
};

// Runs the converted model on a packed input, following the plan
// (including its bootstrap placements) and cross-checking every measured
// counter against the prediction. A divergence is an internal invariant
// violation and throws std::logic_error.
ExecutionResult execute(HEContext& ctx, const ModelGraph& m,
                        const PackedTensor& x);

ExecutionResult execute(HEContext& ctx, const ModelGraph& m,
                        const PackedTensor& x, const Plan& plan);

}  // namespace gipcnn
