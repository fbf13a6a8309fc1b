#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gipcnn/hops.hpp"
#include "gipcnn/packing.hpp"
#include "gipcnn/polyact.hpp"

namespace gipcnn {

enum class NodeKind {
  conv,
  deconv,
  avgpool,
  maxpool,
  upsample,
  batchnorm,
  activation,
  add,  // residual join with an earlier node's output
};

std::string node_kind_name(NodeKind k);
NodeKind node_kind_from_name(const std::string& name);

enum class ActKind { relu, silu, polyact_rn };

std::string act_kind_name(ActKind k);
ActKind act_kind_from_name(const std::string& name);

struct TensorShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::conv;

  // conv / deconv
  int kernel = 0;
  int stride = 1;
  int padding = -1;  // -1: SAME
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  std::string weights_ref;  // sidecar paths, kept for round trips
  std::string bias_ref;

  // avgpool / maxpool
  int window = 0;

  // upsample
  int scale = 0;

  // batchnorm
  std::vector<double> bn_scale;
  std::vector<double> bn_shift;
  std::string scale_ref;
  std::string shift_ref;

  // activation
  ActKind act = ActKind::relu;
  std::string preset;  // polyact_rn coefficient preset ("relu"/"silu")
  double gamma = 3.0;
  double eps = 1e-5;
  std::vector<double> running_max;  // per channel; defaults to ones
  std::string running_max_ref;

  // add
  std::string add_with;
};

// Ordered operator chain with residual edges by node id. Single input,
// single output, acyclic by construction (residuals reference earlier
// nodes only).
struct ModelGraph {
  TensorShape input;
  std::vector<GraphNode> nodes;
  std::optional<int> resize_input_to;  // conversion metadata

  // Shape after each node (index i -> output of nodes[i]); element 0 of
  // the returned vector is the input shape.
  std::vector<TensorShape> shape_chain() const;
  TensorShape output_shape() const;

  int node_index(const std::string& id) const;  // -1 if absent

  // Structural and shape validation; throws SchemaError.
  void validate() const;
};

struct ConversionSummary {
  int activations_replaced = 0;
  int maxpools_replaced = 0;
};

// Structural conversion to an FHE-friendly graph: every activation node
// becomes a fixed polynomial activation with the chosen preset, every
// maxpool becomes an avgpool of the same window/stride. Idempotent.
ConversionSummary convert_model(ModelGraph& m, const std::string& preset);

// Per-channel q_c for a polynomial activation node: running_max/gamma + eps.
std::vector<double> activation_scales(const GraphNode& node, int channels);

// Fused per-channel monomials for a converted activation node.
std::vector<Monomials> activation_monomials(const GraphNode& node,
                                            int channels);

// Plaintext reference of the whole converted graph (the differential
// oracle for packed execution).
PlainTensor run_reference(const ModelGraph& m, const PlainTensor& x);

}  // namespace gipcnn
