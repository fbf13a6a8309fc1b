#include "gipcnn/graph.hpp"

#include <map>
#include <set>

#include "gipcnn/errors.hpp"
#include "gipcnn/oracle.hpp"

namespace gipcnn {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

ConvSpec conv_spec_of(const GraphNode& n, int in_channels) {
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

DeconvSpec deconv_spec_of(const GraphNode& n, int in_channels) {
  DeconvSpec s;
  s.kernel = n.kernel;
  s.stride = n.stride;
  s.in_channels = in_channels;
  s.out_channels = n.out_channels;
  s.weights = n.weights;
  s.bias = n.bias;
  return s;
}

}  // namespace

std::string node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::conv: return "conv";
    case NodeKind::deconv: return "deconv";
    case NodeKind::avgpool: return "avgpool";
    case NodeKind::maxpool: return "maxpool";
    case NodeKind::upsample: return "upsample";
    case NodeKind::batchnorm: return "batchnorm";
    case NodeKind::activation: return "activation";
    case NodeKind::add: return "add";
  }
  throw SchemaError("unknown node kind");
}

NodeKind node_kind_from_name(const std::string& name) {
  static const std::map<std::string, NodeKind> kinds = {
      {"conv", NodeKind::conv},           {"deconv", NodeKind::deconv},
      {"avgpool", NodeKind::avgpool},     {"maxpool", NodeKind::maxpool},
      {"upsample", NodeKind::upsample},   {"batchnorm", NodeKind::batchnorm},
      {"activation", NodeKind::activation}, {"add", NodeKind::add}};
  auto it = kinds.find(name);
  if (it == kinds.end()) throw SchemaError("unknown node kind: " + name);
  return it->second;
}

std::string act_kind_name(ActKind k) {
  switch (k) {
    case ActKind::relu: return "relu";
    case ActKind::silu: return "silu";
    case ActKind::polyact_rn: return "polyact_rn";
  }
  throw SchemaError("unknown activation kind");
}

ActKind act_kind_from_name(const std::string& name) {
  if (name == "relu") return ActKind::relu;
  if (name == "silu") return ActKind::silu;
  if (name == "polyact_rn") return ActKind::polyact_rn;
  throw SchemaError("unknown activation kind: " + name);
}

std::vector<TensorShape> ModelGraph::shape_chain() const {
  std::vector<TensorShape> shapes;
  shapes.reserve(nodes.size() + 1);
  shapes.push_back(input);
  std::map<std::string, TensorShape> by_id;
  TensorShape cur = input;
  for (const GraphNode& n : nodes) {
    switch (n.kind) {
      case NodeKind::conv:
      case NodeKind::deconv: {
        const int h = n.kind == NodeKind::conv ? cur.height / n.stride
                                               : cur.height * n.stride;
        cur = {n.out_channels, h, h};
        break;
      }
      case NodeKind::avgpool:
      case NodeKind::maxpool:
        cur = {cur.channels, cur.height / n.stride, cur.width / n.stride};
        break;
      case NodeKind::upsample:
        cur = {cur.channels, cur.height * n.scale, cur.width * n.scale};
        break;
      case NodeKind::batchnorm:
      case NodeKind::activation:
        break;
      case NodeKind::add: {
        auto it = by_id.find(n.add_with);
        if (it == by_id.end()) {
          throw SchemaError("residual add '" + n.id +
                            "' references unknown or later node '" +
                            n.add_with + "'");
        }
        if (!(it->second == cur)) {
          throw SchemaError("residual add '" + n.id +
                            "' joins mismatched shapes");
        }
        break;
      }
    }
    by_id[n.id] = cur;
    shapes.push_back(cur);
  }
  return shapes;
}

TensorShape ModelGraph::output_shape() const { return shape_chain().back(); }

int ModelGraph::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void ModelGraph::validate() const {
  if (input.channels <= 0 || input.height <= 0 || input.width <= 0) {
    throw SchemaError("model input shape must be positive");
  }
  if (input.height != input.width) {
    throw SchemaError("model input must be square");
  }
  if (!is_pow2(input.height) || !is_pow2(input.channels)) {
    throw SchemaError("model input dims must be powers of two");
  }
  std::set<std::string> seen;
  TensorShape cur = input;
  std::map<std::string, TensorShape> by_id;
  for (const GraphNode& n : nodes) {
    if (n.id.empty()) throw SchemaError("node with empty id");
    if (!seen.insert(n.id).second) {
      throw SchemaError("duplicate node id: " + n.id);
    }
    switch (n.kind) {
      case NodeKind::conv: {
        if (cur.height % n.stride != 0) {
          throw SchemaError("conv '" + n.id + "': stride does not divide H");
        }
        try {
          conv_spec_of(n, cur.channels).validate();
        } catch (const GeometryError& e) {
          throw SchemaError("conv '" + n.id + "': " + e.what());
        }
        if (n.kernel % 2 == 0) {
          throw SchemaError("conv '" + n.id + "': kernel must be odd");
        }
        cur = {n.out_channels, cur.height / n.stride, cur.height / n.stride};
        break;
      }
      case NodeKind::deconv: {
        try {
          deconv_spec_of(n, cur.channels).validate();
        } catch (const GeometryError& e) {
          throw SchemaError("deconv '" + n.id + "': " + e.what());
        }
        cur = {n.out_channels, cur.height * n.stride, cur.height * n.stride};
        break;
      }
      case NodeKind::avgpool:
      case NodeKind::maxpool: {
        if (n.window != n.stride) {
          throw SchemaError("pool '" + n.id + "': window must equal stride");
        }
        if (!is_pow2(n.stride) || cur.height % n.stride != 0) {
          throw SchemaError("pool '" + n.id + "': bad stride");
        }
        cur = {cur.channels, cur.height / n.stride, cur.width / n.stride};
        break;
      }
      case NodeKind::upsample: {
        if (!is_pow2(n.scale)) {
          throw SchemaError("upsample '" + n.id + "': scale must be a power of two");
        }
        cur = {cur.channels, cur.height * n.scale, cur.width * n.scale};
        break;
      }
      case NodeKind::batchnorm: {
        if (n.bn_scale.size() != static_cast<std::size_t>(cur.channels) ||
            n.bn_shift.size() != static_cast<std::size_t>(cur.channels)) {
          throw SchemaError("batchnorm '" + n.id +
                            "': per-channel parameter length mismatch");
        }
        break;
      }
      case NodeKind::activation: {
        if (n.kind == NodeKind::activation && n.act == ActKind::polyact_rn) {
          HermiteCoeffs::preset(n.preset);  // throws on unknown preset
          if (!n.running_max.empty() &&
              n.running_max.size() != static_cast<std::size_t>(cur.channels)) {
            throw SchemaError("activation '" + n.id +
                              "': running statistic length mismatch");
          }
          if (!(n.gamma > 0.0)) {
            throw SchemaError("activation '" + n.id + "': gamma must be > 0");
          }
        }
        break;
      }
      case NodeKind::add: {
        auto it = by_id.find(n.add_with);
        if (it == by_id.end()) {
          throw SchemaError("residual add '" + n.id +
                            "' references unknown or later node '" +
                            n.add_with + "'");
        }
        if (!(it->second == cur)) {
          throw SchemaError("residual add '" + n.id +
                            "' joins mismatched shapes");
        }
        break;
      }
    }
    if (cur.height < 1) {
      throw SchemaError("node '" + n.id + "' shrinks the map below 1x1");
    }
    by_id[n.id] = cur;
  }
}

ConversionSummary convert_model(ModelGraph& m, const std::string& preset) {
  HermiteCoeffs::preset(preset);  // validate name
  ConversionSummary s;
  for (GraphNode& n : m.nodes) {
    if (n.kind == NodeKind::activation) {
      if (n.act != ActKind::polyact_rn || n.preset != preset) {
        ++s.activations_replaced;
      }
      n.act = ActKind::polyact_rn;
      n.preset = preset;
    } else if (n.kind == NodeKind::maxpool) {
      n.kind = NodeKind::avgpool;
      ++s.maxpools_replaced;
    }
  }
  return s;
}

std::vector<double> activation_scales(const GraphNode& node, int channels) {
  if (node.kind != NodeKind::activation || node.act != ActKind::polyact_rn) {
    throw SchemaError("node '" + node.id + "' is not a polynomial activation");
  }
  std::vector<double> run = node.running_max;
  if (run.empty()) run.assign(static_cast<std::size_t>(channels), 1.0);
  if (run.size() != static_cast<std::size_t>(channels)) {
    throw SchemaError("activation '" + node.id +
                      "': running statistic length mismatch");
  }
  for (double& q : run) q = q / node.gamma + node.eps;
  return run;
}

std::vector<Monomials> activation_monomials(const GraphNode& node,
                                            int channels) {
  const Monomials a = to_monomial(HermiteCoeffs::preset(node.preset));
  const std::vector<double> q = activation_scales(node, channels);
  return fuse_inference(a, q);
}

PlainTensor run_reference(const ModelGraph& m, const PlainTensor& x) {
  if (x.channels() != m.input.channels || x.height() != m.input.height ||
      x.width() != m.input.width) {
    throw GeometryError("reference run: input shape mismatch");
  }
  std::map<std::string, PlainTensor> saved;
  PlainTensor cur = x;
  for (const GraphNode& n : m.nodes) {
    switch (n.kind) {
      case NodeKind::conv:
        cur = oracle::conv2d_ref(cur, conv_spec_of(n, cur.channels()));
        break;
      case NodeKind::deconv:
        cur = oracle::deconv2d_ref(cur, deconv_spec_of(n, cur.channels()));
        break;
      case NodeKind::avgpool:
        cur = oracle::avgpool_ref(cur, n.window, n.stride);
        break;
      case NodeKind::maxpool:
        throw SchemaError("reference run requires a converted model "
                          "(maxpool present)");
      case NodeKind::upsample:
        cur = oracle::upsample_ref(cur, n.scale);
        break;
      case NodeKind::batchnorm:
        cur = oracle::affine_ref(cur, AffineSpec{n.bn_scale, n.bn_shift});
        break;
      case NodeKind::activation: {
        if (n.act != ActKind::polyact_rn) {
          throw SchemaError("reference run requires a converted model "
                            "(non-polynomial activation present)");
        }
        const auto coeffs = activation_monomials(n, cur.channels());
        cur = oracle::polyact_ref(cur, coeffs);
        break;
      }
      case NodeKind::add: {
        auto it = saved.find(n.add_with);
        if (it == saved.end()) {
          throw SchemaError("residual add references missing node output");
        }
        const PlainTensor& other = it->second;
        for (std::size_t i = 0; i < cur.data().size(); ++i) {
          cur.data()[i] += other.data()[i];
        }
        break;
      }
    }
    saved[n.id] = cur;
  }
  return cur;
}

}  // namespace gipcnn
