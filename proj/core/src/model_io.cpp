#include "gipcnn/model_io.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gipcnn/errors.hpp"
#include "gipcnn/tensor_io.hpp"

namespace gipcnn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<double> load_sidecar(const fs::path& dir, const std::string& ref,
                                 const std::vector<int>& want_dims,
                                 const std::string& what) {
  TensorFile t = read_tensor((dir / ref).string());
  if (t.dims != want_dims) {
    std::string want;
    for (int d : want_dims) want += std::to_string(d) + " ";
    throw SchemaError(what + ": sidecar '" + ref + "' has wrong dims (want [" +
                      want + "])");
  }
  return std::move(t.data);
}

std::string field_or(const json& j, const char* key, const std::string& dflt) {
  return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}

GraphNode parse_node(const json& j, const fs::path& dir,
                     const TensorShape& in_shape) {
  if (!j.contains("id") || !j.contains("kind")) {
    throw SchemaError("every node needs an id and a kind");
  }
  GraphNode n;
  n.id = j.at("id").get<std::string>();
  n.kind = node_kind_from_name(j.at("kind").get<std::string>());
  const std::string where = "node '" + n.id + "'";
  try {
    switch (n.kind) {
      case NodeKind::conv:
      case NodeKind::deconv: {
        n.kernel = j.at("kernel").get<int>();
        n.stride = j.value("stride", 1);
        n.padding = j.value("padding", -1);
        n.out_channels = j.at("out_channels").get<int>();
        n.weights_ref = j.at("weights").get<std::string>();
        const int rows = in_shape.channels * n.out_channels;
        n.weights = load_sidecar(dir, n.weights_ref,
                                 {rows, n.kernel, n.kernel}, where);
        if (j.contains("bias")) {
          n.bias_ref = j.at("bias").get<std::string>();
          n.bias = load_sidecar(dir, n.bias_ref, {n.out_channels, 1, 1}, where);
        }
        break;
      }
      case NodeKind::avgpool:
      case NodeKind::maxpool:
        n.window = j.at("window").get<int>();
        n.stride = j.value("stride", n.window);
        break;
      case NodeKind::upsample:
        n.scale = j.at("scale").get<int>();
        break;
      case NodeKind::batchnorm: {
        n.scale_ref = j.at("scale").get<std::string>();
        n.shift_ref = j.at("shift").get<std::string>();
        const int c = in_shape.channels;
        n.bn_scale = load_sidecar(dir, n.scale_ref, {c, 1, 1}, where);
        n.bn_shift = load_sidecar(dir, n.shift_ref, {c, 1, 1}, where);
        break;
      }
      case NodeKind::activation: {
        n.act = act_kind_from_name(j.at("fn").get<std::string>());
        if (n.act == ActKind::polyact_rn) {
          n.preset = field_or(j, "preset", "relu");
          n.gamma = j.value("gamma", 3.0);
          n.eps = j.value("eps", 1e-5);
          if (j.contains("running_max")) {
            n.running_max_ref = j.at("running_max").get<std::string>();
            n.running_max = load_sidecar(dir, n.running_max_ref,
                                         {in_shape.channels, 1, 1}, where);
          }
        }
        break;
      }
      case NodeKind::add:
        n.add_with = j.at("with").get<std::string>();
        break;
    }
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return n;
}

// shape bookkeeping mirrors ModelGraph::shape_chain but is needed while
// parsing to know sidecar dims
TensorShape advance_shape(const TensorShape& cur, const GraphNode& n) {
  switch (n.kind) {
    case NodeKind::conv:
      return {n.out_channels, cur.height / n.stride, cur.height / n.stride};
    case NodeKind::deconv:
      return {n.out_channels, cur.height * n.stride, cur.height * n.stride};
    case NodeKind::avgpool:
    case NodeKind::maxpool:
      return {cur.channels, cur.height / n.stride, cur.width / n.stride};
    case NodeKind::upsample:
      return {cur.channels, cur.height * n.scale, cur.width * n.scale};
    default:
      return cur;
  }
}

}  // namespace

ModelGraph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("model file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.contains("input") || !doc.contains("nodes")) {
    throw SchemaError("model file needs input and nodes sections");
  }
  ModelGraph m;
  try {
    m.input.channels = doc.at("input").at("channels").get<int>();
    m.input.height = doc.at("input").at("height").get<int>();
    m.input.width = doc.at("input").at("width").get<int>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad input spec: ") + e.what());
  }
  if (doc.contains("resize_input_to")) {
    m.resize_input_to = doc.at("resize_input_to").get<int>();
  }
  const fs::path dir = fs::path(path).parent_path();
  TensorShape cur = m.input;
  if (!doc.at("nodes").is_array()) {
    throw SchemaError("nodes must be an array");
  }
  for (const json& jn : doc.at("nodes")) {
    GraphNode n = parse_node(jn, dir, cur);
    if (n.stride <= 0 ||
        ((n.kind == NodeKind::conv || n.kind == NodeKind::avgpool ||
          n.kind == NodeKind::maxpool) &&
         cur.height % n.stride != 0)) {
      throw SchemaError("node '" + n.id + "': stride incompatible with H=" +
                        std::to_string(cur.height));
    }
    cur = advance_shape(cur, n);
    m.nodes.push_back(std::move(n));
  }
  m.validate();
  return m;
}

void save_model(const std::string& path, const ModelGraph& m) {
  m.validate();
  const fs::path p(path);
  const fs::path dir = p.parent_path();
  const std::string stem = p.stem().string();

  auto sidecar = [&](const std::string& id, const char* field,
                     const std::vector<int>& dims,
                     const std::vector<double>& data) {
    const std::string name = stem + "." + id + "." + field + ".tensor";
    TensorFile t;
    t.dims = dims;
    t.data = data;
    write_tensor((dir / name).string(), t);
    return name;
  };

  json doc;
  doc["input"] = {{"channels", m.input.channels},
                  {"height", m.input.height},
                  {"width", m.input.width}};
  if (m.resize_input_to) doc["resize_input_to"] = *m.resize_input_to;

  const std::vector<TensorShape> shapes = m.shape_chain();
  json nodes = json::array();
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const GraphNode& n = m.nodes[i];
    const TensorShape& in_shape = shapes[i];
    json j;
    j["id"] = n.id;
    j["kind"] = node_kind_name(n.kind);
    switch (n.kind) {
      case NodeKind::conv:
      case NodeKind::deconv: {
        j["kernel"] = n.kernel;
        j["stride"] = n.stride;
        if (n.padding >= 0) j["padding"] = n.padding;
        j["out_channels"] = n.out_channels;
        j["weights"] = sidecar(n.id, "weights",
                               {in_shape.channels * n.out_channels, n.kernel,
                                n.kernel},
                               n.weights);
        if (!n.bias.empty()) {
          j["bias"] = sidecar(n.id, "bias", {n.out_channels, 1, 1}, n.bias);
        }
        break;
      }
      case NodeKind::avgpool:
      case NodeKind::maxpool:
        j["window"] = n.window;
        j["stride"] = n.stride;
        break;
      case NodeKind::upsample:
        j["scale"] = n.scale;
        break;
      case NodeKind::batchnorm:
        j["scale"] = sidecar(n.id, "scale", {in_shape.channels, 1, 1},
                             n.bn_scale);
        j["shift"] = sidecar(n.id, "shift", {in_shape.channels, 1, 1},
                             n.bn_shift);
        break;
      case NodeKind::activation:
        j["fn"] = act_kind_name(n.act);
        if (n.act == ActKind::polyact_rn) {
          j["preset"] = n.preset;
          j["gamma"] = n.gamma;
          j["eps"] = n.eps;
          if (!n.running_max.empty()) {
            j["running_max"] = sidecar(n.id, "running_max",
                                       {in_shape.channels, 1, 1},
                                       n.running_max);
          }
        }
        break;
      case NodeKind::add:
        j["with"] = n.add_with;
        break;
    }
    nodes.push_back(std::move(j));
  }
  doc["nodes"] = std::move(nodes);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SchemaError("cannot write model file: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace gipcnn
