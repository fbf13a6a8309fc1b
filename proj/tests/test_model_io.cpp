#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "gipcnn/model_io.hpp"
#include "gipcnn/tensor_io.hpp"
#include "testutil.hpp"

using namespace gipcnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gipcnn_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("tensor files: header format and payload round trip") {
  TempDir dir;
  const std::string p = (dir.path / "t.tensor").string();
  PlainTensor t(2, 2, 2);
  for (std::size_t i = 0; i < t.data().size(); ++i) {
    t.data()[i] = 0.25 * static_cast<double>(i) - 0.5;
  }
  write_plain_tensor(p, t);

  // header is one JSON line, then raw f32 little-endian payload
  std::ifstream in(p, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == R"({"dims":[2,2,2],"dtype":"f32"})");

  PlainTensor back = read_plain_tensor(p);
  CHECK(back == t);  // quarter steps are exact in f32
}

TEST_CASE("tensor files: malformed input is a schema error") {
  TempDir dir;
  const std::string p = (dir.path / "bad.tensor").string();
  {
    std::ofstream out(p, std::ios::binary);
    out << "{\"dims\":[2,2,2],\"dtype\":\"f32\"}\n";
    out << "xx";  // truncated payload
  }
  CHECK_THROWS_AS(read_tensor(p), SchemaError);
  {
    std::ofstream out(p, std::ios::binary);
    out << "not json\n";
  }
  CHECK_THROWS_AS(read_tensor(p), SchemaError);
  CHECK_THROWS_AS(read_tensor((dir.path / "absent.tensor").string()),
                  SchemaError);
}

TEST_CASE("model save/load round trip with sidecars") {
  TempDir dir;
  std::mt19937_64 rng(3);

  ModelGraph m;
  m.input = {1, 8, 8};
  GraphNode c;
  c.id = "c1";
  c.kind = NodeKind::conv;
  c.kernel = 3;
  c.stride = 1;
  c.out_channels = 2;
  c.weights = test::random_values(rng, 2 * 9, -0.5, 0.5);
  c.bias = test::random_values(rng, 2, -0.1, 0.1);
  m.nodes.push_back(c);
  GraphNode bn;
  bn.id = "bn1";
  bn.kind = NodeKind::batchnorm;
  bn.bn_scale = {1.0, 2.0};
  bn.bn_shift = {0.5, -0.5};
  m.nodes.push_back(bn);
  GraphNode act;
  act.id = "a1";
  act.kind = NodeKind::activation;
  act.act = ActKind::relu;
  m.nodes.push_back(act);
  GraphNode mp;
  mp.id = "p1";
  mp.kind = NodeKind::maxpool;
  mp.window = 2;
  mp.stride = 2;
  m.nodes.push_back(mp);
  GraphNode up;
  up.id = "u1";
  up.kind = NodeKind::upsample;
  up.scale = 2;
  m.nodes.push_back(up);
  GraphNode dc;
  dc.id = "d1";
  dc.kind = NodeKind::deconv;
  dc.kernel = 2;
  dc.stride = 2;
  dc.out_channels = 1;
  dc.weights = test::random_values(rng, 2 * 1 * 4, -0.5, 0.5);
  m.nodes.push_back(dc);
  m.validate();

  const std::string path = (dir.path / "net.json").string();
  save_model(path, m);
  ModelGraph back = load_model(path);

  CHECK(back.input == m.input);
  REQUIRE(back.nodes.size() == m.nodes.size());
  CHECK(back.nodes[0].kernel == 3);
  CHECK(back.nodes[0].bias.size() == 2);
  CHECK(back.nodes[1].bn_scale == std::vector<double>{1.0, 2.0});
  CHECK(back.nodes[2].act == ActKind::relu);
  CHECK(back.nodes[3].kind == NodeKind::maxpool);
  CHECK(back.nodes[5].kind == NodeKind::deconv);
  // f32 storage: weights survive to float precision
  for (std::size_t i = 0; i < m.nodes[0].weights.size(); ++i) {
    CHECK(back.nodes[0].weights[i] ==
          doctest::Approx(m.nodes[0].weights[i]).epsilon(1e-6));
  }
}

TEST_CASE("model loading rejects schema violations") {
  TempDir dir;
  const std::string path = (dir.path / "bad.json").string();

  auto write_model = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
  };

  write_model("{ not json");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  write_model(R"({"nodes": []})");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  // minimal graph parses
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "p", "kind": "avgpool", "window": 2, "stride": 2}]
  })");
  ModelGraph ok = load_model(path);
  CHECK(ok.nodes.size() == 1);

  // unknown kind
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "x", "kind": "softmax"}]
  })");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  // unknown activation
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "x", "kind": "activation", "fn": "gelu"}]
  })");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  // dangling weight reference
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "c", "kind": "conv", "kernel": 3, "stride": 1,
               "out_channels": 1, "weights": "missing.tensor"}]
  })");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  // sidecar with wrong dims
  {
    TensorFile t;
    t.dims = {1, 1, 1};
    t.data = {1.0};
    write_tensor((dir.path / "w.tensor").string(), t);
  }
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "c", "kind": "conv", "kernel": 3, "stride": 1,
               "out_channels": 1, "weights": "w.tensor"}]
  })");
  CHECK_THROWS_AS(load_model(path), SchemaError);

  // residual referencing a later node
  write_model(R"({
    "input": {"channels": 1, "height": 4, "width": 4},
    "nodes": [{"id": "a", "kind": "add", "with": "z"},
              {"id": "z", "kind": "upsample", "scale": 2}]
  })");
  CHECK_THROWS_AS(load_model(path), SchemaError);
}

TEST_CASE("conversion metadata round trips") {
  TempDir dir;
  ModelGraph m;
  m.input = {1, 8, 8};
  GraphNode a;
  a.id = "a";
  a.kind = NodeKind::activation;
  a.act = ActKind::silu;
  m.nodes.push_back(a);
  convert_model(m, "silu");
  m.resize_input_to = 16;

  const std::string path = (dir.path / "conv.json").string();
  save_model(path, m);
  ModelGraph back = load_model(path);
  CHECK(back.resize_input_to == 16);
  CHECK(back.nodes[0].act == ActKind::polyact_rn);
  CHECK(back.nodes[0].preset == "silu");
}
