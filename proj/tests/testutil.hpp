#pragma once

#include <random>
#include <vector>

#include "gipcnn/graph.hpp"
#include "gipcnn/hops.hpp"
#include "gipcnn/oracle.hpp"
#include "gipcnn/packing.hpp"

namespace gipcnn::test {

inline PlainTensor random_tensor(std::mt19937_64& rng, int c, int h, int w,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  PlainTensor t(c, h, w);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                         double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline ConvSpec random_conv(std::mt19937_64& rng, int cin, int cout, int k,
                            int stride, bool with_bias = true) {
  ConvSpec s;
  s.kernel = k;
  s.stride = stride;
  s.in_channels = cin;
  s.out_channels = cout;
  s.weights =
      random_values(rng, static_cast<std::size_t>(cout) * cin * k * k);
  if (with_bias) s.bias = random_values(rng, static_cast<std::size_t>(cout));
  return s;
}

inline DeconvSpec random_deconv(std::mt19937_64& rng, int cin, int cout, int k,
                                int stride, bool with_bias = true) {
  DeconvSpec s;
  s.kernel = k;
  s.stride = stride;
  s.in_channels = cin;
  s.out_channels = cout;
  s.weights =
      random_values(rng, static_cast<std::size_t>(cin) * cout * k * k);
  if (with_bias) s.bias = random_values(rng, static_cast<std::size_t>(cout));
  return s;
}

// Max |packed - reference| after unpacking.
inline double packed_vs_ref(const PackedTensor& packed,
                            const PlainTensor& ref) {
  return oracle::max_abs_diff(unpack(packed), ref);
}

// Zero-slot law: every slot not covered by a pixel must be exactly zero.
inline bool inactive_slots_zero(const PackedTensor& p) {
  std::vector<std::vector<bool>> covered(
      p.cts.size(), std::vector<bool>(p.cts.front().size(), false));
  const GipLayout& l = p.layout;
  for (int c = 0; c < l.channels; ++c) {
    for (int y = 0; y < l.height; ++y) {
      for (int x = 0; x < l.width; ++x) {
        const SlotAddress a = l.index_map(c, y, x);
        covered[static_cast<std::size_t>(a.ct)][a.slot] = true;
      }
    }
  }
  for (std::size_t i = 0; i < p.cts.size(); ++i) {
    for (std::size_t s = 0; s < p.cts[i].size(); ++s) {
      if (!covered[i][s] && p.cts[i][s] != 0.0) return false;
    }
  }
  return true;
}

// Random converted graph over the supported node kinds. Strides stay
// inside one packing family per step; upsampling only where the factor
// is already >= 1 so the zero-cost contract applies throughout.
inline ModelGraph random_graph(std::mt19937_64& rng, int base_size,
                               int max_nodes = 6) {
  std::uniform_int_distribution<int> coin(0, 99);
  ModelGraph m;
  const int h0 = base_size * (coin(rng) % 2 == 0 ? 2 : 1);
  const int c0 = 1 << (coin(rng) % 2);
  m.input = {c0, h0, h0};

  int H = h0, C = c0;
  int glog = 0;
  {
    int b = base_size, hh = h0;
    while (hh > b) {
      hh /= 2;
      ++glog;
    }
    while (hh < b) {
      hh *= 2;
      --glog;
    }
  }

  const int n_nodes = 3 + coin(rng) % (max_nodes - 2);
  int residual_anchor = -1;
  for (int i = 0; i < n_nodes; ++i) {
    const std::string id = "n" + std::to_string(i);
    const int pick = coin(rng) % 10;
    GraphNode n;
    n.id = id;
    if (pick < 4) {  // conv
      const bool strided = H >= 2 && coin(rng) % 3 == 0;
      const int k = (coin(rng) % 2 == 0) ? 3 : 1;
      const int cout = 1 << (coin(rng) % 2);
      n.kind = NodeKind::conv;
      n.kernel = k;
      n.stride = strided ? 2 : 1;
      n.out_channels = cout;
      n.weights = random_values(
          rng, static_cast<std::size_t>(cout) * C * k * k, -0.5, 0.5);
      if (coin(rng) % 2 == 0) {
        n.bias = random_values(rng, static_cast<std::size_t>(cout), -0.2, 0.2);
      }
      C = cout;
      if (strided) {
        H /= 2;
        --glog;
      }
      residual_anchor = -1;
    } else if (pick < 5 && H >= 2) {  // avgpool
      n.kind = NodeKind::avgpool;
      n.window = 2;
      n.stride = 2;
      H /= 2;
      --glog;
      residual_anchor = -1;
    } else if (pick < 6 && glog >= 0 && H <= 4 * base_size) {  // upsample
      n.kind = NodeKind::upsample;
      n.scale = 2;
      H *= 2;
      ++glog;
      residual_anchor = -1;
    } else if (pick < 8) {  // batchnorm
      n.kind = NodeKind::batchnorm;
      n.bn_scale = random_values(rng, static_cast<std::size_t>(C), 0.5, 1.5);
      n.bn_shift = random_values(rng, static_cast<std::size_t>(C), -0.3, 0.3);
      if (residual_anchor < 0) residual_anchor = i;
    } else if (pick < 9) {  // polynomial activation
      n.kind = NodeKind::activation;
      n.act = ActKind::polyact_rn;
      n.preset = coin(rng) % 2 == 0 ? "relu" : "silu";
      n.running_max =
          random_values(rng, static_cast<std::size_t>(C), 0.5, 4.0);
      if (residual_anchor < 0) residual_anchor = i;
    } else if (residual_anchor >= 0 &&
               residual_anchor < static_cast<int>(m.nodes.size())) {  // add
      n.kind = NodeKind::add;
      n.add_with = m.nodes[static_cast<std::size_t>(residual_anchor)].id;
    } else {
      n.kind = NodeKind::batchnorm;
      n.bn_scale = random_values(rng, static_cast<std::size_t>(C), 0.5, 1.5);
      n.bn_shift = random_values(rng, static_cast<std::size_t>(C), -0.3, 0.3);
    }
    m.nodes.push_back(std::move(n));
  }
  m.validate();
  return m;
}

}  // namespace gipcnn::test
