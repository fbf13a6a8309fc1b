#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace gipcnn {

// Plain value-type counter block. Mergeable: reports from concurrent
// workers can be summed in any order with the same result.
struct CostCounters {
  std::uint64_t rotations = 0;
  std::uint64_t ct_ct_mults = 0;
  std::uint64_t pt_ct_mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t bootstraps = 0;

  CostCounters& operator+=(const CostCounters& o) {
    rotations += o.rotations;
    ct_ct_mults += o.ct_ct_mults;
    pt_ct_mults += o.pt_ct_mults;
    adds += o.adds;
    bootstraps += o.bootstraps;
    return *this;
  }
  friend CostCounters operator+(CostCounters a, const CostCounters& b) {
    a += b;
    return a;
  }
  // Difference of two snapshots of the same monotone accumulator.
  friend CostCounters operator-(const CostCounters& a, const CostCounters& b) {
    return {a.rotations - b.rotations, a.ct_ct_mults - b.ct_ct_mults,
            a.pt_ct_mults - b.pt_ct_mults, a.adds - b.adds,
            a.bootstraps - b.bootstraps};
  }
  friend bool operator==(const CostCounters&, const CostCounters&) = default;

  std::uint64_t total_ops() const {
    return rotations + ct_ct_mults + pt_ct_mults + adds + bootstraps;
  }
};

// Thread-safe accumulator owned by an HEContext. Ops increment with
// relaxed atomics; snapshots are plain CostCounters.
class CounterBlock {
 public:
  void add_rotation() { rotations_.fetch_add(1, std::memory_order_relaxed); }
  void add_ct_ct_mult() { ct_ct_.fetch_add(1, std::memory_order_relaxed); }
  void add_pt_ct_mult() { pt_ct_.fetch_add(1, std::memory_order_relaxed); }
  void add_add() { adds_.fetch_add(1, std::memory_order_relaxed); }
  void add_bootstrap() { boots_.fetch_add(1, std::memory_order_relaxed); }

  CostCounters snapshot() const {
    return {rotations_.load(std::memory_order_relaxed),
            ct_ct_.load(std::memory_order_relaxed),
            pt_ct_.load(std::memory_order_relaxed),
            adds_.load(std::memory_order_relaxed),
            boots_.load(std::memory_order_relaxed)};
  }
  void reset() {
    rotations_ = 0;
    ct_ct_ = 0;
    pt_ct_ = 0;
    adds_ = 0;
    boots_ = 0;
  }

 private:
  std::atomic<std::uint64_t> rotations_{0};
  std::atomic<std::uint64_t> ct_ct_{0};
  std::atomic<std::uint64_t> pt_ct_{0};
  std::atomic<std::uint64_t> adds_{0};
  std::atomic<std::uint64_t> boots_{0};
};

// One executed (or planned) step of a model run.
struct LayerCost {
  std::string node_id;
  std::string kind;
  std::string factor_in;
  std::string factor_out;
  int level_in = 0;
  int level_out = 0;
  bool bootstrap_before = false;
  int depth = 0;  // multiplicative levels this step consumes
  CostCounters counters;
};

// Per-layer breakdown plus totals. totals always equals the sum of the
// per-layer counter blocks; max_depth is the longest multiplication chain
// of the circuit (bootstrap-independent).
struct CostReport {
  std::vector<LayerCost> layers;
  CostCounters totals;
  int max_depth = 0;

  void append(LayerCost layer) {
    totals += layer.counters;
    layers.push_back(std::move(layer));
  }
  void merge(const CostReport& o) {
    for (const auto& l : o.layers) layers.push_back(l);
    totals += o.totals;
    if (o.max_depth > max_depth) max_depth = o.max_depth;
  }
};

// Fixed-column text rendering, deterministic row order (layer order).
std::string render_report(const CostReport& report);

}  // namespace gipcnn
