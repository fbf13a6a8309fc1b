#pragma once

#include <cstddef>
#include <vector>

#include "gipcnn/cost.hpp"
#include "gipcnn/errors.hpp"

namespace gipcnn {

class HEContext;

// Encoded plaintext: a real vector of exactly slot_count entries.
struct PlainVector {
  std::vector<double> slots;
};

// Simulated CKKS ciphertext: slot values are carried exactly (no noise,
// no scale bookkeeping); the level counter models the multiplicative
// budget. Immutable value type; all arithmetic goes through HEContext.
class SlotVector {
 public:
  SlotVector() = default;
  SlotVector(const HEContext* ctx, std::vector<double> slots, int level)
      : ctx_(ctx), slots_(std::move(slots)), level_(level) {}

  const std::vector<double>& slots() const { return slots_; }
  int level() const { return level_; }
  const HEContext* context() const { return ctx_; }
  std::size_t size() const { return slots_.size(); }
  double operator[](std::size_t i) const { return slots_[i]; }

 private:
  friend class HEContext;
  const HEContext* ctx_ = nullptr;
  std::vector<double> slots_;
  int level_ = 0;
};

// Slot-batched evaluator. Shared read-only across threads; the counter
// block is the only mutable state and is updated atomically.
class HEContext {
 public:
  // slot_count must be a power of two >= 4. bootstrap_refresh_level
  // defaults to max_level.
  explicit HEContext(std::size_t slot_count = std::size_t{1} << 15,
                     int max_level = 20, int bootstrap_refresh_level = -1);

  HEContext(const HEContext&) = delete;
  HEContext& operator=(const HEContext&) = delete;

  std::size_t slot_count() const { return slot_count_; }
  int max_level() const { return max_level_; }
  int bootstrap_refresh_level() const { return refresh_level_; }

  CounterBlock& counters() const { return counters_; }
  CostCounters counter_snapshot() const { return counters_.snapshot(); }

  // Fresh ciphertext at max_level (default) or an explicit level. Values
  // shorter than slot_count are zero-extended.
  SlotVector encrypt(std::vector<double> values, int level = -1) const;
  SlotVector zero(int level) const;
  PlainVector encode(std::vector<double> values) const;

  // result level = min of operand levels
  SlotVector add(const SlotVector& a, const SlotVector& b) const;
  // plaintext addition: level unchanged, counted as an add
  SlotVector add_plain(const SlotVector& a, const PlainVector& p) const;
  // consumes one level; throws LevelError at level 0
  SlotVector mul_plain(const SlotVector& a, const PlainVector& p) const;
  SlotVector mul(const SlotVector& a, const SlotVector& b) const;
  // cyclic shift, left for r > 0; r == 0 (mod slot_count) is a free no-op
  SlotVector rotate(const SlotVector& a, long r) const;
  // slots unchanged, level reset to bootstrap_refresh_level
  SlotVector bootstrap(const SlotVector& a) const;

 private:
  void check_owned(const SlotVector& v, const char* op) const;
  void check_plain(const PlainVector& p, const char* op) const;

  std::size_t slot_count_;
  int max_level_;
  int refresh_level_;
  mutable CounterBlock counters_;
};

}  // namespace gipcnn
