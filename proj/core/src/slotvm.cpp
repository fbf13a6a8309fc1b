#include "gipcnn/slotvm.hpp"

#include <string>

namespace gipcnn {

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

HEContext::HEContext(std::size_t slot_count, int max_level,
                     int bootstrap_refresh_level)
    : slot_count_(slot_count),
      max_level_(max_level),
      refresh_level_(bootstrap_refresh_level < 0 ? max_level
                                                 : bootstrap_refresh_level) {
  if (!is_pow2(slot_count_) || slot_count_ < 4) {
    throw GeometryError("slot count must be a power of two >= 4, got " +
                        std::to_string(slot_count_));
  }
  if (max_level_ <= 0) {
    throw GeometryError("max level must be positive");
  }
  if (refresh_level_ <= 0 || refresh_level_ > max_level_) {
    throw GeometryError("bootstrap refresh level must be in (0, max_level]");
  }
}

void HEContext::check_owned(const SlotVector& v, const char* op) const {
  if (v.context() != this) {
    throw GeometryError(std::string(op) +
                        ": ciphertext belongs to a different context");
  }
  if (v.size() != slot_count_) {
    throw GeometryError(std::string(op) + ": ciphertext width mismatch");
  }
}

void HEContext::check_plain(const PlainVector& p, const char* op) const {
  if (p.slots.size() != slot_count_) {
    throw GeometryError(std::string(op) + ": plaintext width mismatch (" +
                        std::to_string(p.slots.size()) + " vs " +
                        std::to_string(slot_count_) + " slots)");
  }
}

SlotVector HEContext::encrypt(std::vector<double> values, int level) const {
  if (values.size() > slot_count_) {
    throw GeometryError("encrypt: more values than slots");
  }
  values.resize(slot_count_, 0.0);
  int lvl = level < 0 ? max_level_ : level;
  if (lvl < 0) throw LevelError("encrypt: negative level");
  return SlotVector(this, std::move(values), lvl);
}

SlotVector HEContext::zero(int level) const {
  return SlotVector(this, std::vector<double>(slot_count_, 0.0), level);
}

PlainVector HEContext::encode(std::vector<double> values) const {
  if (values.size() > slot_count_) {
    throw GeometryError("encode: more values than slots");
  }
  values.resize(slot_count_, 0.0);
  return PlainVector{std::move(values)};
}

SlotVector HEContext::add(const SlotVector& a, const SlotVector& b) const {
  check_owned(a, "add");
  check_owned(b, "add");
  std::vector<double> out(slot_count_);
  for (std::size_t i = 0; i < slot_count_; ++i) out[i] = a[i] + b[i];
  counters_.add_add();
  return SlotVector(this, std::move(out), std::min(a.level(), b.level()));
}

SlotVector HEContext::add_plain(const SlotVector& a,
                                const PlainVector& p) const {
  check_owned(a, "add_plain");
  check_plain(p, "add_plain");
  std::vector<double> out(slot_count_);
  for (std::size_t i = 0; i < slot_count_; ++i) out[i] = a[i] + p.slots[i];
  counters_.add_add();
  return SlotVector(this, std::move(out), a.level());
}

SlotVector HEContext::mul_plain(const SlotVector& a,
                                const PlainVector& p) const {
  check_owned(a, "mul_plain");
  check_plain(p, "mul_plain");
  if (a.level() < 1) {
    throw LevelError("mul_plain: level exhausted, bootstrap required");
  }
  std::vector<double> out(slot_count_);
  for (std::size_t i = 0; i < slot_count_; ++i) out[i] = a[i] * p.slots[i];
  counters_.add_pt_ct_mult();
  return SlotVector(this, std::move(out), a.level() - 1);
}

SlotVector HEContext::mul(const SlotVector& a, const SlotVector& b) const {
  check_owned(a, "mul");
  check_owned(b, "mul");
  int lvl = std::min(a.level(), b.level());
  if (lvl < 1) {
    throw LevelError("mul: level exhausted, bootstrap required");
  }
  std::vector<double> out(slot_count_);
  for (std::size_t i = 0; i < slot_count_; ++i) out[i] = a[i] * b[i];
  counters_.add_ct_ct_mult();
  return SlotVector(this, std::move(out), lvl - 1);
}

SlotVector HEContext::rotate(const SlotVector& a, long r) const {
  check_owned(a, "rotate");
  const long n = static_cast<long>(slot_count_);
  long shift = ((r % n) + n) % n;
  if (shift == 0) return a;  // identity rotation, not counted
  std::vector<double> out(slot_count_);
  for (std::size_t i = 0; i < slot_count_; ++i) {
    out[i] = a[(i + static_cast<std::size_t>(shift)) % slot_count_];
  }
  counters_.add_rotation();
  return SlotVector(this, std::move(out), a.level());
}

SlotVector HEContext::bootstrap(const SlotVector& a) const {
  check_owned(a, "bootstrap");
  counters_.add_bootstrap();
  return SlotVector(this, a.slots(), refresh_level_);
}

}  // namespace gipcnn
