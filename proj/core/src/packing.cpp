#include "gipcnn/packing.hpp"

#include <cmath>

namespace gipcnn {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int ilog2(int v) {
  int e = 0;
  while ((1 << e) < v) ++e;
  return e;
}

}  // namespace

PackFactor PackFactor::from_ratio(int h, int base) {
  if (!is_pow2(h) || !is_pow2(base)) {
    throw GeometryError("packing factor requires power-of-two H and base");
  }
  return PackFactor(ilog2(h) - ilog2(base));
}

double PackFactor::value() const { return std::ldexp(1.0, log2_); }

int PackFactor::numerator() const {
  if (log2_ < 0) throw GeometryError("factor < 1 has no integer numerator");
  return 1 << log2_;
}

int PackFactor::denominator() const {
  if (log2_ > 0) throw GeometryError("factor > 1 has no integer denominator");
  return 1 << (-log2_);
}

std::string PackFactor::str() const {
  if (log2_ >= 0) return std::to_string(1 << log2_);
  return "1/" + std::to_string(1 << (-log2_));
}

PackFactor propagate_factor(PackFactor g, OpShape op, int stride) {
  if (!is_pow2(stride)) {
    throw GeometryError("stride must be a power of two");
  }
  const int e = ilog2(stride);
  switch (op) {
    case OpShape::downsample:
      return g.scaled_down(e);
    case OpShape::upsample:
      return g.scaled_up(e);
    case OpShape::preserve:
      return g;
  }
  throw GeometryError("unknown op shape");
}

bool relayout_boundary_check(PackFactor g_in, PackFactor g_out) {
  return (g_in.log2() >= 0 && g_out.log2() >= 0) ||
         (g_in.log2() <= 0 && g_out.log2() <= 0);
}

GipLayout GipLayout::make(int channels, int height, int width, int base_size,
                          std::size_t slot_count) {
  if (height != width) {
    throw GeometryError("feature maps must be square, got " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
  if (!is_pow2(height) || !is_pow2(channels) || !is_pow2(base_size)) {
    throw GeometryError("H, C and base size must all be powers of two");
  }
  const std::size_t grid =
      static_cast<std::size_t>(base_size) * static_cast<std::size_t>(base_size);
  if (grid > slot_count) {
    throw GeometryError("base size " + std::to_string(base_size) +
                        " exceeds slot capacity: base^2 > " +
                        std::to_string(slot_count));
  }
  return GipLayout{height, width, channels, base_size};
}

int GipLayout::ct_count() const {
  const PackFactor g = factor();
  if (g.interleaved()) {
    const int gi = g.numerator();
    return channels * gi * gi;
  }
  const int t = g.denominator();
  return (channels + t * t - 1) / (t * t);
}

int GipLayout::channels_per_ct() const {
  const PackFactor g = factor();
  if (g.interleaved()) return 1;
  const int t = g.denominator();
  return t * t;
}

std::size_t GipLayout::active_slots_per_ct() const {
  const PackFactor g = factor();
  const std::size_t grid =
      static_cast<std::size_t>(base_size) * static_cast<std::size_t>(base_size);
  if (g.interleaved()) return grid;
  // a partially filled multiplexed ciphertext has fewer active slots,
  // but per full ciphertext the whole grid is in use
  return grid;
}

SlotAddress GipLayout::index_map(int c, int y, int x) const {
  if (c < 0 || c >= channels || y < 0 || y >= height || x < 0 || x >= width) {
    throw GeometryError("index_map: pixel out of range");
  }
  const PackFactor g = factor();
  if (g.interleaved()) {
    const int gi = g.numerator();
    const int ct = c * gi * gi + (y % gi) * gi + (x % gi);
    const std::size_t slot = static_cast<std::size_t>(y / gi) * base_size +
                             static_cast<std::size_t>(x / gi);
    return {ct, slot};
  }
  const int t = g.denominator();
  const int ct = c / (t * t);
  const int m = c % (t * t);
  const std::size_t slot =
      static_cast<std::size_t>(y * t + m / t) * static_cast<std::size_t>(width * t) +
      static_cast<std::size_t>(x * t + m % t);
  return {ct, slot};
}

PlainTensor::PlainTensor(int channels, int height, int width, double fill)
    : channels_(channels),
      height_(height),
      width_(width),
      data_(static_cast<std::size_t>(channels) * height * width, fill) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw GeometryError("tensor dims must be positive");
  }
}

std::size_t PlainTensor::index(int c, int y, int x) const {
  return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
}

int PackedTensor::level() const {
  if (cts.empty()) throw GeometryError("packed tensor has no ciphertexts");
  const int lvl = cts.front().level();
  for (const auto& ct : cts) {
    if (ct.level() != lvl) {
      throw GeometryError("packed tensor has diverging ciphertext levels");
    }
  }
  return lvl;
}

PackedTensor pack(const HEContext& ctx, const PlainTensor& x, int base_size) {
  GipLayout layout = GipLayout::make(x.channels(), x.height(), x.width(),
                                     base_size, ctx.slot_count());
  std::vector<std::vector<double>> raw(
      layout.ct_count(), std::vector<double>(ctx.slot_count(), 0.0));
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        const SlotAddress a = layout.index_map(c, y, xx);
        raw[a.ct][a.slot] = x.at(c, y, xx);
      }
    }
  }
  PackedTensor out;
  out.layout = layout;
  out.cts.reserve(raw.size());
  for (auto& slots : raw) {
    out.cts.push_back(ctx.encrypt(std::move(slots)));
  }
  return out;
}

PlainTensor unpack(const PackedTensor& p) {
  const GipLayout& layout = p.layout;
  if (static_cast<int>(p.cts.size()) != layout.ct_count()) {
    throw GeometryError("unpack: ciphertext count does not match layout");
  }
  PlainTensor out(layout.channels, layout.height, layout.width);
  for (int c = 0; c < layout.channels; ++c) {
    for (int y = 0; y < layout.height; ++y) {
      for (int x = 0; x < layout.width; ++x) {
        const SlotAddress a = layout.index_map(c, y, x);
        out.at(c, y, x) = p.cts[a.ct][a.slot];
      }
    }
  }
  return out;
}

}  // namespace gipcnn
