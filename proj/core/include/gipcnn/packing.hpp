#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gipcnn/errors.hpp"
#include "gipcnn/slotvm.hpp"

namespace gipcnn {

// Channel packing factor g = H / base. Always a power of two or the
// reciprocal of one, so it is stored exactly as an exponent.
class PackFactor {
 public:
  constexpr PackFactor() = default;
  static constexpr PackFactor from_log2(int e) { return PackFactor(e); }
  // h and base must both be powers of two.
  static PackFactor from_ratio(int h, int base);

  constexpr int log2() const { return log2_; }
  double value() const;
  // g >= 1: interleaved decomposition, integer factor.
  constexpr bool interleaved() const { return log2_ >= 0; }
  // integer g for g >= 1
  int numerator() const;
  // integer 1/g for g <= 1
  int denominator() const;

  constexpr PackFactor scaled_up(int pow2_exp) const {
    return PackFactor(log2_ + pow2_exp);
  }
  constexpr PackFactor scaled_down(int pow2_exp) const {
    return PackFactor(log2_ - pow2_exp);
  }

  std::string str() const;  // "4", "1", "1/2", ...

  friend constexpr bool operator==(PackFactor a, PackFactor b) {
    return a.log2_ == b.log2_;
  }

 private:
  constexpr explicit PackFactor(int e) : log2_(e) {}
  int log2_ = 0;
};

enum class OpShape {
  downsample,  // strided convolution or strided average pooling
  upsample,    // deconvolution or nearest-neighbor upsampling
  preserve,    // batchnorm, activations, stride-1 conv/pool
};

// g_{i+1} from g_i: g/s for down-sampling, g*s for up-sampling, g for
// resolution-preserving operators. stride must be a power of two.
PackFactor propagate_factor(PackFactor g, OpShape op, int stride);

// True iff moving between the two factors needs no slot rearrangement:
// the interleaved and multiplexed families only meet at g = 1, so a
// transition is seamless exactly when it does not jump across g = 1.
bool relayout_boundary_check(PackFactor g_in, PackFactor g_out);

struct SlotAddress {
  int ct = 0;
  std::size_t slot = 0;
  friend bool operator==(const SlotAddress&, const SlotAddress&) = default;
};

// Pixel <-> slot mapping for one packed feature map. Square maps with
// power-of-two H, base and C. Slot order inside a ciphertext is row-major
// over the base x base grid.
struct GipLayout {
  int height = 0;    // H
  int width = 0;     // W (= H)
  int channels = 0;  // C
  int base_size = 0; // \hat{H}, fixed across a network

  static GipLayout make(int channels, int height, int width, int base_size,
                        std::size_t slot_count);

  PackFactor factor() const { return PackFactor::from_ratio(height, base_size); }
  // number of ciphertexts: C*g^2 when g >= 1, ceil(C / (1/g)^2) when g < 1
  int ct_count() const;
  // channels multiplexed per ciphertext (1 for interleaved layouts)
  int channels_per_ct() const;
  std::size_t active_slots_per_ct() const;

  SlotAddress index_map(int c, int y, int x) const;

  friend bool operator==(const GipLayout&, const GipLayout&) = default;
};

// Dense C x H x W tensor of reals, (c, y, x) row-major. The plaintext
// side of pack/unpack and the value type of the reference operators.
class PlainTensor {
 public:
  PlainTensor() = default;
  PlainTensor(int channels, int height, int width, double fill = 0.0);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const PlainTensor&, const PlainTensor&) = default;

 private:
  std::size_t index(int c, int y, int x) const;
  int channels_ = 0, height_ = 0, width_ = 0;
  std::vector<double> data_;
};

// A feature map in packed form: one SlotVector per layout ciphertext.
// All ciphertexts share a context and a level; slots not covered by a
// pixel are zero, and every operator maintains that.
struct PackedTensor {
  GipLayout layout;
  std::vector<SlotVector> cts;

  // common level of all ciphertexts (throws if they diverge)
  int level() const;
};

// Places every pixel per the layout index map; unused slots zero; all
// ciphertexts at max_level.
PackedTensor pack(const HEContext& ctx, const PlainTensor& x, int base_size);

// Exact inverse of pack for any valid layout.
PlainTensor unpack(const PackedTensor& p);

}  // namespace gipcnn
