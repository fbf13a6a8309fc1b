#pragma once

#include <span>
#include <vector>

#include "gipcnn/packing.hpp"
#include "gipcnn/polyact.hpp"
#include "gipcnn/slotvm.hpp"

namespace gipcnn {

// Cross-correlation convolution, zero padding. weights are
// [out][in][ky][kx] row-major; padding -1 means SAME ((k-1)/2).
struct ConvSpec {
  int kernel = 1;
  int stride = 1;
  int padding = -1;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;  // empty or out_channels entries

  int pad() const { return padding < 0 ? (kernel - 1) / 2 : padding; }
  double weight(int co, int ci, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(co) * in_channels + ci) * kernel +
                    ky) *
                       kernel +
                   kx];
  }
  void validate() const;
};

// Transposed convolution. weights are [in][out][ky][kx] row-major.
// Supported geometries: kernel == stride (block scatter) and
// kernel == 2*stride - 1 with padding stride-1 and output padding
// stride-1; both double the resolution by exactly the stride.
struct DeconvSpec {
  int kernel = 2;
  int stride = 2;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  int pad() const { return kernel == stride ? 0 : stride - 1; }
  double weight(int ci, int co, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(ci) * out_channels + co) *
                        kernel +
                    ky) *
                       kernel +
                   kx];
  }
  void validate() const;
};

// Per-channel scale and shift.
struct AffineSpec {
  std::vector<double> scale;
  std::vector<double> shift;
};

// Predicted cost of one packed operator application. Counter
// predictions are exact: they enumerate the same schedule the executor
// runs.
struct OpCost {
  CostCounters counters;
  int depth = 0;  // multiplicative levels consumed
};

// ---- output layout arithmetic -------------------------------------------

GipLayout conv2d_output_layout(const GipLayout& in, const ConvSpec& spec,
                               std::size_t slot_count);
GipLayout deconv2d_output_layout(const GipLayout& in, const DeconvSpec& spec,
                                 std::size_t slot_count);
GipLayout avgpool_output_layout(const GipLayout& in, int window, int stride,
                                std::size_t slot_count);
GipLayout upsample_output_layout(const GipLayout& in, int scale,
                                 std::size_t slot_count);

// ---- packed operators -----------------------------------------------------

// Rotate-mask-accumulate convolution preserving GIP form; boundary
// zero-masking is folded into the plaintext kernel taps, so exactly one
// level is consumed. Interleaved inputs decompose per sub-channel;
// multiplexed inputs use lane-masked partial sums followed by
// garbage-free lane rotations.
PackedTensor conv2d(HEContext& ctx, const PackedTensor& x,
                    const ConvSpec& spec);

// Interleaved-decomposition dual of conv2d: each output sub-channel
// collects the kernel taps that scatter onto its residue class.
PackedTensor deconv2d(HEContext& ctx, const PackedTensor& x,
                      const DeconvSpec& spec);

// Non-overlapping mean pooling (window == stride): a constant 1/w^2
// depthwise convolution.
PackedTensor avgpool(HEContext& ctx, const PackedTensor& x, int window,
                     int stride);

// Nearest-neighbor upsampling. For interleaved inputs every new
// sub-channel class is a verbatim copy of its source ciphertext (no
// rotations, no mults, no level). Multiplexed inputs are lifted through
// the block-scatter deconvolution path, which costs one level.
PackedTensor upsample_nearest(HEContext& ctx, const PackedTensor& x,
                              int scale);

// y[c] = scale[c] * x[c] + shift[c]; one level.
PackedTensor batchnorm_affine(HEContext& ctx, const PackedTensor& x,
                              const AffineSpec& spec);

// Degree-4 polynomial over the power basis {v, v^2, v^4} with plaintext
// coefficient folding: exactly 3 levels, 2 ct-ct and 3 pt-ct mults per
// ciphertext. coeffs holds the per-channel monomials (already fused).
PackedTensor polyact_eval(HEContext& ctx, const PackedTensor& x,
                          std::span<const Monomials> coeffs);

// ---- exact cost predictions (shared schedule enumeration) ----------------

OpCost estimate_conv2d(std::size_t slot_count, const GipLayout& in,
                       const ConvSpec& spec);
OpCost estimate_deconv2d(std::size_t slot_count, const GipLayout& in,
                         const DeconvSpec& spec);
OpCost estimate_avgpool(std::size_t slot_count, const GipLayout& in,
                        int window, int stride);
OpCost estimate_upsample(std::size_t slot_count, const GipLayout& in,
                         int scale);
OpCost estimate_batchnorm(const GipLayout& in);
OpCost estimate_polyact(const GipLayout& in);

// Plaintext vector carrying per_channel[c] on every active slot of
// ciphertext ct_index and zero elsewhere. Used for batchnorm, biases and
// per-channel polynomial coefficients.
PlainVector channel_plain(const HEContext& ctx, const GipLayout& layout,
                          int ct_index, std::span<const double> per_channel);

}  // namespace gipcnn
