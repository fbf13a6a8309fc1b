#pragma once

#include <span>

#include "gipcnn/hops.hpp"
#include "gipcnn/packing.hpp"
#include "gipcnn/polyact.hpp"

namespace gipcnn::oracle {

// Ground-truth operators for differential testing. Direct nested-loop
// definitions, written independently of the packed implementations.

PlainTensor conv2d_ref(const PlainTensor& x, const ConvSpec& spec);
PlainTensor deconv2d_ref(const PlainTensor& x, const DeconvSpec& spec);
PlainTensor avgpool_ref(const PlainTensor& x, int window, int stride);
PlainTensor upsample_ref(const PlainTensor& x, int scale);
PlainTensor affine_ref(const PlainTensor& x, const AffineSpec& spec);
PlainTensor polyact_ref(const PlainTensor& x,
                        std::span<const Monomials> coeffs);

double max_abs_diff(const PlainTensor& a, const PlainTensor& b);

}  // namespace gipcnn::oracle
