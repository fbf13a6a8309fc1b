#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gipcnn/packing.hpp"

namespace gipcnn {

// Weighted coefficients over the orthonormal Hermite basis h0..h4.
struct HermiteCoeffs {
  std::array<double, 5> f{};

  static const HermiteCoeffs kRelu;
  static const HermiteCoeffs kSilu;
  // "relu" or "silu"
  static HermiteCoeffs preset(const std::string& name);
};

// Basis functions: h0=1, h1=x, h2=(x^2-1)/sqrt2, h3=(x^3-3x)/sqrt6,
// h4=(x^4-6x^2+3)/(2 sqrt6).
double hermite_eval(int i, double x);

using Monomials = std::array<double, 5>;  // a0..a4, poly(x) = sum a_j x^j

// Expand sum_i f_i h_i(x) into monomial coefficients.
Monomials to_monomial(const HermiteCoeffs& f);
// Inverse of to_monomial.
HermiteCoeffs from_monomial(const Monomials& a);

double eval_monomials(const Monomials& a, double x);  // Horner

// Coefficients of q*poly(x/q) as a polynomial in x: c_j = a_j * q^(1-j).
// One set per channel; feeds the packed polynomial evaluator.
Monomials fuse_inference(const Monomials& a, double q_c);
std::vector<Monomials> fuse_inference(const Monomials& a,
                                      std::span<const double> q);

enum class ActMode { training, inference };

// Range-normalized polynomial activation state. Running statistics are
// mutated only in training mode; inference is pure.
struct PolyActState {
  double gamma = 3.0;
  double beta = 0.9;
  double eps = 1e-5;
  ActMode mode = ActMode::inference;
  std::vector<double> running_max;  // M_c^inf, one per channel, init 1

  static PolyActState make(int channels, ActMode mode = ActMode::inference,
                           double gamma = 3.0, double beta = 0.9,
                           double eps = 1e-5);

  // per-channel scale q_c = M_c^inf / gamma + eps (inference)
  double inference_scale(int c) const;
};

// Normalize per channel by q_c, evaluate poly, rescale by q_c.
// Training mode computes the batch max per channel, updates running
// statistics and uses the batch-derived q_c; inference uses the stored
// running statistic and leaves state untouched.
std::vector<PlainTensor> polyact_rn_forward(std::span<const PlainTensor> batch,
                                            const HermiteCoeffs& f,
                                            PolyActState& state);
PlainTensor polyact_rn_forward(const PlainTensor& x, const HermiteCoeffs& f,
                               const PolyActState& state);

struct ApproxError {
  double max_abs_err = 0.0;
  double mean_abs_err = 0.0;
};

enum class ActTarget { relu, silu };

// Dense-sampling error of the degree-4 approximation against the exact
// activation on [-gamma, gamma]. Equispaced grid, >= 1e5 points.
ApproxError approx_error(const HermiteCoeffs& f, ActTarget target,
                         double gamma, int samples = 200001);

}  // namespace gipcnn
