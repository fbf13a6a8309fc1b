#include "gipcnn/polyact.hpp"

#include <cmath>
#include <string>

#include "gipcnn/errors.hpp"

namespace gipcnn {

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt6 = std::sqrt(6.0);

double relu(double x) { return x > 0.0 ? x : 0.0; }
double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

const HermiteCoeffs HermiteCoeffs::kRelu{
    {0.39894228, 0.5, 0.28209479, 0.0, -0.08143375}};
const HermiteCoeffs HermiteCoeffs::kSilu{
    {0.20662096, 0.5, 0.24808519, 0.0, -0.03780501}};

HermiteCoeffs HermiteCoeffs::preset(const std::string& name) {
  if (name == "relu") return kRelu;
  if (name == "silu") return kSilu;
  throw SchemaError("unknown activation preset: " + name);
}

double hermite_eval(int i, double x) {
  switch (i) {
    case 0:
      return 1.0;
    case 1:
      return x;
    case 2:
      return (x * x - 1.0) / kSqrt2;
    case 3:
      return (x * x * x - 3.0 * x) / kSqrt6;
    case 4:
      return (x * x * x * x - 6.0 * x * x + 3.0) / (2.0 * kSqrt6);
    default:
      throw GeometryError("hermite basis index out of range: " +
                          std::to_string(i));
  }
}

Monomials to_monomial(const HermiteCoeffs& f) {
  const auto& c = f.f;
  Monomials a;
  a[0] = c[0] - c[2] / kSqrt2 + 3.0 * c[4] / (2.0 * kSqrt6);
  a[1] = c[1] - 3.0 * c[3] / kSqrt6;
  a[2] = c[2] / kSqrt2 - 6.0 * c[4] / (2.0 * kSqrt6);
  a[3] = c[3] / kSqrt6;
  a[4] = c[4] / (2.0 * kSqrt6);
  return a;
}

HermiteCoeffs from_monomial(const Monomials& a) {
  HermiteCoeffs f;
  f.f[4] = 2.0 * kSqrt6 * a[4];
  f.f[3] = kSqrt6 * a[3];
  f.f[2] = kSqrt2 * a[2] + kSqrt3 * f.f[4];
  f.f[1] = a[1] + 3.0 * f.f[3] / kSqrt6;
  f.f[0] = a[0] + f.f[2] / kSqrt2 - 3.0 * f.f[4] / (2.0 * kSqrt6);
  return f;
}

double eval_monomials(const Monomials& a, double x) {
  double r = a[4];
  for (int j = 3; j >= 0; --j) r = r * x + a[j];
  return r;
}

Monomials fuse_inference(const Monomials& a, double q_c) {
  if (!(q_c > 0.0)) {
    throw GeometryError("fuse_inference requires q_c > 0");
  }
  Monomials c;
  double scale = q_c;  // q^(1-j), starting at j = 0
  for (int j = 0; j < 5; ++j) {
    c[j] = a[j] * scale;
    scale /= q_c;
  }
  return c;
}

std::vector<Monomials> fuse_inference(const Monomials& a,
                                      std::span<const double> q) {
  std::vector<Monomials> out;
  out.reserve(q.size());
  for (double qc : q) out.push_back(fuse_inference(a, qc));
  return out;
}

PolyActState PolyActState::make(int channels, ActMode mode, double gamma,
                                double beta, double eps) {
  if (channels <= 0) throw GeometryError("polyact state needs channels > 0");
  if (!(gamma > 0.0)) throw GeometryError("gamma must be positive");
  if (beta < 0.0 || beta >= 1.0) throw GeometryError("beta must be in [0,1)");
  PolyActState s;
  s.gamma = gamma;
  s.beta = beta;
  s.eps = eps;
  s.mode = mode;
  s.running_max.assign(static_cast<std::size_t>(channels), 1.0);
  return s;
}

double PolyActState::inference_scale(int c) const {
  return running_max.at(static_cast<std::size_t>(c)) / gamma + eps;
}

namespace {

PlainTensor apply_poly(const PlainTensor& x, const Monomials& a,
                       std::span<const double> q) {
  PlainTensor y(x.channels(), x.height(), x.width());
  for (int c = 0; c < x.channels(); ++c) {
    const double qc = q[static_cast<std::size_t>(c)];
    for (int yy = 0; yy < x.height(); ++yy) {
      for (int xx = 0; xx < x.width(); ++xx) {
        y.at(c, yy, xx) = qc * eval_monomials(a, x.at(c, yy, xx) / qc);
      }
    }
  }
  return y;
}

}  // namespace

std::vector<PlainTensor> polyact_rn_forward(std::span<const PlainTensor> batch,
                                            const HermiteCoeffs& f,
                                            PolyActState& state) {
  if (batch.empty()) throw GeometryError("polyact forward on empty batch");
  const int C = batch.front().channels();
  if (static_cast<std::size_t>(C) != state.running_max.size()) {
    throw GeometryError("polyact state channel count mismatch");
  }
  const Monomials a = to_monomial(f);

  std::vector<double> q(static_cast<std::size_t>(C), 0.0);
  if (state.mode == ActMode::training) {
    for (int c = 0; c < C; ++c) {
      double m = 0.0;
      for (const PlainTensor& t : batch) {
        if (t.channels() != C) {
          throw GeometryError("batch members disagree on channel count");
        }
        for (int yy = 0; yy < t.height(); ++yy) {
          for (int xx = 0; xx < t.width(); ++xx) {
            m = std::max(m, std::abs(t.at(c, yy, xx)));
          }
        }
      }
      auto& run = state.running_max[static_cast<std::size_t>(c)];
      run = state.beta * run + (1.0 - state.beta) * m;
      q[static_cast<std::size_t>(c)] = m / state.gamma + state.eps;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      q[static_cast<std::size_t>(c)] = state.inference_scale(c);
    }
  }

  std::vector<PlainTensor> out;
  out.reserve(batch.size());
  for (const PlainTensor& t : batch) out.push_back(apply_poly(t, a, q));
  return out;
}

PlainTensor polyact_rn_forward(const PlainTensor& x, const HermiteCoeffs& f,
                               const PolyActState& state) {
  if (state.mode != ActMode::inference) {
    throw GeometryError("single-tensor forward is inference-only");
  }
  if (static_cast<std::size_t>(x.channels()) != state.running_max.size()) {
    throw GeometryError("polyact state channel count mismatch");
  }
  const Monomials a = to_monomial(f);
  std::vector<double> q(static_cast<std::size_t>(x.channels()));
  for (int c = 0; c < x.channels(); ++c) q[c] = state.inference_scale(c);
  return apply_poly(x, a, q);
}

ApproxError approx_error(const HermiteCoeffs& f, ActTarget target,
                         double gamma, int samples) {
  if (!(gamma > 0.0)) throw GeometryError("approx_error requires gamma > 0");
  if (samples < 2) throw GeometryError("approx_error requires >= 2 samples");
  const Monomials a = to_monomial(f);
  ApproxError e;
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = -gamma + (2.0 * gamma) * i / (samples - 1);
    const double ref = target == ActTarget::relu ? relu(x) : silu(x);
    const double err = std::abs(eval_monomials(a, x) - ref);
    if (err > e.max_abs_err) e.max_abs_err = err;
    acc += err;
  }
  e.mean_abs_err = acc / samples;
  return e;
}

}  // namespace gipcnn
