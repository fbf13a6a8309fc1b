#include "gipcnn/oracle.hpp"

#include <cmath>

#include "gipcnn/errors.hpp"

namespace gipcnn::oracle {

PlainTensor conv2d_ref(const PlainTensor& x, const ConvSpec& spec) {
  spec.validate();
  if (spec.in_channels != x.channels()) {
    throw GeometryError("conv2d_ref: channel mismatch");
  }
  const int H = x.height(), W = x.width();
  const int k = spec.kernel, s = spec.stride, p = spec.pad();
  const int Ho = (H + 2 * p - k) / s + 1;
  const int Wo = (W + 2 * p - k) / s + 1;
  PlainTensor y(spec.out_channels, Ho, Wo);
  for (int co = 0; co < spec.out_channels; ++co) {
    const double b0 = spec.bias.empty() ? 0.0 : spec.bias[co];
    for (int u = 0; u < Ho; ++u) {
      for (int v = 0; v < Wo; ++v) {
        double acc = b0;
        for (int ci = 0; ci < spec.in_channels; ++ci) {
          for (int a = 0; a < k; ++a) {
            const int yy = u * s + a - p;
            if (yy < 0 || yy >= H) continue;
            for (int b = 0; b < k; ++b) {
              const int xx = v * s + b - p;
              if (xx < 0 || xx >= W) continue;
              acc += spec.weight(co, ci, a, b) * x.at(ci, yy, xx);
            }
          }
        }
        y.at(co, u, v) = acc;
      }
    }
  }
  return y;
}

PlainTensor deconv2d_ref(const PlainTensor& x, const DeconvSpec& spec) {
  spec.validate();
  if (spec.in_channels != x.channels()) {
    throw GeometryError("deconv2d_ref: channel mismatch");
  }
  const int H = x.height(), W = x.width();
  const int k = spec.kernel, s = spec.stride, p = spec.pad();
  const int Ho = H * s, Wo = W * s;
  PlainTensor y(spec.out_channels, Ho, Wo);
  if (!spec.bias.empty()) {
    for (int co = 0; co < spec.out_channels; ++co) {
      for (int u = 0; u < Ho; ++u) {
        for (int v = 0; v < Wo; ++v) y.at(co, u, v) = spec.bias[co];
      }
    }
  }
  // scatter: input pixel (yy, xx) adds w[ci][co][a][b] * x to output
  // (yy*s + a - p, xx*s + b - p)
  for (int ci = 0; ci < spec.in_channels; ++ci) {
    for (int yy = 0; yy < H; ++yy) {
      for (int xx = 0; xx < W; ++xx) {
        const double v = x.at(ci, yy, xx);
        if (v == 0.0) continue;
        for (int co = 0; co < spec.out_channels; ++co) {
          for (int a = 0; a < k; ++a) {
            const int u = yy * s + a - p;
            if (u < 0 || u >= Ho) continue;
            for (int b = 0; b < k; ++b) {
              const int w = xx * s + b - p;
              if (w < 0 || w >= Wo) continue;
              y.at(co, u, w) += spec.weight(ci, co, a, b) * v;
            }
          }
        }
      }
    }
  }
  return y;
}

PlainTensor avgpool_ref(const PlainTensor& x, int window, int stride) {
  if (window != stride) {
    throw GeometryError("avgpool_ref: overlapping windows not supported");
  }
  if (x.height() % stride != 0 || x.width() % stride != 0) {
    throw GeometryError("avgpool_ref: stride must divide H and W");
  }
  const int Ho = x.height() / stride, Wo = x.width() / stride;
  PlainTensor y(x.channels(), Ho, Wo);
  const double inv = 1.0 / (static_cast<double>(window) * window);
  for (int c = 0; c < x.channels(); ++c) {
    for (int u = 0; u < Ho; ++u) {
      for (int v = 0; v < Wo; ++v) {
        double acc = 0.0;
        for (int a = 0; a < window; ++a) {
          for (int b = 0; b < window; ++b) {
            acc += x.at(c, u * stride + a, v * stride + b);
          }
        }
        y.at(c, u, v) = acc * inv;
      }
    }
  }
  return y;
}

PlainTensor upsample_ref(const PlainTensor& x, int scale) {
  PlainTensor y(x.channels(), x.height() * scale, x.width() * scale);
  for (int c = 0; c < x.channels(); ++c) {
    for (int u = 0; u < y.height(); ++u) {
      for (int v = 0; v < y.width(); ++v) {
        y.at(c, u, v) = x.at(c, u / scale, v / scale);
      }
    }
  }
  return y;
}

PlainTensor affine_ref(const PlainTensor& x, const AffineSpec& spec) {
  if (spec.scale.size() != static_cast<std::size_t>(x.channels()) ||
      spec.shift.size() != static_cast<std::size_t>(x.channels())) {
    throw GeometryError("affine_ref: per-channel parameter length mismatch");
  }
  PlainTensor y(x.channels(), x.height(), x.width());
  for (int c = 0; c < x.channels(); ++c) {
    for (int u = 0; u < x.height(); ++u) {
      for (int v = 0; v < x.width(); ++v) {
        y.at(c, u, v) = spec.scale[c] * x.at(c, u, v) + spec.shift[c];
      }
    }
  }
  return y;
}

PlainTensor polyact_ref(const PlainTensor& x,
                        std::span<const Monomials> coeffs) {
  if (coeffs.size() != static_cast<std::size_t>(x.channels())) {
    throw GeometryError("polyact_ref: one coefficient set per channel");
  }
  PlainTensor y(x.channels(), x.height(), x.width());
  for (int c = 0; c < x.channels(); ++c) {
    const Monomials& a = coeffs[c];
    for (int u = 0; u < x.height(); ++u) {
      for (int v = 0; v < x.width(); ++v) {
        const double t = x.at(c, u, v);
        y.at(c, u, v) = a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * a[4])));
      }
    }
  }
  return y;
}

double max_abs_diff(const PlainTensor& a, const PlainTensor& b) {
  if (a.channels() != b.channels() || a.height() != b.height() ||
      a.width() != b.width()) {
    throw GeometryError("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

}  // namespace gipcnn::oracle
