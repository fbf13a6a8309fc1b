#include "gipcnn/hops.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "gipcnn/errors.hpp"

namespace gipcnn {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

long floordiv(long a, long b) {
  // b > 0
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

long floormod(long a, long b) { return a - b * floordiv(a, b); }

long ceildiv(long a, long b) { return floordiv(a + b - 1, b); }

long norm_rot(long r, std::size_t slot_count) {
  const long n = static_cast<long>(slot_count);
  return ((r % n) + n) % n;
}

// Slots (r0 + i*rstep)*base + (c0 + j*cstep) for i in [0,rows), j in
// [0,cols), all set to value. Every mask an operator needs is one of
// these lattices.
struct LatticeMask {
  long r0 = 0, rstep = 1, rows = 0;
  long c0 = 0, cstep = 1, cols = 0;
  double value = 0.0;

  bool empty() const { return rows <= 0 || cols <= 0; }
};

PlainVector materialize(const HEContext& ctx, int base,
                        const LatticeMask& m) {
  std::vector<double> slots(ctx.slot_count(), 0.0);
  for (long i = 0; i < m.rows; ++i) {
    const long row = m.r0 + i * m.rstep;
    for (long j = 0; j < m.cols; ++j) {
      const long col = m.c0 + j * m.cstep;
      slots[static_cast<std::size_t>(row * base + col)] = m.value;
    }
  }
  return PlainVector{std::move(slots)};
}

// One rotate-mask-multiply term of an output ciphertext.
struct DirectContrib {
  int in_ct = 0;
  long rot = 0;  // raw slot offset, normalized at use
  LatticeMask mask;
};

// Direct schedules: out ct = sum of masked rotations of input cts.
struct DirectSchedule {
  int out_ct_count = 0;
  std::vector<std::vector<DirectContrib>> per_out;
};

// Multiplexed convolutions add a second stage: per output ciphertext,
// tap-rotated inputs are masked per input lane, summed per lane delta,
// and each partial is rotated onto its target lane. The partials carry
// zeros outside their lanes, so the lane rotation needs no re-mask and
// the whole operator stays at one level.
struct MuxGroup {
  int du = 0, dv = 0;  // lane delta in grid rows/cols
  std::vector<DirectContrib> contribs;
};
struct MuxSchedule {
  int out_ct_count = 0;
  std::vector<std::vector<MuxGroup>> per_out;
};

// ---- convolution geometry -------------------------------------------------

struct ConvGeom {
  int H = 0, Hout = 0, base = 0;
  int cin = 0, cout = 0;
  int k = 0, s = 1, p = 0;
  std::size_t slot_count = 0;
};

int conv_out_height(int H, int k, int s, int p) {
  return static_cast<int>(floordiv(H + 2L * p - k, s)) + 1;
}

template <class WeightFn>
DirectSchedule build_conv_interleaved(const ConvGeom& g, int gin, int gout,
                                      WeightFn&& w) {
  DirectSchedule sched;
  sched.out_ct_count = g.cout * gout * gout;
  sched.per_out.resize(static_cast<std::size_t>(sched.out_ct_count));
  for (int co = 0; co < g.cout; ++co) {
    for (int ay = 0; ay < gout; ++ay) {
      for (int ax = 0; ax < gout; ++ax) {
        const int out_ct = co * gout * gout + ay * gout + ax;
        auto& list = sched.per_out[static_cast<std::size_t>(out_ct)];
        for (int ci = 0; ci < g.cin; ++ci) {
          for (int a = 0; a < g.k; ++a) {
            const long ry = static_cast<long>(g.s) * ay + a - g.p;
            const long cy = floormod(ry, gin);
            const long ey = floordiv(ry, gin);
            if (ey <= -g.base || ey >= g.base) continue;
            for (int b = 0; b < g.k; ++b) {
              const double coeff = w(co, ci, a, b);
              if (coeff == 0.0) continue;
              const long rx = static_cast<long>(g.s) * ax + b - g.p;
              const long cx = floormod(rx, gin);
              const long ex = floordiv(rx, gin);
              if (ex <= -g.base || ex >= g.base) continue;
              const int in_ct = static_cast<int>(
                  static_cast<long>(ci) * gin * gin + cy * gin + cx);
              LatticeMask m;
              m.r0 = std::max(0L, -ey);
              m.rows = std::min<long>(g.base, g.base - ey) - m.r0;
              m.c0 = std::max(0L, -ex);
              m.cols = std::min<long>(g.base, g.base - ex) - m.c0;
              m.value = coeff;
              if (m.empty()) continue;
              list.push_back({in_ct, ey * g.base + ex, m});
            }
          }
        }
      }
    }
  }
  return sched;
}

template <class WeightFn>
MuxSchedule build_conv_multiplexed(const ConvGeom& g, int t_in, int t_out,
                                   WeightFn&& w) {
  MuxSchedule sched;
  const int lanes_in = t_in * t_in;
  const int lanes_out = t_out * t_out;
  sched.out_ct_count = (g.cout + lanes_out - 1) / lanes_out;
  sched.per_out.resize(static_cast<std::size_t>(sched.out_ct_count));
  for (int j = 0; j < sched.out_ct_count; ++j) {
    std::map<std::pair<int, int>, std::vector<DirectContrib>> groups;
    for (int mp = 0; mp < lanes_out; ++mp) {
      const int co = j * lanes_out + mp;
      if (co >= g.cout) break;
      const int up = mp / t_out, vp = mp % t_out;
      for (int ci = 0; ci < g.cin; ++ci) {
        const int in_ct = ci / lanes_in;
        const int m = ci % lanes_in;
        const int um = m / t_in, vm = m % t_in;
        const int du = um - up, dv = vm - vp;
        for (int a = 0; a < g.k; ++a) {
          const long ylo =
              std::max(0L, ceildiv(g.p - a, g.s));
          const long yhi = std::min<long>(
              g.Hout, ceildiv(g.H + g.p - a, g.s));
          if (yhi <= ylo) continue;
          for (int b = 0; b < g.k; ++b) {
            const double coeff = w(co, ci, a, b);
            if (coeff == 0.0) continue;
            const long xlo = std::max(0L, ceildiv(g.p - b, g.s));
            const long xhi = std::min<long>(
                g.Hout, ceildiv(g.H + g.p - b, g.s));
            if (xhi <= xlo) continue;
            // tap rotation in input-gap units; lane move made later
            const long rot = (static_cast<long>(a - g.p) * t_in) * g.base +
                             static_cast<long>(b - g.p) * t_in;
            LatticeMask mk;
            mk.r0 = ylo * t_out + um;
            mk.rstep = t_out;
            mk.rows = yhi - ylo;
            mk.c0 = xlo * t_out + vm;
            mk.cstep = t_out;
            mk.cols = xhi - xlo;
            mk.value = coeff;
            groups[{du, dv}].push_back({in_ct, rot, mk});
          }
        }
      }
    }
    auto& out_groups = sched.per_out[static_cast<std::size_t>(j)];
    for (auto& [delta, contribs] : groups) {
      out_groups.push_back(
          {delta.first, delta.second, std::move(contribs)});
    }
  }
  return sched;
}

// ---- deconvolution geometry ----------------------------------------------

struct DeconvGeom {
  int H = 0, Hout = 0, base = 0;
  int cin = 0, cout = 0;
  int k = 0, s = 2, p = 0;
  std::size_t slot_count = 0;
};

template <class WeightFn>
DirectSchedule build_deconv_interleaved(const DeconvGeom& g, int gin,
                                        int gout, WeightFn&& w) {
  DirectSchedule sched;
  sched.out_ct_count = g.cout * gout * gout;
  sched.per_out.resize(static_cast<std::size_t>(sched.out_ct_count));
  for (int co = 0; co < g.cout; ++co) {
    for (int ci = 0; ci < g.cin; ++ci) {
      for (int cy = 0; cy < gin; ++cy) {
        for (int a = 0; a < g.k; ++a) {
          const long ry = static_cast<long>(cy) * g.s + a - g.p;
          const long ayp = floormod(ry, gout);
          const long ey = floordiv(ry, gout);
          if (ey <= -g.base || ey >= g.base) continue;
          for (int cx = 0; cx < gin; ++cx) {
            for (int b = 0; b < g.k; ++b) {
              const double coeff = w(ci, co, a, b);
              if (coeff == 0.0) continue;
              const long rx = static_cast<long>(cx) * g.s + b - g.p;
              const long axp = floormod(rx, gout);
              const long ex = floordiv(rx, gout);
              if (ex <= -g.base || ex >= g.base) continue;
              const int out_ct = static_cast<int>(
                  static_cast<long>(co) * gout * gout + ayp * gout + axp);
              const int in_ct = ci * gin * gin + cy * gin + cx;
              LatticeMask m;
              m.r0 = std::max(0L, ey);
              m.rows = std::min<long>(g.base, g.base + ey) - m.r0;
              m.c0 = std::max(0L, ex);
              m.cols = std::min<long>(g.base, g.base + ex) - m.c0;
              m.value = coeff;
              if (m.empty()) continue;
              sched.per_out[static_cast<std::size_t>(out_ct)].push_back(
                  {in_ct, -(ey * g.base + ex), m});
            }
          }
        }
      }
    }
  }
  return sched;
}

template <class WeightFn>
DirectSchedule build_deconv_multiplexed(const DeconvGeom& g, int t_in,
                                        int t_out, WeightFn&& w) {
  DirectSchedule sched;
  const int lanes_in = t_in * t_in;
  const int lanes_out = t_out * t_out;
  sched.out_ct_count = (g.cout + lanes_out - 1) / lanes_out;
  sched.per_out.resize(static_cast<std::size_t>(sched.out_ct_count));
  for (int co = 0; co < g.cout; ++co) {
    const int out_ct = co / lanes_out;
    const int mp = co % lanes_out;
    const int up = mp / t_out, vp = mp % t_out;
    for (int ci = 0; ci < g.cin; ++ci) {
      const int in_ct = ci / lanes_in;
      const int m = ci % lanes_in;
      const int um = m / t_in, vm = m % t_in;
      for (int a = 0; a < g.k; ++a) {
        const long ylo = std::max(0L, ceildiv(g.p - a, g.s));
        const long yhi =
            std::min<long>(g.H, ceildiv(g.Hout + g.p - a, g.s));
        if (yhi <= ylo) continue;
        for (int b = 0; b < g.k; ++b) {
          const double coeff = w(ci, co, a, b);
          if (coeff == 0.0) continue;
          const long xlo = std::max(0L, ceildiv(g.p - b, g.s));
          const long xhi =
              std::min<long>(g.H, ceildiv(g.Hout + g.p - b, g.s));
          if (xhi <= xlo) continue;
          const long rot =
              -(((static_cast<long>(a - g.p)) * t_out + up - um) * g.base +
                (static_cast<long>(b - g.p)) * t_out + vp - vm);
          LatticeMask mk;
          mk.r0 = (g.s * ylo + a - g.p) * t_out + up;
          mk.rstep = static_cast<long>(g.s) * t_out;
          mk.rows = yhi - ylo;
          mk.c0 = (g.s * xlo + b - g.p) * t_out + vp;
          mk.cstep = static_cast<long>(g.s) * t_out;
          mk.cols = xhi - xlo;
          mk.value = coeff;
          sched.per_out[static_cast<std::size_t>(out_ct)].push_back(
              {in_ct, rot, mk});
        }
      }
    }
  }
  return sched;
}

// ---- schedule execution and counting --------------------------------------

class RotationCache {
 public:
  RotationCache(HEContext& ctx, const std::vector<SlotVector>& inputs)
      : ctx_(ctx), inputs_(inputs) {}

  const SlotVector& get(int in_ct, long rot) {
    const long r = norm_rot(rot, ctx_.slot_count());
    if (r == 0) return inputs_[static_cast<std::size_t>(in_ct)];
    auto key = std::make_pair(in_ct, r);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_
               .emplace(key, ctx_.rotate(
                                 inputs_[static_cast<std::size_t>(in_ct)], r))
               .first;
    }
    return it->second;
  }

 private:
  HEContext& ctx_;
  const std::vector<SlotVector>& inputs_;
  std::map<std::pair<int, long>, SlotVector> cache_;
};

std::vector<SlotVector> run_direct(HEContext& ctx, const GipLayout& out_layout,
                                   const DirectSchedule& sched,
                                   const std::vector<SlotVector>& inputs,
                                   std::span<const double> bias,
                                   int out_level) {
  RotationCache rots(ctx, inputs);
  std::vector<SlotVector> out;
  out.reserve(static_cast<std::size_t>(sched.out_ct_count));
  for (int o = 0; o < sched.out_ct_count; ++o) {
    std::optional<SlotVector> acc;
    for (const DirectContrib& c : sched.per_out[static_cast<std::size_t>(o)]) {
      const SlotVector& src = rots.get(c.in_ct, c.rot);
      PlainVector mask = materialize(ctx, out_layout.base_size, c.mask);
      SlotVector term = ctx.mul_plain(src, mask);
      acc = acc ? ctx.add(*acc, term) : std::move(term);
    }
    if (!acc) acc = ctx.zero(out_level);
    if (!bias.empty()) {
      acc = ctx.add_plain(*acc, channel_plain(ctx, out_layout, o, bias));
    }
    out.push_back(std::move(*acc));
  }
  return out;
}

CostCounters count_direct(std::size_t slot_count,
                          const DirectSchedule& sched, bool bias) {
  CostCounters c;
  std::set<std::pair<int, long>> rot_keys;
  for (const auto& list : sched.per_out) {
    for (const DirectContrib& d : list) {
      const long r = norm_rot(d.rot, slot_count);
      if (r != 0) rot_keys.insert({d.in_ct, r});
      c.pt_ct_mults += 1;
    }
    if (!list.empty()) c.adds += list.size() - 1;
    if (bias) c.adds += 1;
  }
  c.rotations = rot_keys.size();
  return c;
}

std::vector<SlotVector> run_mux(HEContext& ctx, const GipLayout& out_layout,
                                const MuxSchedule& sched,
                                const std::vector<SlotVector>& inputs,
                                std::span<const double> bias, int out_level) {
  RotationCache rots(ctx, inputs);
  std::vector<SlotVector> out;
  out.reserve(static_cast<std::size_t>(sched.out_ct_count));
  for (int o = 0; o < sched.out_ct_count; ++o) {
    std::optional<SlotVector> acc;
    for (const MuxGroup& grp : sched.per_out[static_cast<std::size_t>(o)]) {
      std::optional<SlotVector> part;
      for (const DirectContrib& c : grp.contribs) {
        const SlotVector& src = rots.get(c.in_ct, c.rot);
        PlainVector mask = materialize(ctx, out_layout.base_size, c.mask);
        SlotVector term = ctx.mul_plain(src, mask);
        part = part ? ctx.add(*part, term) : std::move(term);
      }
      if (!part) continue;
      if (grp.du != 0 || grp.dv != 0) {
        part = ctx.rotate(*part, static_cast<long>(grp.du) *
                                         out_layout.base_size +
                                     grp.dv);
      }
      acc = acc ? ctx.add(*acc, *part) : std::move(*part);
    }
    if (!acc) acc = ctx.zero(out_level);
    if (!bias.empty()) {
      acc = ctx.add_plain(*acc, channel_plain(ctx, out_layout, o, bias));
    }
    out.push_back(std::move(*acc));
  }
  return out;
}

CostCounters count_mux(std::size_t slot_count, const MuxSchedule& sched,
                       bool bias) {
  CostCounters c;
  std::set<std::pair<int, long>> rot_keys;
  for (const auto& groups : sched.per_out) {
    std::size_t n = 0;
    for (const MuxGroup& grp : groups) {
      for (const DirectContrib& d : grp.contribs) {
        const long r = norm_rot(d.rot, slot_count);
        if (r != 0) rot_keys.insert({d.in_ct, r});
      }
      n += grp.contribs.size();
      if (!grp.contribs.empty() && (grp.du != 0 || grp.dv != 0)) {
        c.rotations += 1;  // per-partial lane rotation, not cacheable
      }
    }
    c.pt_ct_mults += n;
    if (n > 0) c.adds += n - 1;
    if (bias) c.adds += 1;
  }
  c.rotations += rot_keys.size();
  return c;
}

// ---- parameter checks ------------------------------------------------------

void check_packed(const PackedTensor& x) {
  if (static_cast<int>(x.cts.size()) != x.layout.ct_count()) {
    throw GeometryError("packed tensor inconsistent with its layout");
  }
}

ConvGeom conv_geom(const GipLayout& in, const ConvSpec& spec,
                   std::size_t slot_count, bool require_odd = true) {
  spec.validate();
  if (require_odd && spec.kernel % 2 == 0) {
    throw GeometryError("conv kernel must be odd");
  }
  if (spec.in_channels != in.channels) {
    throw GeometryError("conv input channels mismatch: spec " +
                        std::to_string(spec.in_channels) + " vs layout " +
                        std::to_string(in.channels));
  }
  if (spec.stride > in.height) {
    throw GeometryError("conv stride exceeds feature map size");
  }
  const PackFactor gin = in.factor();
  const PackFactor gout = propagate_factor(gin, OpShape::downsample,
                                           spec.stride);
  if (!relayout_boundary_check(gin, gout)) {
    throw GeometryError(
        "size-barrier misuse: stride " + std::to_string(spec.stride) +
        " from factor " + gin.str() +
        " crosses g=1; plan it as cascaded power-of-two steps");
  }
  ConvGeom g;
  g.H = in.height;
  g.Hout = conv_out_height(in.height, spec.kernel, spec.stride, spec.pad());
  if (g.Hout * spec.stride != in.height) {
    throw GeometryError("conv padding does not preserve H/s output size");
  }
  g.base = in.base_size;
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  g.k = spec.kernel;
  g.s = spec.stride;
  g.p = spec.pad();
  g.slot_count = slot_count;
  return g;
}

DeconvGeom deconv_geom(const GipLayout& in, const DeconvSpec& spec,
                       std::size_t slot_count) {
  spec.validate();
  if (spec.in_channels != in.channels) {
    throw GeometryError("deconv input channels mismatch");
  }
  const PackFactor gin = in.factor();
  const PackFactor gout = propagate_factor(gin, OpShape::upsample, spec.stride);
  if (!relayout_boundary_check(gin, gout)) {
    throw GeometryError("deconvolution across the g=1 boundary is not "
                        "supported; split the upsampling");
  }
  DeconvGeom g;
  g.H = in.height;
  g.Hout = in.height * spec.stride;
  g.base = in.base_size;
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  g.k = spec.kernel;
  g.s = spec.stride;
  g.p = spec.pad();
  g.slot_count = slot_count;
  return g;
}

ConvSpec diag_conv(int channels, int kernel, int stride, int padding,
                   double value) {
  ConvSpec s;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.in_channels = channels;
  s.out_channels = channels;
  s.weights.assign(static_cast<std::size_t>(channels) * channels * kernel *
                       kernel,
                   0.0);
  for (int c = 0; c < channels; ++c) {
    for (int a = 0; a < kernel; ++a) {
      for (int b = 0; b < kernel; ++b) {
        s.weights[((static_cast<std::size_t>(c) * channels + c) * kernel + a) *
                      kernel +
                  b] = value;
      }
    }
  }
  return s;
}

DeconvSpec diag_deconv(int channels, int scale) {
  DeconvSpec s;
  s.kernel = scale;
  s.stride = scale;
  s.in_channels = channels;
  s.out_channels = channels;
  s.weights.assign(
      static_cast<std::size_t>(channels) * channels * scale * scale, 0.0);
  for (int c = 0; c < channels; ++c) {
    for (int a = 0; a < scale; ++a) {
      for (int b = 0; b < scale; ++b) {
        s.weights[((static_cast<std::size_t>(c) * channels + c) * scale + a) *
                      scale +
                  b] = 1.0;
      }
    }
  }
  return s;
}

}  // namespace

void ConvSpec::validate() const {
  if (kernel < 1) throw GeometryError("conv kernel must be positive");
  if (!is_pow2(stride)) throw GeometryError("conv stride must be a power of two");
  if (in_channels <= 0 || out_channels <= 0) {
    throw GeometryError("conv channel counts must be positive");
  }
  const std::size_t want = static_cast<std::size_t>(out_channels) *
                           in_channels * kernel * kernel;
  if (weights.size() != want) {
    throw GeometryError("conv weights size mismatch: got " +
                        std::to_string(weights.size()) + ", want " +
                        std::to_string(want));
  }
  if (!bias.empty() &&
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw GeometryError("conv bias size mismatch");
  }
}

void DeconvSpec::validate() const {
  if (!is_pow2(stride) || stride < 2) {
    throw GeometryError("deconv stride must be a power of two >= 2");
  }
  if (kernel != stride && kernel != 2 * stride - 1) {
    throw GeometryError(
        "unsupported deconv geometry: kernel must be stride or 2*stride-1");
  }
  if (in_channels <= 0 || out_channels <= 0) {
    throw GeometryError("deconv channel counts must be positive");
  }
  const std::size_t want = static_cast<std::size_t>(in_channels) *
                           out_channels * kernel * kernel;
  if (weights.size() != want) {
    throw GeometryError("deconv weights size mismatch");
  }
  if (!bias.empty() &&
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw GeometryError("deconv bias size mismatch");
  }
}

GipLayout conv2d_output_layout(const GipLayout& in, const ConvSpec& spec,
                               std::size_t slot_count) {
  const ConvGeom g = conv_geom(in, spec, slot_count);
  return GipLayout::make(spec.out_channels, g.Hout, g.Hout, in.base_size,
                         slot_count);
}

GipLayout deconv2d_output_layout(const GipLayout& in, const DeconvSpec& spec,
                                 std::size_t slot_count) {
  const DeconvGeom g = deconv_geom(in, spec, slot_count);
  return GipLayout::make(spec.out_channels, g.Hout, g.Hout, in.base_size,
                         slot_count);
}

GipLayout avgpool_output_layout(const GipLayout& in, int window, int stride,
                                std::size_t slot_count) {
  if (window != stride) {
    throw GeometryError("overlapping average pooling is not supported "
                        "(window must equal stride)");
  }
  if (!is_pow2(stride) || stride > in.height) {
    throw GeometryError("avgpool stride must be a power of two <= H");
  }
  return GipLayout::make(in.channels, in.height / stride, in.height / stride,
                         in.base_size, slot_count);
}

GipLayout upsample_output_layout(const GipLayout& in, int scale,
                                 std::size_t slot_count) {
  if (!is_pow2(scale)) throw GeometryError("upsample scale must be a power of two");
  return GipLayout::make(in.channels, in.height * scale, in.height * scale,
                         in.base_size, slot_count);
}

PlainVector channel_plain(const HEContext& ctx, const GipLayout& layout,
                          int ct_index, std::span<const double> per_channel) {
  if (per_channel.size() != static_cast<std::size_t>(layout.channels)) {
    throw GeometryError("per-channel vector length mismatch");
  }
  std::vector<double> slots(ctx.slot_count(), 0.0);
  const PackFactor g = layout.factor();
  const int base = layout.base_size;
  if (g.interleaved()) {
    const int gi = g.numerator();
    const int c = ct_index / (gi * gi);
    const double v = per_channel[static_cast<std::size_t>(c)];
    for (long i = 0; i < static_cast<long>(base) * base; ++i) {
      slots[static_cast<std::size_t>(i)] = v;
    }
  } else {
    const int t = g.denominator();
    for (int m = 0; m < t * t; ++m) {
      const int c = ct_index * t * t + m;
      if (c >= layout.channels) break;
      const double v = per_channel[static_cast<std::size_t>(c)];
      const int um = m / t, vm = m % t;
      for (int y = 0; y < layout.height; ++y) {
        for (int x = 0; x < layout.width; ++x) {
          const long slot =
              static_cast<long>(y * t + um) * base + (x * t + vm);
          slots[static_cast<std::size_t>(slot)] = v;
        }
      }
    }
  }
  return PlainVector{std::move(slots)};
}

namespace {

PackedTensor conv2d_impl(HEContext& ctx, const PackedTensor& x,
                         const ConvSpec& spec, bool require_odd) {
  check_packed(x);
  const ConvGeom g = conv_geom(x.layout, spec, ctx.slot_count(), require_odd);
  const int in_level = x.level();
  if (in_level < 1) {
    throw LevelError("conv2d: level exhausted, bootstrap required");
  }
  const GipLayout out_layout = GipLayout::make(
      spec.out_channels, g.Hout, g.Hout, x.layout.base_size, ctx.slot_count());
  const auto weight = [&spec](int co, int ci, int a, int b) {
    return spec.weight(co, ci, a, b);
  };

  PackedTensor out;
  out.layout = out_layout;
  const PackFactor gout = out_layout.factor();
  if (gout.interleaved()) {
    const DirectSchedule sched = build_conv_interleaved(
        g, x.layout.factor().numerator(), gout.numerator(), weight);
    out.cts = run_direct(ctx, out_layout, sched, x.cts, spec.bias,
                         in_level - 1);
  } else {
    const MuxSchedule sched = build_conv_multiplexed(
        g, x.layout.factor().denominator(), gout.denominator(), weight);
    out.cts =
        run_mux(ctx, out_layout, sched, x.cts, spec.bias, in_level - 1);
  }
  return out;
}

OpCost estimate_conv2d_impl(std::size_t slot_count, const GipLayout& in,
                            const ConvSpec& spec, bool require_odd) {
  const ConvGeom g = conv_geom(in, spec, slot_count, require_odd);
  const GipLayout out_layout = GipLayout::make(spec.out_channels, g.Hout,
                                               g.Hout, in.base_size, slot_count);
  const auto weight = [&spec](int co, int ci, int a, int b) {
    return spec.weight(co, ci, a, b);
  };
  const bool bias = !spec.bias.empty();
  OpCost cost;
  cost.depth = 1;
  const PackFactor gout = out_layout.factor();
  if (gout.interleaved()) {
    cost.counters = count_direct(
        slot_count,
        build_conv_interleaved(g, in.factor().numerator(), gout.numerator(),
                               weight),
        bias);
  } else {
    cost.counters = count_mux(
        slot_count,
        build_conv_multiplexed(g, in.factor().denominator(),
                               gout.denominator(), weight),
        bias);
  }
  return cost;
}

}  // namespace

PackedTensor conv2d(HEContext& ctx, const PackedTensor& x,
                    const ConvSpec& spec) {
  return conv2d_impl(ctx, x, spec, true);
}

PackedTensor deconv2d(HEContext& ctx, const PackedTensor& x,
                      const DeconvSpec& spec) {
  check_packed(x);
  const DeconvGeom g = deconv_geom(x.layout, spec, ctx.slot_count());
  const int in_level = x.level();
  if (in_level < 1) {
    throw LevelError("deconv2d: level exhausted, bootstrap required");
  }
  const GipLayout out_layout = GipLayout::make(
      spec.out_channels, g.Hout, g.Hout, x.layout.base_size, ctx.slot_count());
  const auto weight = [&spec](int ci, int co, int a, int b) {
    return spec.weight(ci, co, a, b);
  };

  const PackFactor gin = x.layout.factor();
  const PackFactor gout = out_layout.factor();
  DirectSchedule sched =
      gin.interleaved()
          ? build_deconv_interleaved(g, gin.numerator(), gout.numerator(),
                                     weight)
          : build_deconv_multiplexed(g, gin.denominator(), gout.denominator(),
                                     weight);
  PackedTensor out;
  out.layout = out_layout;
  out.cts = run_direct(ctx, out_layout, sched, x.cts, spec.bias, in_level - 1);
  return out;
}

PackedTensor avgpool(HEContext& ctx, const PackedTensor& x, int window,
                     int stride) {
  check_packed(x);
  avgpool_output_layout(x.layout, window, stride, ctx.slot_count());
  // cascade through g=1 when a single step would jump families
  const PackFactor gin = x.layout.factor();
  const PackFactor gout = propagate_factor(gin, OpShape::downsample, stride);
  if (!relayout_boundary_check(gin, gout)) {
    const int first = gin.numerator();  // reach exactly g=1
    PackedTensor mid = avgpool(ctx, x, first, first);
    return avgpool(ctx, mid, stride / first, stride / first);
  }
  const double inv = 1.0 / (static_cast<double>(window) * window);
  return conv2d_impl(ctx, x, diag_conv(x.layout.channels, window, stride, 0, inv),
                     false);
}

PackedTensor upsample_nearest(HEContext& ctx, const PackedTensor& x,
                              int scale) {
  check_packed(x);
  upsample_output_layout(x.layout, scale, ctx.slot_count());
  if (scale == 1) return x;
  const PackFactor gin = x.layout.factor();
  if (gin.interleaved()) {
    // every new sub-channel class is a copy of its source ciphertext
    const int gi = gin.numerator();
    const int go = gi * scale;
    const GipLayout out_layout =
        GipLayout::make(x.layout.channels, x.layout.height * scale,
                        x.layout.height * scale, x.layout.base_size,
                        ctx.slot_count());
    PackedTensor out;
    out.layout = out_layout;
    out.cts.reserve(static_cast<std::size_t>(out_layout.ct_count()));
    for (int c = 0; c < x.layout.channels; ++c) {
      for (int ay = 0; ay < go; ++ay) {
        for (int ax = 0; ax < go; ++ax) {
          const int src = c * gi * gi + (ay / scale) * gi + (ax / scale);
          out.cts.push_back(x.cts[static_cast<std::size_t>(src)]);
        }
      }
    }
    return out;
  }
  const int t = gin.denominator();
  if (scale <= t) {
    // stays multiplexed: block-scatter deconvolution with unit weights
    return deconv2d(ctx, x, diag_deconv(x.layout.channels, scale));
  }
  // crosses g=1: lift to g=1 first, then replicate ciphertexts
  PackedTensor mid = deconv2d(ctx, x, diag_deconv(x.layout.channels, t));
  return upsample_nearest(ctx, mid, scale / t);
}

PackedTensor batchnorm_affine(HEContext& ctx, const PackedTensor& x,
                              const AffineSpec& spec) {
  check_packed(x);
  const std::size_t C = static_cast<std::size_t>(x.layout.channels);
  if (spec.scale.size() != C || spec.shift.size() != C) {
    throw GeometryError("affine spec length must equal channel count");
  }
  if (x.level() < 1) {
    throw LevelError("batchnorm: level exhausted, bootstrap required");
  }
  PackedTensor out;
  out.layout = x.layout;
  out.cts.reserve(x.cts.size());
  for (int i = 0; i < static_cast<int>(x.cts.size()); ++i) {
    PlainVector s = channel_plain(ctx, x.layout, i, spec.scale);
    PlainVector b = channel_plain(ctx, x.layout, i, spec.shift);
    out.cts.push_back(
        ctx.add_plain(ctx.mul_plain(x.cts[static_cast<std::size_t>(i)], s), b));
  }
  return out;
}

PackedTensor polyact_eval(HEContext& ctx, const PackedTensor& x,
                          std::span<const Monomials> coeffs) {
  check_packed(x);
  if (coeffs.size() != static_cast<std::size_t>(x.layout.channels)) {
    throw GeometryError("polyact needs one coefficient set per channel");
  }
  if (x.level() < 3) {
    throw LevelError("polyact: needs 3 levels, bootstrap required");
  }
  std::array<std::vector<double>, 5> per_channel;
  for (int j = 0; j < 5; ++j) {
    per_channel[static_cast<std::size_t>(j)].resize(coeffs.size());
    for (std::size_t c = 0; c < coeffs.size(); ++c) {
      per_channel[static_cast<std::size_t>(j)][c] =
          coeffs[c][static_cast<std::size_t>(j)];
    }
  }
  PackedTensor out;
  out.layout = x.layout;
  out.cts.reserve(x.cts.size());
  for (int i = 0; i < static_cast<int>(x.cts.size()); ++i) {
    std::array<PlainVector, 5> A;
    for (int j = 0; j < 5; ++j) {
      A[static_cast<std::size_t>(j)] = channel_plain(
          ctx, x.layout, i, per_channel[static_cast<std::size_t>(j)]);
    }
    const SlotVector& v = x.cts[static_cast<std::size_t>(i)];
    // (a4 v^2 + a3 v + a2) * v^2 + (a1 v + a0); 2 ct-ct, 3 pt-ct, depth 3
    SlotVector v2 = ctx.mul(v, v);
    SlotVector inner = ctx.add(ctx.mul_plain(v2, A[4]), ctx.mul_plain(v, A[3]));
    inner = ctx.add_plain(inner, A[2]);
    SlotVector quartic = ctx.mul(inner, v2);
    SlotVector linear = ctx.add_plain(ctx.mul_plain(v, A[1]), A[0]);
    out.cts.push_back(ctx.add(quartic, linear));
  }
  return out;
}

OpCost estimate_conv2d(std::size_t slot_count, const GipLayout& in,
                       const ConvSpec& spec) {
  return estimate_conv2d_impl(slot_count, in, spec, true);
}

OpCost estimate_deconv2d(std::size_t slot_count, const GipLayout& in,
                         const DeconvSpec& spec) {
  const DeconvGeom g = deconv_geom(in, spec, slot_count);
  const GipLayout out_layout = GipLayout::make(spec.out_channels, g.Hout,
                                               g.Hout, in.base_size, slot_count);
  const auto weight = [&spec](int ci, int co, int a, int b) {
    return spec.weight(ci, co, a, b);
  };
  const PackFactor gin = in.factor();
  const PackFactor gout = out_layout.factor();
  const DirectSchedule sched =
      gin.interleaved()
          ? build_deconv_interleaved(g, gin.numerator(), gout.numerator(),
                                     weight)
          : build_deconv_multiplexed(g, gin.denominator(), gout.denominator(),
                                     weight);
  return {count_direct(slot_count, sched, !spec.bias.empty()), 1};
}

OpCost estimate_avgpool(std::size_t slot_count, const GipLayout& in,
                        int window, int stride) {
  avgpool_output_layout(in, window, stride, slot_count);
  const PackFactor gin = in.factor();
  const PackFactor gout = propagate_factor(gin, OpShape::downsample, stride);
  if (!relayout_boundary_check(gin, gout)) {
    const int first = gin.numerator();
    OpCost a = estimate_avgpool(slot_count, in, first, first);
    const GipLayout mid = avgpool_output_layout(in, first, first, slot_count);
    OpCost b =
        estimate_avgpool(slot_count, mid, stride / first, stride / first);
    return {a.counters + b.counters, a.depth + b.depth};
  }
  const double inv = 1.0 / (static_cast<double>(window) * window);
  return estimate_conv2d_impl(slot_count, in,
                              diag_conv(in.channels, window, stride, 0, inv),
                              false);
}

OpCost estimate_upsample(std::size_t slot_count, const GipLayout& in,
                         int scale) {
  upsample_output_layout(in, scale, slot_count);
  if (scale == 1) return {CostCounters{}, 0};
  const PackFactor gin = in.factor();
  if (gin.interleaved()) return {CostCounters{}, 0};
  const int t = gin.denominator();
  if (scale <= t) {
    return estimate_deconv2d(slot_count, in, diag_deconv(in.channels, scale));
  }
  OpCost a = estimate_deconv2d(slot_count, in, diag_deconv(in.channels, t));
  // remaining factor is interleaved replication: free
  return {a.counters, a.depth};
}

OpCost estimate_batchnorm(const GipLayout& in) {
  CostCounters c;
  c.pt_ct_mults = static_cast<std::uint64_t>(in.ct_count());
  c.adds = static_cast<std::uint64_t>(in.ct_count());
  return {c, 1};
}

OpCost estimate_polyact(const GipLayout& in) {
  CostCounters c;
  const auto n = static_cast<std::uint64_t>(in.ct_count());
  c.ct_ct_mults = 2 * n;
  c.pt_ct_mults = 3 * n;
  c.adds = 4 * n;
  return {c, 3};
}

}  // namespace gipcnn
