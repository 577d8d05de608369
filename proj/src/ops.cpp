// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "percept/parallel.hpp"

namespace percept {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

/// Geometry of one convolution: an input plane of in_h x in_w, a KxK window
/// moved with `stride`, and `pad` samples of border on each side.
struct ConvGeometry {
  std::size_t channels = 0;
  std::size_t in_h = 0, in_w = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  Padding padding = Padding::zero;
  std::size_t out_h = 0, out_w = 0;
  // row_map[kh * out_h + oh] is the source row, or -1 for a zero sample.
  std::vector<long> row_map;
  std::vector<long> col_map;
  // Output columns [col_lo[kw], col_hi[kw]) read unpadded input columns.
  std::vector<std::size_t> col_lo, col_hi;

  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t out_plane() const { return out_h * out_w; }
};

long source_index(long i, long n, Padding padding) {
  if (i >= 0 && i < n) return i;
  if (padding == Padding::zero) return -1;
  // Whole-sample mirror: -1 -> 1, n -> n - 2.
  const long period = 2 * (n - 1);
  if (period == 0) return 0;
  long m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

ConvGeometry make_geometry(std::size_t channels, std::size_t in_h, std::size_t in_w,
                           std::size_t kernel, std::size_t stride, std::size_t pad,
                           Padding padding) {
  ConvGeometry g;
  g.channels = channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel = kernel;
  g.stride = stride;
  g.pad = pad;
  g.padding = padding;
  g.out_h = (in_h + 2 * pad - kernel) / stride + 1;
  g.out_w = (in_w + 2 * pad - kernel) / stride + 1;
  g.row_map.resize(kernel * g.out_h);
  g.col_map.resize(kernel * g.out_w);
  for (std::size_t k = 0; k < kernel; ++k) {
    for (std::size_t o = 0; o < g.out_h; ++o) {
      const long i = static_cast<long>(o * stride + k) - static_cast<long>(pad);
      g.row_map[k * g.out_h + o] = source_index(i, static_cast<long>(in_h), padding);
    }
    for (std::size_t o = 0; o < g.out_w; ++o) {
      const long i = static_cast<long>(o * stride + k) - static_cast<long>(pad);
      g.col_map[k * g.out_w + o] = source_index(i, static_cast<long>(in_w), padding);
    }
  }
  g.col_lo.resize(kernel);
  g.col_hi.resize(kernel);
  for (std::size_t k = 0; k < kernel; ++k) {
    std::size_t lo = 0;
    while (lo < g.out_w && lo * stride + k < pad) ++lo;
    std::size_t hi = lo;
    while (hi < g.out_w && hi * stride + k < pad + in_w) ++hi;
    g.col_lo[k] = lo;
    g.col_hi[k] = hi;
  }
  return g;
}

// Output rows are processed in tiles so the column buffer stays cache-sized.
constexpr std::size_t kTileElems = 1 << 17;

std::size_t tile_rows(const ConvGeometry& g) {
  return std::clamp<std::size_t>(kTileElems / (g.patch() * g.out_w), 1, g.out_h);
}

// Fills cols (patch() rows, (oh1 - oh0) * out_w columns) for output rows
// [oh0, oh1).
void im2col(const ConvGeometry& g, const double* x, double* cols, std::size_t oh0,
            std::size_t oh1) {
  const std::size_t K = g.kernel;
  const std::size_t span = (oh1 - oh0) * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = x + c * g.in_h * g.in_w;
    for (std::size_t kh = 0; kh < K; ++kh) {
      for (std::size_t kw = 0; kw < K; ++kw) {
        double* row = cols + ((c * K + kh) * K + kw) * span;
        const long* cmap = &g.col_map[kw * g.out_w];
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const long ih = g.row_map[kh * g.out_h + oh];
          double* dst = row + (oh - oh0) * g.out_w;
          if (ih < 0) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.in_w;
          const std::size_t lo = g.col_lo[kw], hi = g.col_hi[kw];
          for (std::size_t ow = 0; ow < lo; ++ow) dst[ow] = cmap[ow] < 0 ? 0.0 : src[cmap[ow]];
          if (hi > lo) {
            const double* s0 = src + (lo * g.stride + kw - g.pad);
            if (g.stride == 1) {
              std::copy(s0, s0 + (hi - lo), dst + lo);
            } else {
              for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = s0[(ow - lo) * g.stride];
            }
          }
          for (std::size_t ow = hi; ow < g.out_w; ++ow) dst[ow] = cmap[ow] < 0 ? 0.0 : src[cmap[ow]];
        }
      }
    }
  }
}

// Adjoint of im2col over the same row range: scatters cols onto x
// (accumulating).
void col2im(const ConvGeometry& g, const double* cols, double* x, std::size_t oh0,
            std::size_t oh1) {
  const std::size_t K = g.kernel;
  const std::size_t span = (oh1 - oh0) * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = x + c * g.in_h * g.in_w;
    for (std::size_t kh = 0; kh < K; ++kh) {
      for (std::size_t kw = 0; kw < K; ++kw) {
        const double* row = cols + ((c * K + kh) * K + kw) * span;
        const long* cmap = &g.col_map[kw * g.out_w];
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const long ih = g.row_map[kh * g.out_h + oh];
          if (ih < 0) continue;
          const double* src = row + (oh - oh0) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
          const std::size_t lo = g.col_lo[kw], hi = g.col_hi[kw];
          for (std::size_t ow = 0; ow < lo; ++ow) {
            if (cmap[ow] >= 0) dst[cmap[ow]] += src[ow];
          }
          if (hi > lo) {
            double* d0 = dst + (lo * g.stride + kw - g.pad);
            for (std::size_t ow = lo; ow < hi; ++ow) d0[(ow - lo) * g.stride] += src[ow];
          }
          for (std::size_t ow = hi; ow < g.out_w; ++ow) {
            if (cmap[ow] >= 0) dst[cmap[ow]] += src[ow];
          }
        }
      }
    }
  }
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw ShapeError(what + " must have rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

// Sums per-sample partial results in sample order so the total does not
// depend on how samples were distributed over threads.
void accumulate_in_order(const std::vector<Tensor>& parts, Tensor& total) {
  for (const Tensor& p : parts) total += p;
}

void add_bias(Tensor& out, const Tensor& bias) {
  const std::size_t N = out.dim(0), C = out.dim(1), plane = out.dim(2) * out.dim(3);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data().data() + (n * C + c) * plane;
      const double b = bias[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
}

void bias_grad(const Tensor& grad_out, Tensor& slot) {
  const std::size_t N = grad_out.dim(0), C = grad_out.dim(1),
                    plane = grad_out.dim(2) * grad_out.dim(3);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* p = grad_out.data().data() + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
    }
    slot[c] += s;
  }
}

void check_bias(const Var& bias, std::size_t channels, const std::string& op) {
  if (!bias.valid()) return;
  if (bias.shape() != Shape{channels}) {
    throw ShapeError(op + ": bias shape " + to_string(bias.shape()) +
                     " does not match output channels " + std::to_string(channels));
  }
}

template <typename F>
Var unary(const Var& x, F&& forward_and_derivative) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  Tensor deriv(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, dy] = forward_and_derivative(in[i]);
    out[i] = y;
    deriv[i] = dy;
  }
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), {x},
                         [xid, deriv = std::move(deriv)](Tape& tape, const Tensor& g) {
                           Tensor& slot = tape.grad_slot(xid);
                           for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * deriv[i];
                         });
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts) {
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d kernel");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C) {
    throw ShapeError("conv2d: input channel count " + std::to_string(C) +
                     " does not match kernel input channels " + std::to_string(w.dim(1)));
  }
  if (w.dim(3) != K || K % 2 == 0) {
    throw ShapeError("conv2d: kernel spatial dims must be square and odd, got " +
                     to_string(w.shape()));
  }
  if (opts.stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (opts.padding == Padding::reflect && (opts.pad >= H || opts.pad >= W)) {
    throw ShapeError("conv2d: reflect padding " + std::to_string(opts.pad) +
                     " must be smaller than input height " + std::to_string(H) +
                     " and width " + std::to_string(W));
  }
  if (H + 2 * opts.pad < K) {
    throw ShapeError("conv2d: padded input height " + std::to_string(H + 2 * opts.pad) +
                     " is smaller than kernel size " + std::to_string(K));
  }
  if (W + 2 * opts.pad < K) {
    throw ShapeError("conv2d: padded input width " + std::to_string(W + 2 * opts.pad) +
                     " is smaller than kernel size " + std::to_string(K));
  }
  check_bias(bias, O, "conv2d");

  auto geom = std::make_shared<ConvGeometry>(
      make_geometry(C, H, W, K, opts.stride, opts.pad, opts.padding));
  const std::size_t patch = geom->patch(), plane = geom->out_plane();
  Tensor out(Shape{N, O, geom->out_h, geom->out_w});

  const std::size_t rows = tile_rows(*geom), ow = geom->out_w;
  parallel_for(N, [&](std::size_t n) {
    std::vector<double> cols(patch * rows * ow);
    ConstMapMat wm(w.data().data(), O, patch);
    MapMat om(out.data().data() + n * O * plane, O, plane);
    for (std::size_t r0 = 0; r0 < geom->out_h; r0 += rows) {
      const std::size_t r1 = std::min(r0 + rows, geom->out_h), len = (r1 - r0) * ow;
      im2col(*geom, x.data().data() + n * C * H * W, cols.data(), r0, r1);
      ConstMapMat cm(cols.data(), patch, len);
      om.middleCols(r0 * ow, len).noalias() = wm * cm;
    }
  });
  if (bias.valid()) add_bias(out, bias.value());

  std::vector<Var> inputs{input, kernel};
  if (bias.valid()) inputs.push_back(bias);
  const std::size_t xid = input.id(), wid = kernel.id();
  const std::size_t bid = bias.valid() ? bias.id() : 0;
  const bool has_bias = bias.valid();
  return input.tape().record(
      std::move(out), std::move(inputs),
      [=](Tape& tape, const Tensor& g) {
        const Tensor& xv = tape.value(xid);
        const Tensor& wv = tape.value(wid);
        const bool need_x = tape.requires_grad(xid), need_w = tape.requires_grad(wid);
        std::vector<Tensor> dw_parts(need_w ? N : 0);
        Tensor* dx = need_x ? &tape.grad_slot(xid) : nullptr;
        parallel_for(N, [&](std::size_t n) {
          ConstMapMat gm(g.data().data() + n * O * plane, O, plane);
          ConstMapMat wm(wv.data().data(), O, patch);
          std::vector<double> cols(patch * rows * ow);
          if (need_w) dw_parts[n] = Tensor(wv.shape());
          for (std::size_t r0 = 0; r0 < geom->out_h; r0 += rows) {
            const std::size_t r1 = std::min(r0 + rows, geom->out_h), len = (r1 - r0) * ow;
            if (need_w) {
              im2col(*geom, xv.data().data() + n * C * H * W, cols.data(), r0, r1);
              ConstMapMat cm(cols.data(), patch, len);
              MapMat dwm(dw_parts[n].data().data(), O, patch);
              dwm.noalias() += gm.middleCols(r0 * ow, len) * cm.transpose();
            }
            if (dx) {
              MapMat dcols(cols.data(), patch, len);
              dcols.noalias() = wm.transpose() * gm.middleCols(r0 * ow, len);
              col2im(*geom, cols.data(), dx->data().data() + n * C * H * W, r0, r1);
            }
          }
        });
        if (need_w) accumulate_in_order(dw_parts, tape.grad_slot(wid));
        if (has_bias && tape.requires_grad(bid)) bias_grad(g, tape.grad_slot(bid));
      });
}

Var conv2d_transpose(const Var& input, const Var& kernel, const Var& bias,
                     std::size_t up_factor) {
  if (up_factor != 2) {
    throw ShapeError("conv2d_transpose: only up_factor 2 is supported, got " +
                     std::to_string(up_factor));
  }
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  require_rank(x, 4, "conv2d_transpose input");
  require_rank(w, 4, "conv2d_transpose kernel");
  const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = w.dim(1), K = w.dim(2);
  if (w.dim(0) != Cin) {
    throw ShapeError("conv2d_transpose: input channel count " + std::to_string(Cin) +
                     " does not match kernel input channels " + std::to_string(w.dim(0)));
  }
  if (w.dim(3) != K || K % 2 == 0) {
    throw ShapeError("conv2d_transpose: kernel spatial dims must be square and odd, got " +
                     to_string(w.shape()));
  }
  check_bias(bias, Cout, "conv2d_transpose");

  // Geometry of the stride-2 convolution this operator is the adjoint of.
  auto geom = std::make_shared<ConvGeometry>(
      make_geometry(Cout, 2 * H, 2 * W, K, 2, K / 2, Padding::zero));
  const std::size_t patch = geom->patch(), plane = H * W;
  const std::size_t out_plane = 4 * H * W;
  Tensor out(Shape{N, Cout, 2 * H, 2 * W});

  const std::size_t rows = tile_rows(*geom);
  parallel_for(N, [&](std::size_t n) {
    std::vector<double> cols(patch * rows * W);
    ConstMapMat wm(w.data().data(), Cin, patch);
    ConstMapMat xm(x.data().data() + n * Cin * plane, Cin, plane);
    for (std::size_t r0 = 0; r0 < H; r0 += rows) {
      const std::size_t r1 = std::min(r0 + rows, H), len = (r1 - r0) * W;
      MapMat cm(cols.data(), patch, len);
      cm.noalias() = wm.transpose() * xm.middleCols(r0 * W, len);
      col2im(*geom, cols.data(), out.data().data() + n * Cout * out_plane, r0, r1);
    }
  });
  if (bias.valid()) add_bias(out, bias.value());

  std::vector<Var> inputs{input, kernel};
  if (bias.valid()) inputs.push_back(bias);
  const std::size_t xid = input.id(), wid = kernel.id();
  const std::size_t bid = bias.valid() ? bias.id() : 0;
  const bool has_bias = bias.valid();
  return input.tape().record(
      std::move(out), std::move(inputs),
      [=](Tape& tape, const Tensor& g) {
        const Tensor& xv = tape.value(xid);
        const Tensor& wv = tape.value(wid);
        const bool need_x = tape.requires_grad(xid), need_w = tape.requires_grad(wid);
        std::vector<Tensor> dw_parts(need_w ? N : 0);
        Tensor* dx = need_x ? &tape.grad_slot(xid) : nullptr;
        parallel_for(N, [&](std::size_t n) {
          std::vector<double> cols(patch * rows * W);
          if (need_w) dw_parts[n] = Tensor(wv.shape());
          for (std::size_t r0 = 0; r0 < H; r0 += rows) {
            const std::size_t r1 = std::min(r0 + rows, H), len = (r1 - r0) * W;
            im2col(*geom, g.data().data() + n * Cout * out_plane, cols.data(), r0, r1);
            ConstMapMat cm(cols.data(), patch, len);
            if (dx) {
              ConstMapMat wm(wv.data().data(), Cin, patch);
              MapMat dxm(dx->data().data() + n * Cin * plane, Cin, plane);
              dxm.middleCols(r0 * W, len).noalias() += wm * cm;
            }
            if (need_w) {
              ConstMapMat xm(xv.data().data() + n * Cin * plane, Cin, plane);
              MapMat dwm(dw_parts[n].data().data(), Cin, patch);
              dwm.noalias() += xm.middleCols(r0 * W, len) * cm.transpose();
            }
          }
        });
        if (need_w) accumulate_in_order(dw_parts, tape.grad_slot(wid));
        if (has_bias && tape.requires_grad(bid)) bias_grad(g, tape.grad_slot(bid));
      });
}

BatchNormState BatchNormState::fresh(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Tensor(Shape{channels}, 0.0);
  s.running_var = Tensor(Shape{channels}, 1.0);
  s.initialized = true;
  return s;
}

Var batch_norm(const Var& input, const Var& gamma, const Var& beta, BatchNormState& state,
               Mode mode) {
  const Tensor& x = input.value();
  require_rank(x, 4, "batch_norm input");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    throw ShapeError("batch_norm: affine parameters must have length " + std::to_string(C) +
                     ", got gamma " + to_string(gamma.shape()) + " and beta " +
                     to_string(beta.shape()));
  }
  const double M = static_cast<double>(N * plane);
  constexpr double eps = BatchNormState::kEpsilon;
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();

  std::vector<double> mean(C), inv_std(C);
  if (mode == Mode::train) {
    if (!state.initialized) state = BatchNormState::fresh(C);
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = x.data().data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / M;
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = x.data().data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / M;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = M > 1 ? ss / (M - 1) : var;
      constexpr double m = BatchNormState::kMomentum;
      state.running_mean[c] = (1 - m) * state.running_mean[c] + m * mu;
      state.running_var[c] = (1 - m) * state.running_var[c] + m * unbiased;
    }
  } else {
    if (!state.initialized) {
      throw Error("batch_norm: eval mode requires initialized running statistics");
    }
    if (state.running_mean.size() != C || state.running_var.size() != C) {
      throw ShapeError("batch_norm: running statistics have " +
                       std::to_string(state.running_mean.size()) + " channels, input has " +
                       std::to_string(C));
    }
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  Tensor normalized(x.shape());
  Tensor out(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - mean[c]) * inv_std[c];
        normalized[off + i] = xh;
        out[off + i] = gv[c] * xh + bv[c];
      }
    }
  }

  const std::size_t xid = input.id(), gid = gamma.id(), bid = beta.id();
  return input.tape().record(
      std::move(out), {input, gamma, beta},
      [=, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& tape, const Tensor& g) {
        const Tensor& gval = tape.value(gid);
        std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g[c] += g[off + i];
              sum_gx[c] += g[off + i] * normalized[off + i];
            }
          }
        }
        if (tape.requires_grad(gid)) {
          Tensor& s = tape.grad_slot(gid);
          for (std::size_t c = 0; c < C; ++c) s[c] += sum_gx[c];
        }
        if (tape.requires_grad(bid)) {
          Tensor& s = tape.grad_slot(bid);
          for (std::size_t c = 0; c < C; ++c) s[c] += sum_g[c];
        }
        if (!tape.requires_grad(xid)) return;
        Tensor& dx = tape.grad_slot(xid);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * plane;
            const double k = gval[c] * inv_std[c];
            if (mode == Mode::train) {
              const double mg = sum_g[c] / M, mgx = sum_gx[c] / M;
              for (std::size_t i = 0; i < plane; ++i) {
                dx[off + i] += k * (g[off + i] - mg - normalized[off + i] * mgx);
              }
            } else {
              for (std::size_t i = 0; i < plane; ++i) dx[off + i] += k * g[off + i];
            }
          }
        }
      });
}

Var relu(const Var& x) {
  return unary(x, [](double v) {
    return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0};
  });
}

Var scaled_tanh(const Var& x) {
  return unary(x, [](double v) {
    const double t = std::tanh(v);
    return std::pair{127.5 * (t + 1.0), 127.5 * (1.0 - t * t)};
  });
}

Var max_pool2d(const Var& input) {
  const Tensor& x = input.value();
  require_rank(x, 4, "max_pool2d input");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0) {
    throw ShapeError("max_pool2d: input height " + std::to_string(H) + " must be even");
  }
  if (W % 2 != 0) {
    throw ShapeError("max_pool2d: input width " + std::to_string(W) + " must be even");
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor out(Shape{N, C, Ho, Wo});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        std::size_t best = base + 2 * oh * W + 2 * ow;
        for (std::size_t dh = 0; dh < 2; ++dh) {
          for (std::size_t dw = 0; dw < 2; ++dw) {
            const std::size_t idx = base + (2 * oh + dh) * W + 2 * ow + dw;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (nc * Ho + oh) * Wo + ow;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  const std::size_t xid = input.id();
  return input.tape().record(std::move(out), {input},
                             [xid, argmax = std::move(argmax)](Tape& tape, const Tensor& g) {
                               Tensor& slot = tape.grad_slot(xid);
                               for (std::size_t o = 0; o < g.size(); ++o) slot[argmax[o]] += g[o];
                             });
}

Var sum_pool2d(const Var& input) {
  const Tensor& x = input.value();
  require_rank(x, 4, "sum_pool2d input");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("sum_pool2d: spatial dims must be even, got " + to_string(x.shape()));
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor out(Shape{N, C, Ho, Wo});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        const std::size_t i = nc * H * W + 2 * oh * W + 2 * ow;
        out[(nc * Ho + oh) * Wo + ow] = x[i] + x[i + 1] + x[i + W] + x[i + W + 1];
      }
    }
  }
  const std::size_t xid = input.id();
  return input.tape().record(std::move(out), {input}, [xid, H, W](Tape& tape, const Tensor& g) {
    Tensor& slot = tape.grad_slot(xid);
    const std::size_t Ho = H / 2, Wo = W / 2;
    for (std::size_t o = 0; o < g.size(); ++o) {
      const std::size_t nc = o / (Ho * Wo), oh = (o / Wo) % Ho, ow = o % Wo;
      const std::size_t i = nc * H * W + 2 * oh * W + 2 * ow;
      slot[i] += g[o];
      slot[i + 1] += g[o];
      slot[i + W] += g[o];
      slot[i + W + 1] += g[o];
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value() + b.value();
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), {a, b}, [aid, bid](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(aid)) tape.grad_slot(aid) += g;
    if (tape.requires_grad(bid)) tape.grad_slot(bid) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value() - b.value();
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), {a, b}, [aid, bid](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(aid)) tape.grad_slot(aid) += g;
    if (tape.requires_grad(bid)) {
      Tensor& s = tape.grad_slot(bid);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] -= g[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = factor * x.value();
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), {x}, [xid, factor](Tape& tape, const Tensor& g) {
    Tensor& s = tape.grad_slot(xid);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += factor * g[i];
  });
}

Var sum(const Var& x) {
  Tensor out = Tensor::scalar(x.value().sum());
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), {x}, [xid](Tape& tape, const Tensor& g) {
    Tensor& s = tape.grad_slot(xid);
    const double gv = g[0];
    for (double& v : s.data()) v += gv;
  });
}

Var weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
  if (terms.empty()) throw Error("weighted_sum of no terms");
  double total = 0.0;
  std::vector<Var> inputs;
  std::vector<std::pair<double, std::size_t>> ids;
  for (const auto& [w, v] : terms) {
    if (v.value().size() != 1) {
      throw ShapeError("weighted_sum: term of shape " + to_string(v.shape()) +
                       " is not scalar");
    }
    total += w * v.value()[0];
    inputs.push_back(v);
    ids.emplace_back(w, v.id());
  }
  Tape& tape = terms.front().second.tape();
  return tape.record(Tensor::scalar(total), std::move(inputs),
                     [ids = std::move(ids)](Tape& t, const Tensor& g) {
                       for (const auto& [w, id] : ids) {
                         if (t.requires_grad(id)) t.grad_slot(id)[0] += w * g[0];
                       }
                     });
}

Var normalize_channels(const Var& x, const std::vector<double>& mean,
                       const std::vector<double>& stddev) {
  const Tensor& in = x.value();
  require_rank(in, 4, "normalize_channels input");
  const std::size_t N = in.dim(0), C = in.dim(1), plane = in.dim(2) * in.dim(3);
  if (mean.size() != C || stddev.size() != C) {
    throw ShapeError("normalize_channels: preprocessing has " + std::to_string(mean.size()) +
                     " channels, input has " + std::to_string(C));
  }
  Tensor out(in.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = (in[off + i] - mean[c]) / stddev[c];
    }
  }
  const std::size_t xid = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape& tape, const Tensor& g) {
    Tensor& s = tape.grad_slot(xid);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s[off + i] += g[off + i] / stddev[c];
      }
    }
  });
}

Var detach(const Var& x) { return x.tape().constant(x.value()); }

}  // namespace percept
