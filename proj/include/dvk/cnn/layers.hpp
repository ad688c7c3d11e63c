#pragma once

// Forward and backward passes for each layer kind. Weight layouts:
//   conv: filters x (channels * kernel * kernel), input-channel major
//   fc:   out_dim x in_dim
// Backward functions overwrite (not accumulate) their outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "dvk/cnn/architecture.hpp"
#include "dvk/cnn/tensor.hpp"
#include "dvk/kernels.hpp"

namespace dvk::cnn {

using kernels::Backend;

template <typename Real>
void im2col(std::span<const Real> image, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, std::vector<Real>& col) {
  const int patch = channels * kernel * kernel;
  const int positions = out_h * out_w;
  col.assign(static_cast<std::size_t>(patch) * positions, Real(0));
  for (int ch = 0; ch < channels; ++ch) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        Real* dst = &col[static_cast<std::size_t>((ch * kernel + ky) * kernel + kx) * positions];
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= width) continue;
            dst[oy * out_w + ox] = image[(static_cast<std::size_t>(ch) * height + iy) * width + ix];
          }
        }
      }
    }
  }
}

template <typename Real>
void col2im(const std::vector<Real>& col, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, std::span<Real> image) {
  std::fill(image.begin(), image.end(), Real(0));
  const int positions = out_h * out_w;
  for (int ch = 0; ch < channels; ++ch) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Real* src = &col[static_cast<std::size_t>((ch * kernel + ky) * kernel + kx) * positions];
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= width) continue;
            image[(static_cast<std::size_t>(ch) * height + iy) * width + ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

template <typename Real>
void conv_forward(const Tensor<Real>& in, std::span<const Real> weights, std::span<const Real> bias,
                  const LayerSpec& l, Tensor<Real>& out, Backend backend) {
  out = Tensor<Real>(in.n, output_shape(l, in.shape()));
  const int patch = in.c * l.kernel * l.kernel;
  const int positions = out.h * out.w;
  std::vector<Real> col;
  for (int b = 0; b < in.n; ++b) {
    im2col<Real>(in.sample(b), in.c, in.h, in.w, l.kernel, l.stride, l.pad, out.h, out.w, col);
    Real* dst = out.sample(b).data();
    for (int f = 0; f < l.filters; ++f) std::fill(dst + f * positions, dst + (f + 1) * positions, bias[f]);
    kernels::gemm<Real>(backend, false, false, l.filters, positions, patch, Real(1), weights.data(), patch,
                        col.data(), positions, Real(1), dst, positions);
  }
}

template <typename Real>
void conv_backward(const Tensor<Real>& in, std::span<const Real> weights, const Tensor<Real>& dout,
                   const LayerSpec& l, Tensor<Real>* din, std::vector<Real>& dweights, std::vector<Real>& dbias,
                   Backend backend) {
  const int patch = in.c * l.kernel * l.kernel;
  const int positions = dout.h * dout.w;
  dweights.assign(static_cast<std::size_t>(l.filters) * patch, Real(0));
  dbias.assign(l.filters, Real(0));
  if (din) *din = Tensor<Real>(in.n, in.shape());
  std::vector<Real> col, dcol(static_cast<std::size_t>(patch) * positions);
  for (int b = 0; b < in.n; ++b) {
    const Real* g = dout.sample(b).data();
    for (int f = 0; f < l.filters; ++f) {
      Real acc = 0;
      for (int p = 0; p < positions; ++p) acc += g[f * positions + p];
      dbias[f] += acc;
    }
    im2col<Real>(in.sample(b), in.c, in.h, in.w, l.kernel, l.stride, l.pad, dout.h, dout.w, col);
    kernels::gemm<Real>(backend, false, true, l.filters, patch, positions, Real(1), g, positions, col.data(),
                        positions, Real(1), dweights.data(), patch);
    if (din) {
      kernels::gemm<Real>(backend, true, false, patch, positions, l.filters, Real(1), weights.data(), patch, g,
                          positions, Real(0), dcol.data(), positions);
      col2im<Real>(dcol, in.c, in.h, in.w, l.kernel, l.stride, l.pad, dout.h, dout.w, din->sample(b));
    }
  }
}

template <typename Real>
void fc_forward(const Tensor<Real>& in, std::span<const Real> weights, std::span<const Real> bias,
                const LayerSpec& l, Tensor<Real>& out, Backend backend) {
  out = Tensor<Real>(in.n, output_shape(l, in.shape()));
  const int in_dim = static_cast<int>(in.sample_size());
  for (int b = 0; b < in.n; ++b) std::copy(bias.begin(), bias.end(), out.sample(b).begin());
  kernels::gemm<Real>(backend, false, true, in.n, l.out_dim, in_dim, Real(1), in.data.data(), in_dim,
                      weights.data(), in_dim, Real(1), out.data.data(), l.out_dim);
}

template <typename Real>
void fc_backward(const Tensor<Real>& in, std::span<const Real> weights, const Tensor<Real>& dout,
                 const LayerSpec& l, Tensor<Real>* din, std::vector<Real>& dweights, std::vector<Real>& dbias,
                 Backend backend) {
  const int in_dim = static_cast<int>(in.sample_size());
  dweights.assign(static_cast<std::size_t>(l.out_dim) * in_dim, Real(0));
  dbias.assign(l.out_dim, Real(0));
  for (int b = 0; b < in.n; ++b) {
    for (int o = 0; o < l.out_dim; ++o) dbias[o] += dout.data[static_cast<std::size_t>(b) * l.out_dim + o];
  }
  kernels::gemm<Real>(backend, true, false, l.out_dim, in_dim, in.n, Real(1), dout.data.data(), l.out_dim,
                      in.data.data(), in_dim, Real(0), dweights.data(), in_dim);
  if (din) {
    *din = Tensor<Real>(in.n, in.shape());
    kernels::gemm<Real>(backend, false, false, in.n, in_dim, l.out_dim, Real(1), dout.data.data(), l.out_dim,
                        weights.data(), in_dim, Real(0), din->data.data(), in_dim);
  }
}

template <typename Real>
void relu_forward(const Tensor<Real>& in, Tensor<Real>& out) {
  out = in;
  for (Real& v : out.data) v = v > Real(0) ? v : Real(0);
}

template <typename Real>
void relu_backward(const Tensor<Real>& in, const Tensor<Real>& dout, Tensor<Real>& din) {
  din = dout;
  for (std::size_t i = 0; i < din.data.size(); ++i) {
    if (!(in.data[i] > Real(0))) din.data[i] = Real(0);
  }
}

// `scale` receives s = bias + alpha * sum(a^2) per element, reused by backward.
template <typename Real>
void lrn_forward(const Tensor<Real>& in, const LrnParams& p, Tensor<Real>& out, std::vector<Real>& scale) {
  out = Tensor<Real>(in.n, in.shape());
  scale.assign(in.data.size(), Real(0));
  const int half = p.size / 2;
  const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
  for (int b = 0; b < in.n; ++b) {
    const Real* a = in.sample(b).data();
    Real* y = out.sample(b).data();
    Real* s = scale.data() + b * in.sample_size();
    for (int ch = 0; ch < in.c; ++ch) {
      const int lo = std::max(0, ch - half), hi = std::min(in.c - 1, ch + half);
      for (std::size_t px = 0; px < plane; ++px) {
        Real sq = 0;
        for (int j = lo; j <= hi; ++j) sq += a[j * plane + px] * a[j * plane + px];
        const Real sv = static_cast<Real>(p.bias) + static_cast<Real>(p.alpha) * sq;
        s[ch * plane + px] = sv;
        y[ch * plane + px] = a[ch * plane + px] * std::pow(sv, static_cast<Real>(-p.beta));
      }
    }
  }
}

template <typename Real>
void lrn_backward(const Tensor<Real>& in, const std::vector<Real>& scale, const Tensor<Real>& dout,
                  const LrnParams& p, Tensor<Real>& din) {
  din = Tensor<Real>(in.n, in.shape());
  const int half = p.size / 2;
  const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
  const Real coeff = static_cast<Real>(2.0 * p.alpha * p.beta);
  for (int b = 0; b < in.n; ++b) {
    const Real* a = in.sample(b).data();
    const Real* s = scale.data() + b * in.sample_size();
    const Real* g = dout.sample(b).data();
    Real* d = din.sample(b).data();
    for (int ch = 0; ch < in.c; ++ch) {
      const int lo = std::max(0, ch - half), hi = std::min(in.c - 1, ch + half);
      for (std::size_t px = 0; px < plane; ++px) {
        // Channels whose window contains ch are exactly those within ch's own window.
        Real cross = 0;
        for (int j = lo; j <= hi; ++j) {
          cross += g[j * plane + px] * a[j * plane + px] * std::pow(s[j * plane + px], static_cast<Real>(-p.beta - 1));
        }
        d[ch * plane + px] = g[ch * plane + px] * std::pow(s[ch * plane + px], static_cast<Real>(-p.beta)) -
                             coeff * a[ch * plane + px] * cross;
      }
    }
  }
}

// `argmax` stores, per output element, the flat input index that won; the
// first maximal element in row-major window order wins ties.
template <typename Real>
void maxpool_forward(const Tensor<Real>& in, const LayerSpec& l, Tensor<Real>& out, std::vector<int>& argmax) {
  out = Tensor<Real>(in.n, output_shape(l, in.shape()));
  argmax.assign(out.data.size(), 0);
  for (int b = 0; b < in.n; ++b) {
    for (int ch = 0; ch < in.c; ++ch) {
      for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
          Real best = -std::numeric_limits<Real>::infinity();
          int best_idx = -1;
          for (int ky = 0; ky < l.kernel; ++ky) {
            const int iy = oy * l.stride - l.pad + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < l.kernel; ++kx) {
              const int ix = ox * l.stride - l.pad + kx;
              if (ix < 0 || ix >= in.w) continue;
              const int idx = ((b * in.c + ch) * in.h + iy) * in.w + ix;
              if (best_idx < 0 || in.data[idx] > best) {
                best = in.data[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t o = ((static_cast<std::size_t>(b) * out.c + ch) * out.h + oy) * out.w + ox;
          out.data[o] = best;
          argmax[o] = best_idx;
        }
      }
    }
  }
}

template <typename Real>
void maxpool_backward(const Tensor<Real>& in, const std::vector<int>& argmax, const Tensor<Real>& dout,
                      Tensor<Real>& din) {
  din = Tensor<Real>(in.n, in.shape());
  for (std::size_t o = 0; o < dout.data.size(); ++o) din.data[argmax[o]] += dout.data[o];
}

// Inverted dropout: kept units are scaled by 1 / (1 - rate) during training,
// evaluation is the identity.
template <typename Real>
void dropout_forward(const Tensor<Real>& in, double rate, bool train, std::uint64_t seed, Tensor<Real>& out,
                     std::vector<Real>& mask) {
  out = in;
  if (!train || rate == 0.0) {
    mask.clear();
    return;
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const Real scale = static_cast<Real>(1.0 / (1.0 - rate));
  mask.resize(in.data.size());
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    mask[i] = keep(rng) ? scale : Real(0);
    out.data[i] *= mask[i];
  }
}

template <typename Real>
void dropout_backward(const std::vector<Real>& mask, const Tensor<Real>& dout, Tensor<Real>& din) {
  din = dout;
  if (mask.empty()) return;
  for (std::size_t i = 0; i < din.data.size(); ++i) din.data[i] *= mask[i];
}

template <typename Real>
void softmax_forward(const Tensor<Real>& in, Tensor<Real>& out) {
  out = in;
  for (int b = 0; b < in.n; ++b) {
    auto row = out.sample(b);
    const Real top = *std::max_element(row.begin(), row.end());
    Real total = 0;
    for (Real& v : row) {
      v = std::exp(v - top);
      total += v;
    }
    for (Real& v : row) v /= total;
  }
}

template <typename Real>
void softmax_backward(const Tensor<Real>& out, const Tensor<Real>& dout, Tensor<Real>& din) {
  din = Tensor<Real>(out.n, out.shape());
  for (int b = 0; b < out.n; ++b) {
    const auto p = out.sample(b);
    const auto g = dout.sample(b);
    auto d = din.sample(b);
    Real dotp = 0;
    for (std::size_t i = 0; i < p.size(); ++i) dotp += p[i] * g[i];
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] * (g[i] - dotp);
  }
}

}  // namespace dvk::cnn
