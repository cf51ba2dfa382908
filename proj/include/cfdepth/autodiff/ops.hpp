#pragma once

#include "cfdepth/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace cfd::ad {

namespace detail {

template <typename Scalar>
void require_same_tape(Var<Scalar> a, Var<Scalar> b, const char* op) {
  if (a.tape != b.tape) throw InvalidInput(std::string(op) + ": operands live on different tapes");
}

template <typename Scalar>
void require_same_shape(Var<Scalar> a, Var<Scalar> b, const char* op) {
  require_same_tape(a, b, op);
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unary elementwise op whose derivative is a function of (input, output).
template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(Var<Scalar> x, Fwd fwd, Deriv deriv) {
  Tape<Scalar>& t = *x.tape;
  Buffer<Scalar> y = x.value().unaryExpr(fwd);
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, deriv](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      const Buffer<Scalar>& xv = tp.value(xi);
      Buffer<Scalar>& gx = tp.grad(xi);
      for (Eigen::Index i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i]);
    };
  }
  return t.push(x.shape(), std::move(y), t.needs_grad(xi), std::move(bw));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (identical shapes; no broadcasting).

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "add");
  Tape<Scalar>& t = *a.tape;
  const int ai = a.id, bi = b.id;
  const bool ng = t.needs_grad(ai) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [ai, bi](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      if (tp.needs_grad(ai)) tp.grad(ai) += g;
      if (tp.needs_grad(bi)) tp.grad(bi) += g;
    };
  }
  return t.push(a.shape(), a.value() + b.value(), ng, std::move(bw));
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "sub");
  Tape<Scalar>& t = *a.tape;
  const int ai = a.id, bi = b.id;
  const bool ng = t.needs_grad(ai) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [ai, bi](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      if (tp.needs_grad(ai)) tp.grad(ai) += g;
      if (tp.needs_grad(bi)) tp.grad(bi) -= g;
    };
  }
  return t.push(a.shape(), a.value() - b.value(), ng, std::move(bw));
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "mul");
  Tape<Scalar>& t = *a.tape;
  const int ai = a.id, bi = b.id;
  const bool ng = t.needs_grad(ai) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [ai, bi](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      if (tp.needs_grad(ai)) tp.grad(ai) += g * tp.value(bi);
      if (tp.needs_grad(bi)) tp.grad(bi) += g * tp.value(ai);
    };
  }
  return t.push(a.shape(), a.value() * b.value(), ng, std::move(bw));
}

template <typename Scalar>
Var<Scalar> div(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "div");
  Tape<Scalar>& t = *a.tape;
  const int ai = a.id, bi = b.id;
  const bool ng = t.needs_grad(ai) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [ai, bi](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      const Buffer<Scalar>& bv = tp.value(bi);
      if (tp.needs_grad(ai)) tp.grad(ai) += g / bv;
      if (tp.needs_grad(bi)) tp.grad(bi) -= g * tp.value(ai) / (bv * bv);
    };
  }
  return t.push(a.shape(), a.value() / b.value(), ng, std::move(bw));
}

// ---------------------------------------------------------------------------
// Scalar and elementwise unary ops.

template <typename Scalar>
Var<Scalar> mul_scalar(Var<Scalar> x, Scalar s) {
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, s](Tape<Scalar>& tp, const Buffer<Scalar>& g) { tp.grad(xi) += g * s; };
  }
  return t.push(x.shape(), x.value() * s, t.needs_grad(xi), std::move(bw));
}

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> x, Scalar s) {
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi](Tape<Scalar>& tp, const Buffer<Scalar>& g) { tp.grad(xi) += g; };
  }
  return t.push(x.shape(), x.value() + s, t.needs_grad(xi), std::move(bw));
}

/// relu'(0) = 0.
template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  return detail::unary(
      x, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); },
      [](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> x) {
  return detail::unary(x, [](Scalar v) { return v * v; }, [](Scalar v) { return Scalar(2) * v; });
}

template <typename Scalar>
Var<Scalar> sqrt(Var<Scalar> x) {
  return detail::unary(
      x, [](Scalar v) { return std::sqrt(v); }, [](Scalar v) { return Scalar(0.5) / std::sqrt(v); });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> x) {
  return detail::unary(x, [](Scalar v) { return std::log(v); }, [](Scalar v) { return Scalar(1) / v; });
}

/// abs'(0) = 0.
template <typename Scalar>
Var<Scalar> abs(Var<Scalar> x) {
  return detail::unary(
      x, [](Scalar v) { return std::abs(v); },
      [](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

/// log(1 + e^x), evaluated without overflow.
template <typename Scalar>
Var<Scalar> softplus(Var<Scalar> x) {
  return detail::unary(
      x,
      [](Scalar v) { return v > Scalar(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](Scalar v) {
        return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v))
                              : std::exp(v) / (Scalar(1) + std::exp(v));
      });
}

/// Gradient passes only strictly inside (lo, hi).
template <typename Scalar>
Var<Scalar> clamp(Var<Scalar> x, Scalar lo, Scalar hi) {
  return detail::unary(
      x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); },
      [lo, hi](Scalar v) { return (v > lo && v < hi) ? Scalar(1) : Scalar(0); });
}

/// Reverse Huber with a fixed cutoff c > 0: |r| for |r| <= c, else
/// (r^2 + c^2) / (2c). At |r| = c both branch slopes equal sign(r).
template <typename Scalar>
Var<Scalar> berhu(Var<Scalar> r, Scalar c) {
  if (!(c > Scalar(0))) throw InvalidInput("berhu: cutoff must be positive");
  return detail::unary(
      r,
      [c](Scalar v) {
        const Scalar a = std::abs(v);
        return a <= c ? a : (v * v + c * c) / (Scalar(2) * c);
      },
      [c](Scalar v) {
        const Scalar a = std::abs(v);
        if (a <= c) return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
        return v / c;
      });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  Buffer<Scalar> y(1);
  y[0] = x.value().sum();
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi](Tape<Scalar>& tp, const Buffer<Scalar>& g) { tp.grad(xi) += g[0]; };
  }
  return t.push(Shape{}, std::move(y), t.needs_grad(xi), std::move(bw));
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> x) {
  return mul_scalar(sum(x), Scalar(1) / static_cast<Scalar>(x.shape().size()));
}

/// Sum of x * weights where weights is a constant of x's shape.
template <typename Scalar>
Var<Scalar> masked_select_sum(Var<Scalar> x, const Buffer<Scalar>& weights) {
  if (weights.size() != x.shape().size()) {
    throw ShapeError("masked_select_sum: weights length " + std::to_string(weights.size()) +
                     " vs " + x.shape().str());
  }
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  Buffer<Scalar> y(1);
  y[0] = (x.value() * weights).sum();
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, weights](Tape<Scalar>& tp, const Buffer<Scalar>& g) { tp.grad(xi) += g[0] * weights; };
  }
  return t.push(Shape{}, std::move(y), t.needs_grad(xi), std::move(bw));
}

// ---------------------------------------------------------------------------
// Spatial ops.

/// Spatial window [y0, y0 + h) x [x0, x0 + w) of every channel.
template <typename Scalar>
Var<Scalar> slice(Var<Scalar> x, int y0, int x0, int h, int w) {
  const Shape s = x.shape();
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > s.h || x0 + w > s.w) {
    throw ShapeError("slice: window out of range for " + s.str());
  }
  const Shape os{s.n, s.c, h, w};
  Buffer<Scalar> y(os.size());
  const Buffer<Scalar>& xv = x.value();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    for (int r = 0; r < h; ++r) {
      y.segment((static_cast<Eigen::Index>(nc) * h + r) * w, w) =
          xv.segment((static_cast<Eigen::Index>(nc) * s.h + y0 + r) * s.w + x0, w);
    }
  }
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, s, y0, x0, h, w](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      Buffer<Scalar>& gx = tp.grad(xi);
      for (int nc = 0; nc < s.n * s.c; ++nc) {
        for (int r = 0; r < h; ++r) {
          gx.segment((static_cast<Eigen::Index>(nc) * s.h + y0 + r) * s.w + x0, w) +=
              g.segment((static_cast<Eigen::Index>(nc) * h + r) * w, w);
        }
      }
    };
  }
  return t.push(os, std::move(y), t.needs_grad(xi), std::move(bw));
}

template <typename Scalar>
Var<Scalar> concat_channels(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b, "concat_channels");
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: shape mismatch " + sa.str() + " vs " + sb.str());
  }
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  const Eigen::Index la = sa.c * sa.plane();
  const Eigen::Index lb = sb.c * sb.plane();
  Buffer<Scalar> y(os.size());
  for (int n = 0; n < sa.n; ++n) {
    y.segment(n * (la + lb), la) = a.value().segment(n * la, la);
    y.segment(n * (la + lb) + la, lb) = b.value().segment(n * lb, lb);
  }
  Tape<Scalar>& t = *a.tape;
  const int ai = a.id, bi = b.id;
  const bool ng = t.needs_grad(ai) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [ai, bi, la, lb, nb = sa.n](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      for (int n = 0; n < nb; ++n) {
        if (tp.needs_grad(ai)) tp.grad(ai).segment(n * la, la) += g.segment(n * (la + lb), la);
        if (tp.needs_grad(bi)) tp.grad(bi).segment(n * lb, lb) += g.segment(n * (la + lb) + la, lb);
      }
    };
  }
  return t.push(os, std::move(y), ng, std::move(bw));
}

template <typename Scalar>
Var<Scalar> upsample_nearest_2x(Var<Scalar> x) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
  Buffer<Scalar> y(os.size());
  const Buffer<Scalar>& xv = x.value();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    for (int r = 0; r < os.h; ++r) {
      for (int c = 0; c < os.w; ++c) {
        y[(static_cast<Eigen::Index>(nc) * os.h + r) * os.w + c] =
            xv[(static_cast<Eigen::Index>(nc) * s.h + r / 2) * s.w + c / 2];
      }
    }
  }
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, s, os](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      Buffer<Scalar>& gx = tp.grad(xi);
      for (int nc = 0; nc < s.n * s.c; ++nc) {
        for (int r = 0; r < os.h; ++r) {
          for (int c = 0; c < os.w; ++c) {
            gx[(static_cast<Eigen::Index>(nc) * s.h + r / 2) * s.w + c / 2] +=
                g[(static_cast<Eigen::Index>(nc) * os.h + r) * os.w + c];
          }
        }
      }
    };
  }
  return t.push(os, std::move(y), t.needs_grad(xi), std::move(bw));
}

/// 2x2 max pooling, stride 2; odd trailing rows / columns are dropped. Ties
/// route the gradient to the first maximum in row-major order.
template <typename Scalar>
Var<Scalar> max_pool_2x(Var<Scalar> x) {
  const Shape s = x.shape();
  if (s.h < 2 || s.w < 2) throw ShapeError("max_pool_2x: input too small " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Buffer<Scalar> y(os.size());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(os.size()));
  const Buffer<Scalar>& xv = x.value();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    for (int r = 0; r < os.h; ++r) {
      for (int c = 0; c < os.w; ++c) {
        Eigen::Index best = (static_cast<Eigen::Index>(nc) * s.h + 2 * r) * s.w + 2 * c;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const Eigen::Index i = (static_cast<Eigen::Index>(nc) * s.h + 2 * r + dy) * s.w + 2 * c + dx;
            if (xv[i] > xv[best]) best = i;
          }
        }
        const Eigen::Index o = (static_cast<Eigen::Index>(nc) * os.h + r) * os.w + c;
        y[o] = xv[best];
        arg[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  Tape<Scalar>& t = *x.tape;
  const int xi = x.id;
  typename Tape<Scalar>::Backward bw;
  if (t.needs_grad(xi)) {
    bw = [xi, arg = std::move(arg)](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      Buffer<Scalar>& gx = tp.grad(xi);
      for (Eigen::Index o = 0; o < g.size(); ++o) gx[arg[static_cast<std::size_t>(o)]] += g[o];
    };
  }
  return t.push(os, std::move(y), t.needs_grad(xi), std::move(bw));
}

/// Cross-correlation with zero padding. x: (N, Cin, H, W); weight:
/// (Cout, Cin, k, k); bias: (1, Cout, 1, 1).
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, int stride, int pad) {
  detail::require_same_tape(x, weight, "conv2d");
  detail::require_same_tape(x, bias, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape bs = bias.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) + " do not match kernel " + ws.str());
  }
  if (!(bs == Shape{1, ws.n, 1, 1})) throw ShapeError("conv2d: bias " + bs.str() + " for kernel " + ws.str());
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: bad stride/pad");
  const int k = ws.h;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1 || xs.h + 2 * pad < k || xs.w + 2 * pad < k) {
    throw ShapeError("conv2d: kernel " + ws.str() + " larger than padded input " + xs.str());
  }
  const Shape os{xs.n, ws.n, ho, wo};
  const Eigen::Index kk = static_cast<Eigen::Index>(xs.c) * k * k;
  const Eigen::Index p = static_cast<Eigen::Index>(ho) * wo;

  using Mat = detail::RowMat<Scalar>;
  // One im2col matrix per sample, kept for the backward pass.
  auto cols = std::make_shared<std::vector<Mat>>(xs.n, Mat(kk, p));
  const Buffer<Scalar>& xv = x.value();
  for (int n = 0; n < xs.n; ++n) {
    Mat& col = (*cols)[n];
    for (int ci = 0; ci < xs.c; ++ci) {
      const Scalar* src = xv.data() + (static_cast<Eigen::Index>(n) * xs.c + ci) * xs.plane();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          Scalar* dst = col.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * p;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              *dst++ = (iy >= 0 && iy < xs.h && ix >= 0 && ix < xs.w) ? src[iy * xs.w + ix] : Scalar(0);
            }
          }
        }
      }
    }
  }

  Eigen::Map<const Mat> wmat(weight.value().data(), ws.n, kk);
  const Buffer<Scalar>& bv = bias.value();
  Buffer<Scalar> y(os.size());
  for (int n = 0; n < xs.n; ++n) {
    Eigen::Map<Mat> out(y.data() + static_cast<Eigen::Index>(n) * ws.n * p, ws.n, p);
    out.noalias() = wmat * (*cols)[n];
    out.colwise() += bv.matrix();
  }

  Tape<Scalar>& t = *x.tape;
  const int xi = x.id, wi = weight.id, bi = bias.id;
  const bool ng = t.needs_grad(xi) || t.needs_grad(wi) || t.needs_grad(bi);
  typename Tape<Scalar>::Backward bw;
  if (ng) {
    bw = [xi, wi, bi, xs, ws, k, ho, wo, kk, p, stride, pad, cols](Tape<Scalar>& tp, const Buffer<Scalar>& g) {
      Eigen::Map<const Mat> wm(tp.value(wi).data(), ws.n, kk);
      Mat dcol(kk, p);
      for (int n = 0; n < xs.n; ++n) {
        Eigen::Map<const Mat> gout(g.data() + static_cast<Eigen::Index>(n) * ws.n * p, ws.n, p);
        if (tp.needs_grad(wi)) {
          Eigen::Map<Mat> gw(tp.grad(wi).data(), ws.n, kk);
          gw.noalias() += gout * (*cols)[n].transpose();
        }
        if (tp.needs_grad(bi)) tp.grad(bi).matrix() += gout.rowwise().sum();
        if (tp.needs_grad(xi)) {
          dcol.noalias() = wm.transpose() * gout;
          Scalar* gx = tp.grad(xi).data();
          for (int ci = 0; ci < xs.c; ++ci) {
            Scalar* dst = gx + (static_cast<Eigen::Index>(n) * xs.c + ci) * xs.plane();
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const Scalar* src = dcol.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * p;
                for (int oy = 0; oy < ho; ++oy) {
                  const int iy = oy * stride - pad + ky;
                  for (int ox = 0; ox < wo; ++ox, ++src) {
                    const int ix = ox * stride - pad + kx;
                    if (iy >= 0 && iy < xs.h && ix >= 0 && ix < xs.w) dst[iy * xs.w + ix] += *src;
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return t.push(os, std::move(y), ng, std::move(bw));
}

}  // namespace cfd::ad
