#pragma once

#include "cfdepth/autodiff.hpp"

#include <optional>
#include <vector>

namespace cfd {

/// Weights of the surface-normal, average-depth and berHu terms.
struct LossWeights {
  double normal = 1.0;
  double avg = 0.5;
  double berhu = 1.0;

  void validate() const {
    if (normal < 0.0 || avg < 0.0 || berhu < 0.0) throw InvalidInput("loss weights must be non-negative");
  }
};

/// Ground truth for one batch at network output resolution. All tensors are
/// constants; `valid` is 1 where a pixel takes part in the loss and 0 at
/// dropout-flipped or invalid ground-truth pixels.
template <typename Scalar>
struct LossTargets {
  ad::Tensor<Scalar> depth;       // (N, 1, H, W)
  ad::Tensor<Scalar> normals;     // (N, 3, H, W)
  ad::Tensor<Scalar> confidence;  // (N, 1, H, W)
  ad::Tensor<Scalar> valid;       // (N, 1, H, W)
  std::vector<double> fx;         // per sample, output-resolution pixels
  std::vector<double> fy;
};

/// Berhu cutoff for a batch: 0.2 * max |pred - gt| over valid pixels.
template <typename Scalar>
Scalar berhu_cutoff(const ad::Buffer<Scalar>& pred, const ad::Buffer<Scalar>& gt, const ad::Buffer<Scalar>& valid) {
  Scalar m(0);
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (valid[i] != Scalar(0)) m = std::max(m, std::abs(pred[i] - gt[i]));
  }
  return Scalar(0.2) * m;
}

namespace detail {

template <typename Scalar>
void check_loss_inputs(ad::Var<Scalar> pred, const ad::Tensor<Scalar>& gt, const ad::Tensor<Scalar>& valid,
                       const char* op) {
  const ad::Shape s = pred.shape();
  if (s.c != 1) throw ShapeError(std::string(op) + ": prediction must have one channel, got " + s.str());
  if (!(gt.shape == s) || !(valid.shape == s)) {
    throw ShapeError(std::string(op) + ": target shapes " + gt.shape.str() + " / " + valid.shape.str() +
                     " do not match prediction " + s.str());
  }
}

template <typename Scalar>
ad::Tensor<Scalar> constant_like(const ad::Shape& s, const std::vector<double>& per_sample) {
  ad::Tensor<Scalar> t(s);
  const Eigen::Index per = s.size() / s.n;
  for (int n = 0; n < s.n; ++n) t.data.segment(n * per, per).setConstant(static_cast<Scalar>(per_sample.at(n)));
  return t;
}

}  // namespace detail

/// Mean reverse-Huber penalty over valid pixels. The cutoff is a constant of
/// the batch (0.2 * max residual) unless `forced_cutoff` is given; it is not
/// differentiated.
template <typename Scalar>
ad::Var<Scalar> berhu_loss(ad::Var<Scalar> pred, const ad::Tensor<Scalar>& gt, const ad::Tensor<Scalar>& valid,
                           std::optional<Scalar> forced_cutoff = std::nullopt) {
  detail::check_loss_inputs(pred, gt, valid, "berhu_loss");
  const Scalar q = valid.data.sum();
  if (!(q > Scalar(0))) throw InvalidInput("berhu_loss: no valid pixel");
  ad::Tape<Scalar>& t = *pred.tape;
  ad::Var<Scalar> r = ad::sub(pred, t.constant(gt));
  const Scalar c = forced_cutoff ? *forced_cutoff : berhu_cutoff(pred.value(), gt.data, valid.data);
  ad::Var<Scalar> per_pixel = c > Scalar(0) ? ad::berhu(r, c) : ad::abs(r);
  return ad::masked_select_sum(per_pixel, ad::Buffer<Scalar>(valid.data / q));
}

/// Squared difference of mean depths over valid pixels, averaged over the
/// images of the batch that have at least one valid pixel.
template <typename Scalar>
ad::Var<Scalar> avg_depth_loss(ad::Var<Scalar> pred, const ad::Tensor<Scalar>& gt, const ad::Tensor<Scalar>& valid) {
  detail::check_loss_inputs(pred, gt, valid, "avg_depth_loss");
  const ad::Shape s = pred.shape();
  const Eigen::Index per = s.size() / s.n;
  std::optional<ad::Var<Scalar>> total;
  int images = 0;
  for (int n = 0; n < s.n; ++n) {
    const Scalar q = valid.data.segment(n * per, per).sum();
    if (!(q > Scalar(0))) continue;
    ad::Buffer<Scalar> w = ad::Buffer<Scalar>::Zero(s.size());
    w.segment(n * per, per) = valid.data.segment(n * per, per) / q;
    const Scalar gt_mean = (gt.data * w).sum();
    ad::Var<Scalar> diff = ad::add_scalar(ad::mul_scalar(ad::masked_select_sum(pred, w), Scalar(-1)), gt_mean);
    ad::Var<Scalar> sq = ad::square(diff);
    total = total ? ad::add(*total, sq) : sq;
    ++images;
  }
  if (images == 0) throw InvalidInput("avg_depth_loss: no valid pixel");
  return ad::mul_scalar(*total, Scalar(1) / static_cast<Scalar>(images));
}

/// Pixels that take part in the surface-normal loss: interior pixels that
/// are valid together with their four neighbors, so that the central
/// difference never reads an excluded pixel.
template <typename Scalar>
ad::Buffer<Scalar> surface_valid(const ad::Tensor<Scalar>& valid) {
  const ad::Shape s = valid.shape;
  const int h = s.h - 2;
  const int w = s.w - 2;
  ad::Buffer<Scalar> out = ad::Buffer<Scalar>::Zero(static_cast<Eigen::Index>(s.n) * h * w);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 1; y <= h; ++y) {
      for (int x = 1; x <= w; ++x) {
        const bool ok = valid.at(n, 0, y, x) != Scalar(0) && valid.at(n, 0, y - 1, x) != Scalar(0) &&
                        valid.at(n, 0, y + 1, x) != Scalar(0) && valid.at(n, 0, y, x - 1) != Scalar(0) &&
                        valid.at(n, 0, y, x + 1) != Scalar(0);
        out[(static_cast<Eigen::Index>(n) * h + (y - 1)) * w + (x - 1)] = ok ? Scalar(1) : Scalar(0);
      }
    }
  }
  return out;
}

/// -sum_p c_p log(N(d_p) . N'(pred_p)) / Q over surface-valid pixels, where
/// N' is the single-step central-difference normal
/// normalize(fx * gx, fy * gy, 1) of the prediction and the dot product is
/// clamped to [1e-6, 1].
template <typename Scalar>
ad::Var<Scalar> surface_normal_loss(ad::Var<Scalar> pred, const LossTargets<Scalar>& tg) {
  const ad::Shape s = pred.shape();
  if (s.c != 1 || s.h < 3 || s.w < 3) throw ShapeError("surface_normal_loss: prediction " + s.str());
  if (!(tg.normals.shape == ad::Shape{s.n, 3, s.h, s.w}) || !(tg.confidence.shape == s) || !(tg.valid.shape == s)) {
    throw ShapeError("surface_normal_loss: target shapes do not match prediction " + s.str());
  }
  if (static_cast<int>(tg.fx.size()) != s.n || static_cast<int>(tg.fy.size()) != s.n) {
    throw ShapeError("surface_normal_loss: need one focal length pair per sample");
  }
  const int h = s.h - 2;
  const int w = s.w - 2;
  const ad::Shape is{s.n, 1, h, w};

  const ad::Buffer<Scalar> sv = surface_valid(tg.valid);
  const Scalar q = sv.sum();
  if (!(q > Scalar(0))) throw InvalidInput("surface_normal_loss: no valid pixel");

  // Interior crops of the targets.
  ad::Tensor<Scalar> gnx(is), gny(is), gnz(is);
  ad::Buffer<Scalar> weight(is.size());
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Eigen::Index i = gnx.index(n, 0, y, x);
        gnx.data[i] = tg.normals.at(n, 0, y + 1, x + 1);
        gny.data[i] = tg.normals.at(n, 1, y + 1, x + 1);
        gnz.data[i] = tg.normals.at(n, 2, y + 1, x + 1);
        weight[i] = sv[i] * -tg.confidence.at(n, 0, y + 1, x + 1) / q;
      }
    }
  }

  ad::Tape<Scalar>& t = *pred.tape;
  const Scalar half(0.5);
  ad::Var<Scalar> gx = ad::mul_scalar(ad::sub(ad::slice(pred, 1, 2, h, w), ad::slice(pred, 1, 0, h, w)), half);
  ad::Var<Scalar> gy = ad::mul_scalar(ad::sub(ad::slice(pred, 2, 1, h, w), ad::slice(pred, 0, 1, h, w)), half);
  ad::Var<Scalar> nx = ad::mul(gx, t.constant(detail::constant_like<Scalar>(is, tg.fx)));
  ad::Var<Scalar> ny = ad::mul(gy, t.constant(detail::constant_like<Scalar>(is, tg.fy)));
  ad::Var<Scalar> norm = ad::sqrt(ad::add_scalar(ad::add(ad::square(nx), ad::square(ny)), Scalar(1)));
  ad::Var<Scalar> num = ad::add(ad::add(ad::mul(nx, t.constant(gnx)), ad::mul(ny, t.constant(gny))), t.constant(gnz));
  ad::Var<Scalar> dot = ad::clamp(ad::div(num, norm), Scalar(1e-6), Scalar(1));
  return ad::masked_select_sum(ad::log(dot), weight);
}

template <typename Scalar>
struct LossTerms {
  ad::Var<Scalar> total;
  double surface = 0.0;
  double avg = 0.0;
  double berhu = 0.0;
  double cutoff = 0.0;
};

/// w_normal * L_surface + w_avg * L_avg + w_berhu * berHu. Terms with zero
/// weight are not evaluated.
template <typename Scalar>
LossTerms<Scalar> total_loss(ad::Var<Scalar> pred, const LossTargets<Scalar>& tg, const LossWeights& weights,
                             std::optional<Scalar> forced_cutoff = std::nullopt) {
  weights.validate();
  ad::Tape<Scalar>& t = *pred.tape;
  LossTerms<Scalar> out;
  std::optional<ad::Var<Scalar>> acc;
  auto accumulate = [&](ad::Var<Scalar> term, double wgt) {
    ad::Var<Scalar> scaled = ad::mul_scalar(term, static_cast<Scalar>(wgt));
    acc = acc ? ad::add(*acc, scaled) : scaled;
  };
  if (weights.normal > 0.0) {
    ad::Var<Scalar> ls = surface_normal_loss(pred, tg);
    out.surface = static_cast<double>(ls.item());
    accumulate(ls, weights.normal);
  }
  if (weights.avg > 0.0) {
    ad::Var<Scalar> la = avg_depth_loss(pred, tg.depth, tg.valid);
    out.avg = static_cast<double>(la.item());
    accumulate(la, weights.avg);
  }
  if (weights.berhu > 0.0) {
    const Scalar c = forced_cutoff ? *forced_cutoff : berhu_cutoff(pred.value(), tg.depth.data, tg.valid.data);
    ad::Var<Scalar> lb = berhu_loss(pred, tg.depth, tg.valid, std::optional<Scalar>(c));
    out.berhu = static_cast<double>(lb.item());
    out.cutoff = static_cast<double>(c);
    accumulate(lb, weights.berhu);
  }
  out.total = acc ? *acc : t.constant(ad::Shape{}, ad::Buffer<Scalar>::Zero(1));
  return out;
}

}  // namespace cfd
