#include "cfdepth/geometry.hpp"

#include <string>

namespace cfd {

void Intrinsics::validate(int width, int height) const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("intrinsics: focal lengths must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw InvalidInput("intrinsics: principal point outside the image");
  }
}

Intrinsics Intrinsics::resized(int width, int height, int out_w, int out_h) const {
  const double sx = static_cast<double>(out_w) / width;
  const double sy = static_cast<double>(out_h) / height;
  return {fx * sx, fy * sy, (cx + 0.5) * sx - 0.5, (cy + 0.5) * sy - 0.5};
}

PlaneF bilinear_resize_depth(const PlaneF& depth, int out_w, int out_h) {
  detail::check_dims(out_w, out_h, "bilinear_resize");
  const int in_w = static_cast<int>(depth.cols());
  const int in_h = static_cast<int>(depth.rows());
  PlaneF out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto ty = detail::bilinear_tap(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const auto tx = detail::bilinear_tap(x, in_w, out_w);
      const float v[4] = {depth(ty.i0, tx.i0), depth(ty.i0, tx.i1), depth(ty.i1, tx.i0),
                          depth(ty.i1, tx.i1)};
      const double w[4] = {(1.0 - ty.t) * (1.0 - tx.t), (1.0 - ty.t) * tx.t, ty.t * (1.0 - tx.t),
                           ty.t * tx.t};
      if (v[0] > 0.0f && v[1] > 0.0f && v[2] > 0.0f && v[3] > 0.0f) {
        const double top = (1.0 - tx.t) * v[0] + tx.t * v[1];
        const double bot = (1.0 - tx.t) * v[2] + tx.t * v[3];
        out(y, x) = static_cast<float>((1.0 - ty.t) * top + ty.t * bot);
        continue;
      }
      double acc = 0.0;
      double wsum = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (v[k] > 0.0f && w[k] > 0.0) {
          acc += w[k] * v[k];
          wsum += w[k];
        }
      }
      out(y, x) = wsum > 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
    }
  }
  return out;
}

DepthMap bilinear_resize(const DepthMap& depth, int out_w, int out_h) {
  if (out_w == depth.width() && out_h == depth.height()) return depth;
  return {bilinear_resize_depth(depth.data, out_w, out_h),
          depth.intrinsics.resized(depth.width(), depth.height(), out_w, out_h)};
}

RgbImage bilinear_resize(const RgbImage& rgb, int out_w, int out_h) {
  RgbImage out;
  for (int c = 0; c < 3; ++c) out.ch[c] = bilinear_resize(rgb.ch[c], out_w, out_h);
  return out;
}

ObjectMask nearest_resize(const ObjectMask& mask, int out_w, int out_h) {
  return ObjectMask(nearest_resize(mask.data, out_w, out_h));
}

NormalField nearest_resize(const NormalField& normals, int out_w, int out_h) {
  NormalField out;
  for (int c = 0; c < 3; ++c) out.ch[c] = nearest_resize(normals.ch[c], out_w, out_h);
  return out;
}

ConfidenceMap nearest_resize(const ConfidenceMap& conf, int out_w, int out_h) {
  return {nearest_resize(conf.data, out_w, out_h)};
}

CropWindow center_crop_to_aspect(int width, int height, int aspect_h, int aspect_w) {
  if (aspect_h <= 0 || aspect_w <= 0) throw InvalidInput("center_crop_to_aspect: aspect must be positive");
  if (width < 1 || height < 1) throw InvalidInput("center_crop_to_aspect: empty image");
  // Compare height/width against aspect_h/aspect_w in exact integer arithmetic.
  const long long lhs = static_cast<long long>(height) * aspect_w;
  const long long rhs = static_cast<long long>(width) * aspect_h;
  int cw = width;
  int ch = height;
  if (lhs > rhs) {
    ch = static_cast<int>(static_cast<long long>(width) * aspect_h / aspect_w);
  } else if (lhs < rhs) {
    cw = static_cast<int>(static_cast<long long>(height) * aspect_w / aspect_h);
  }
  ch = std::max(ch, 1);
  cw = std::max(cw, 1);
  return {(width - cw) / 2, (height - ch) / 2, cw, ch};
}

DepthMap crop(const DepthMap& depth, const CropWindow& w) {
  return {crop(depth.data, w), depth.intrinsics.cropped(w.x0, w.y0)};
}

RgbImage crop(const RgbImage& rgb, const CropWindow& w) {
  RgbImage out;
  for (int c = 0; c < 3; ++c) out.ch[c] = crop(rgb.ch[c], w);
  return out;
}

ObjectMask crop(const ObjectMask& mask, const CropWindow& w) { return ObjectMask(crop(mask.data, w)); }

DepthMap rescale_depth_for_crop(const DepthMap& depth, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw InvalidInput("rescale_depth_for_crop: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  DepthMap out = depth;
  out.data = depth.data.unaryExpr([alpha](float d) {
    return d > 0.0f ? static_cast<float>(d / alpha) : d;
  });
  return out;
}

}  // namespace cfd
