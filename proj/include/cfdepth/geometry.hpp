#pragma once

#include "cfdepth/errors.hpp"
#include "cfdepth/image.hpp"

#include <algorithm>
#include <cmath>

namespace cfd {

/// Axis-aligned pixel window [x0, x0 + width) x [y0, y0 + height).
struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  bool operator==(const CropWindow&) const = default;
};

namespace detail {

// Half-pixel-center source coordinate, clamped to the valid sample range.
struct Tap {
  int i0;
  int i1;
  double t;
};

inline Tap bilinear_tap(int out, int n_in, int n_out) {
  double u = (out + 0.5) * (static_cast<double>(n_in) / n_out) - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(n_in - 1));
  const int i0 = static_cast<int>(std::floor(u));
  const int i1 = std::min(i0 + 1, n_in - 1);
  return {i0, i1, u - i0};
}

inline int nearest_tap(int out, int n_in, int n_out) {
  const int i = static_cast<int>(std::floor((out + 0.5) * (static_cast<double>(n_in) / n_out)));
  return std::clamp(i, 0, n_in - 1);
}

inline void check_dims(int w, int h, const char* op) {
  if (w < 1 || h < 1) throw InvalidInput(std::string(op) + ": output dims must be >= 1");
}

}  // namespace detail

/// Bilinear resampling with half-pixel-center alignment: output pixel x
/// samples source coordinate (x + 0.5) * W_in / W_out - 0.5, clamped to the
/// border.
template <typename T>
Plane<T> bilinear_resize(const Plane<T>& src, int out_w, int out_h) {
  detail::check_dims(out_w, out_h, "bilinear_resize");
  const int in_w = static_cast<int>(src.cols());
  const int in_h = static_cast<int>(src.rows());
  Plane<T> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto ty = detail::bilinear_tap(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const auto tx = detail::bilinear_tap(x, in_w, out_w);
      const double top = (1.0 - tx.t) * src(ty.i0, tx.i0) + tx.t * src(ty.i0, tx.i1);
      const double bot = (1.0 - tx.t) * src(ty.i1, tx.i0) + tx.t * src(ty.i1, tx.i1);
      out(y, x) = static_cast<T>((1.0 - ty.t) * top + ty.t * bot);
    }
  }
  return out;
}

template <typename T>
Plane<T> nearest_resize(const Plane<T>& src, int out_w, int out_h) {
  detail::check_dims(out_w, out_h, "nearest_resize");
  const int in_w = static_cast<int>(src.cols());
  const int in_h = static_cast<int>(src.rows());
  Plane<T> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = detail::nearest_tap(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) out(y, x) = src(sy, detail::nearest_tap(x, in_w, out_w));
  }
  return out;
}

template <typename T>
Plane<T> crop(const Plane<T>& src, const CropWindow& w) {
  if (w.x0 < 0 || w.y0 < 0 || w.width < 1 || w.height < 1 || w.x0 + w.width > src.cols() ||
      w.y0 + w.height > src.rows()) {
    throw InvalidInput("crop window out of bounds");
  }
  return src.block(w.y0, w.x0, w.height, w.width);
}

/// Bilinear resize that ignores invalid (0) depth samples: the blend weights
/// are renormalized over valid neighbors, and a pixel with no valid
/// neighbor stays invalid. Identical to bilinear_resize on fully valid maps
/// up to rounding of the renormalization.
PlaneF bilinear_resize_depth(const PlaneF& depth, int out_w, int out_h);

DepthMap bilinear_resize(const DepthMap& depth, int out_w, int out_h);
RgbImage bilinear_resize(const RgbImage& rgb, int out_w, int out_h);
ObjectMask nearest_resize(const ObjectMask& mask, int out_w, int out_h);
NormalField nearest_resize(const NormalField& normals, int out_w, int out_h);
ConfidenceMap nearest_resize(const ConfidenceMap& conf, int out_w, int out_h);

/// Largest centered window of a width x height image whose height:width
/// ratio is aspect_h:aspect_w. Odd margins put the extra pixel on the
/// right / bottom.
CropWindow center_crop_to_aspect(int width, int height, int aspect_h, int aspect_w);

DepthMap crop(const DepthMap& depth, const CropWindow& w);
RgbImage crop(const RgbImage& rgb, const CropWindow& w);
ObjectMask crop(const ObjectMask& mask, const CropWindow& w);

/// Divides every valid depth by alpha (a crop covering a fraction alpha of
/// the field of view looks 1/alpha times closer). Invalid pixels stay 0.
DepthMap rescale_depth_for_crop(const DepthMap& depth, double alpha);

}  // namespace cfd
