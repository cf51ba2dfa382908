#include "cfdepth/augment.hpp"

#include "cfdepth/errors.hpp"
#include "cfdepth/geometry.hpp"
#include "cfdepth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cfd {

namespace {

// Output pixel -> source coordinate for a rotation about the center
// followed by a zoom of 1 / scale about the center.
struct Warp {
  double c;
  double s;
  double scale;
  double cx;
  double cy;

  Warp(int w, int h, double deg) {
    const double t = deg * std::numbers::pi / 180.0;
    c = std::cos(t);
    s = std::sin(t);
    const double ac = std::abs(c);
    const double as = std::abs(s);
    scale = std::min(w / (w * ac + h * as), h / (w * as + h * ac));
    cx = 0.5 * (w - 1);
    cy = 0.5 * (h - 1);
  }

  std::pair<double, double> operator()(int x, int y) const {
    const double dx = scale * (x - cx);
    const double dy = scale * (y - cy);
    return {cx + c * dx + s * dy, cy - s * dx + c * dy};
  }
};

struct Taps {
  int x0, x1, y0, y1;
  double tx, ty;
};

Taps taps_at(double sx, double sy, int w, int h) {
  sx = std::clamp(sx, 0.0, w - 1.0);
  sy = std::clamp(sy, 0.0, h - 1.0);
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  return {x0, std::min(x0 + 1, w - 1), y0, std::min(y0 + 1, h - 1), sx - x0, sy - y0};
}

PlaneF warp_bilinear(const PlaneF& src, const Warp& warp) {
  const int w = static_cast<int>(src.cols());
  const int h = static_cast<int>(src.rows());
  PlaneF out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = warp(x, y);
      const Taps t = taps_at(sx, sy, w, h);
      const double top = (1.0 - t.tx) * src(t.y0, t.x0) + t.tx * src(t.y0, t.x1);
      const double bot = (1.0 - t.tx) * src(t.y1, t.x0) + t.tx * src(t.y1, t.x1);
      out(y, x) = static_cast<float>((1.0 - t.ty) * top + t.ty * bot);
    }
  }
  return out;
}

// Bilinear with weights renormalized over valid (> 0) taps.
PlaneF warp_depth(const PlaneF& src, const Warp& warp) {
  const int w = static_cast<int>(src.cols());
  const int h = static_cast<int>(src.rows());
  PlaneF out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = warp(x, y);
      const Taps t = taps_at(sx, sy, w, h);
      const float v[4] = {src(t.y0, t.x0), src(t.y0, t.x1), src(t.y1, t.x0), src(t.y1, t.x1)};
      const double wt[4] = {(1.0 - t.ty) * (1.0 - t.tx), (1.0 - t.ty) * t.tx, t.ty * (1.0 - t.tx), t.ty * t.tx};
      double acc = 0.0;
      double sum = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (v[k] > 0.0f && wt[k] > 0.0) {
          acc += wt[k] * v[k];
          sum += wt[k];
        }
      }
      out(y, x) = sum > 0.0 ? static_cast<float>(acc / sum) : 0.0f;
    }
  }
  return out;
}

PlaneU8 warp_nearest(const PlaneU8& src, const Warp& warp) {
  const int w = static_cast<int>(src.cols());
  const int h = static_cast<int>(src.rows());
  PlaneU8 out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = warp(x, y);
      const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
      const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
      out(y, x) = src(iy, ix);
    }
  }
  return out;
}

template <typename T>
Plane<T> mirrored(const Plane<T>& p) {
  return p.rowwise().reverse();
}

DepthMap mirrored(const DepthMap& d) {
  DepthMap out(mirrored(d.data), d.intrinsics);
  out.intrinsics.cx = d.width() - 1 - d.intrinsics.cx;
  return out;
}

void check_params(double lo, double hi, double min, double max, const char* what) {
  if (!(lo <= hi) || lo < min || hi > max) throw InvalidInput(std::string("augment: bad ") + what + " range");
}

AugSample crop_rescale_geometry(const AugSample& s, double alpha, int x0, int y0, int aspect_h, int aspect_w) {
  if (!(alpha >= 2.0 / 3.0 - 1e-12 && alpha <= 1.0)) {
    throw InvalidInput("random_crop_rescale: alpha must lie in [2/3, 1], got " + std::to_string(alpha));
  }
  const CropWindow win = crop_window_for(s.rgb.width(), s.rgb.height(), alpha, x0, y0, aspect_h, aspect_w);
  AugSample out;
  out.rgb = crop(s.rgb, win);
  out.mask = crop(s.mask, win);
  out.depth_with = rescale_depth_for_crop(crop(s.depth_with, win), alpha);
  out.depth_without = rescale_depth_for_crop(crop(s.depth_without, win), alpha);
  for (DepthMap* d : {&out.depth_with, &out.depth_without}) {
    d->intrinsics.fx *= alpha;
    d->intrinsics.fy *= alpha;
  }
  out.flipped = s.flipped.size() ? crop(s.flipped, win) : PlaneU8::Zero(win.height, win.width);
  return out;
}

AugSample jitter_geometry(const AugSample& s, const JitterParams& p) {
  for (double c : p.color) {
    if (!(c >= 0.0)) throw InvalidInput("geometric_color_jitter: color weights must be non-negative");
  }
  AugSample out = s;
  if (out.flipped.size() == 0) out.flipped = PlaneU8::Zero(s.rgb.height(), s.rgb.width());
  if (p.rotation_deg != 0.0) {
    const Warp warp(s.rgb.width(), s.rgb.height(), p.rotation_deg);
    for (int c = 0; c < 3; ++c) out.rgb.ch[c] = warp_bilinear(s.rgb.ch[c], warp);
    out.mask.data = warp_nearest(s.mask.data, warp);
    out.flipped = warp_nearest(out.flipped, warp);
    out.depth_with.data = warp_depth(s.depth_with.data, warp);
    out.depth_without.data = warp_depth(s.depth_without.data, warp);
  }
  if (p.flip) {
    for (auto& c : out.rgb.ch) c = mirrored(c);
    out.mask.data = mirrored(out.mask.data);
    out.flipped = mirrored(out.flipped);
    out.depth_with = mirrored(out.depth_with);
    out.depth_without = mirrored(out.depth_without);
  }
  for (int c = 0; c < 3; ++c) {
    if (p.color[c] == 1.0) continue;
    const double k = p.color[c];
    out.rgb.ch[c] = out.rgb.ch[c].unaryExpr([k](float v) { return static_cast<float>(std::min(1.0, v * k)); });
  }
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  check_params(alpha_min, alpha_max, 2.0 / 3.0 - 1e-12, 1.0, "crop fraction");
  if (!(rotation_deg >= 0.0 && rotation_deg <= 45.0)) throw InvalidInput("augment: rotation must lie in [0, 45]");
  check_params(flip_prob, flip_prob, 0.0, 1.0, "flip probability");
  check_params(color_min, color_max, 0.0, 1e9, "color weight");
  check_params(dropout_rate, dropout_rate, 0.0, 1.0, "dropout rate");
  if (out_width < 1 || out_height < 1) throw InvalidInput("augment: output size must be positive");
  grid.validate();
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.alpha_min = 1.0;
  c.rotation_deg = 0.0;
  c.flip_prob = 0.0;
  c.color_min = 1.0;
  c.color_max = 1.0;
  c.dropout_rate = 0.0;
  return c;
}

void refresh_normals(AugSample& s, const BinGrid& grid) {
  SmoothedNormals sm = quantized_smoothed_normals(gradient_normals(s.depth_without), grid);
  s.normals = std::move(sm.normals);
  s.confidence = std::move(sm.confidence);
}

namespace {

AugSample wrap_record(const SampleRecord& rec, bool removal) {
  AugSample s;
  s.rgb = rec.rgb;
  s.depth_with = rec.depth_with;
  if (removal) {
    s.mask = rec.mask;
    s.depth_without = rec.depth_without;
  } else {
    s.mask = ObjectMask(rec.mask.width(), rec.mask.height(), 1);
    s.depth_without = rec.depth_with;
  }
  s.flipped = PlaneU8::Zero(rec.mask.height(), rec.mask.width());
  return s;
}

AugSample resized(AugSample a, int ow, int oh) {
  a.rgb = bilinear_resize(a.rgb, ow, oh);
  a.mask = nearest_resize(a.mask, ow, oh);
  a.flipped = nearest_resize(a.flipped, ow, oh);
  a.depth_with = bilinear_resize(a.depth_with, ow, oh);
  a.depth_without = bilinear_resize(a.depth_without, ow, oh);
  return a;
}

AugSample augment_geometry(const AugSample& s, std::uint64_t seed, const AugmentConfig& config) {
  config.validate();
  Rng rng(seed);
  const int w = s.rgb.width();
  const int h = s.rgb.height();
  const double alpha = rng.uniform(config.alpha_min, config.alpha_max);
  const CropWindow size = crop_window_for(w, h, alpha, 0, 0, config.out_height, config.out_width);
  const int x0 = rng.uniform_int(0, w - size.width);
  const int y0 = rng.uniform_int(0, h - size.height);
  JitterParams jp;
  jp.rotation_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);
  jp.flip = rng.bernoulli(config.flip_prob);
  for (double& c : jp.color) c = rng.uniform(config.color_min, config.color_max);
  const std::uint64_t dropout_seed = rng.next();

  AugSample a = resized(jitter_geometry(crop_rescale_geometry(s, alpha, x0, y0, config.out_height, config.out_width), jp),
                        config.out_width, config.out_height);
  DropoutResult d = mask_dropout(a.mask, config.dropout_rate, dropout_seed);
  a.mask = std::move(d.mask);
  a.flipped = a.flipped.max(d.flipped);
  refresh_normals(a, config.grid);
  return a;
}

}  // namespace

AugSample make_aug_sample(const SampleRecord& rec, bool removal, const BinGrid& grid) {
  AugSample s = wrap_record(rec, removal);
  refresh_normals(s, grid);
  return s;
}

CropWindow crop_window_for(int width, int height, double alpha, int x0, int y0, int aspect_h, int aspect_w) {
  const CropWindow full = center_crop_to_aspect(width, height, aspect_h, aspect_w);
  const int cw = std::clamp(static_cast<int>(std::lround(alpha * full.width)), 1, full.width);
  const int ch = std::clamp(static_cast<int>(std::lround(alpha * full.height)), 1, full.height);
  if (x0 < 0 || y0 < 0 || x0 + cw > width || y0 + ch > height) {
    throw InvalidInput("random_crop_rescale: crop window out of bounds");
  }
  return {x0, y0, cw, ch};
}

AugSample random_crop_rescale(const AugSample& s, double alpha, int x0, int y0, int aspect_h, int aspect_w,
                              const BinGrid& grid) {
  AugSample out = crop_rescale_geometry(s, alpha, x0, y0, aspect_h, aspect_w);
  refresh_normals(out, grid);
  return out;
}

AugSample geometric_color_jitter(const AugSample& s, const JitterParams& params, const BinGrid& grid) {
  AugSample out = jitter_geometry(s, params);
  refresh_normals(out, grid);
  return out;
}

DropoutResult mask_dropout(const ObjectMask& mask, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInput("mask_dropout: rate must lie in [0, 1]");
  Rng rng(seed);
  DropoutResult r;
  r.flipped = PlaneU8::Zero(mask.height(), mask.width());
  for (Eigen::Index i = 0; i < r.flipped.size(); ++i) r.flipped.data()[i] = rng.bernoulli(rate) ? 1 : 0;
  r.mask = mask;
  for (Eigen::Index i = 0; i < r.flipped.size(); ++i) {
    if (r.flipped.data()[i]) r.mask.data.data()[i] = mask.data.data()[i] == 0 ? 1 : 0;
  }
  return r;
}

AugSample augment_sample(const AugSample& s, std::uint64_t seed, const AugmentConfig& config) {
  return augment_geometry(s, seed, config);
}

AugSample augment_sample(const SampleRecord& rec, bool removal, std::uint64_t seed, const AugmentConfig& config) {
  return augment_geometry(wrap_record(rec, removal), seed, config);
}

AugSample center_sample(const SampleRecord& rec, bool removal, int out_width, int out_height, const BinGrid& grid) {
  const CropWindow c = center_crop_to_aspect(rec.rgb.width(), rec.rgb.height(), out_height, out_width);
  AugSample s = wrap_record(rec, removal);
  s.rgb = crop(s.rgb, c);
  s.mask = crop(s.mask, c);
  s.flipped = crop(s.flipped, c);
  s.depth_with = crop(s.depth_with, c);
  s.depth_without = crop(s.depth_without, c);
  AugSample out = resized(std::move(s), out_width, out_height);
  refresh_normals(out, grid);
  return out;
}

}  // namespace cfd
