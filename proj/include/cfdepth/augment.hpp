#pragma once

#include "cfdepth/geometry.hpp"
#include "cfdepth/image.hpp"
#include "cfdepth/normals.hpp"
#include "cfdepth/synthgen.hpp"

#include <array>
#include <cstdint>

namespace cfd {

struct AugmentConfig {
  double alpha_min = 2.0 / 3.0;  // crop fraction range
  double alpha_max = 1.0;
  double rotation_deg = 5.0;     // angles drawn from [-rotation_deg, rotation_deg]
  double flip_prob = 0.5;
  double color_min = 0.8;        // per-channel RGB multiplier range
  double color_max = 1.2;
  double dropout_rate = 0.1;
  int out_width = 80;            // network input size
  int out_height = 64;
  BinGrid grid;

  void validate() const;
  /// Collapsed ranges: no crop, rotation, flip, color change or dropout.
  static AugmentConfig identity();
};

/// A training example after augmentation. `depth_without` is the target;
/// normals and confidence always belong to it. `flipped` is 1 where mask
/// dropout changed the mask.
struct AugSample {
  RgbImage rgb;
  ObjectMask mask;
  DepthMap depth_with;
  DepthMap depth_without;
  NormalField normals;
  ConfidenceMap confidence;
  PlaneU8 flipped;
};

/// Recomputes normals and confidence from depth_without.
void refresh_normals(AugSample& s, const BinGrid& grid = {});

/// Wraps a dataset record. A removal sample keeps the object mask and
/// targets depth_without; an empty-mask sample gets an all-ones mask and
/// targets depth_with (nothing is removed).
AugSample make_aug_sample(const SampleRecord& rec, bool removal, const BinGrid& grid = {});

/// Crops the window of size alpha times the largest centered aspect_h :
/// aspect_w window with its top-left corner at (x0, y0), and divides both
/// depths by alpha. The focal lengths are scaled by alpha so the crop keeps
/// the nominal field of view of the full frame. Normals are recomputed.
AugSample random_crop_rescale(const AugSample& s, double alpha, int x0, int y0, int aspect_h, int aspect_w,
                              const BinGrid& grid = {});

/// Size of the crop random_crop_rescale takes.
CropWindow crop_window_for(int width, int height, double alpha, int x0, int y0, int aspect_h, int aspect_w);

struct JitterParams {
  double rotation_deg = 0.0;
  bool flip = false;
  std::array<double, 3> color{1.0, 1.0, 1.0};
};

/// Rotates about the image center (bilinear for images and depths, nearest
/// for the mask), zooms to the largest inscribed window of the same aspect,
/// mirrors horizontally if requested, then scales the RGB channels and
/// clamps to [0, 1]. Depth values are not changed by the rotation.
/// Normals are recomputed.
AugSample geometric_color_jitter(const AugSample& s, const JitterParams& params, const BinGrid& grid = {});

struct DropoutResult {
  ObjectMask mask;
  PlaneU8 flipped;  // 1 at flipped pixels
};

/// Flips each mask pixel independently with probability `rate`. All flip
/// decisions are drawn before the mask is read.
DropoutResult mask_dropout(const ObjectMask& mask, double rate, std::uint64_t seed);

/// Crop-rescale, rotation / flip / color, resize to the network input size,
/// then mask dropout. Parameters are drawn from Rng(seed) in this order:
/// alpha, anchor x, anchor y, rotation, flip, three color weights, dropout
/// seed.
AugSample augment_sample(const AugSample& s, std::uint64_t seed, const AugmentConfig& config = {});

/// augment_sample on make_aug_sample(rec, removal) without computing the
/// intermediate full-size normals.
AugSample augment_sample(const SampleRecord& rec, bool removal, std::uint64_t seed, const AugmentConfig& config = {});

/// Un-augmented sample at out_width x out_height: the largest centered crop
/// with that aspect, resized, with normals.
AugSample center_sample(const SampleRecord& rec, bool removal, int out_width, int out_height,
                        const BinGrid& grid = {});

}  // namespace cfd
