#pragma once

#include "cfdepth/image.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace cfd {

/// Latitude / azimuth quantization of the viewer-facing hemisphere.
/// Polar angle [0, 90] deg is split into n_latitudes bands and azimuth
/// [0, 360) deg into n_azimuths sectors; each bin is represented by the
/// direction at its band / sector center. Bin index = band * n_azimuths +
/// sector.
struct BinGrid {
  int n_latitudes = 16;
  int n_azimuths = 4;
  double beta = 8.0;
  /// Sector k is centered at (k + 0.5 - azimuth_phase) * 360 / n_azimuths
  /// degrees. The default 0.5 puts centers on the image axes, where floor
  /// and wall normals of an upright camera cluster.
  double azimuth_phase = 0.5;

  void validate() const;
  int size() const { return n_latitudes * n_azimuths; }
  Eigen::Vector3d center(int bin) const;
  std::vector<Eigen::Vector3d> centers() const;
  /// Bin whose center has the largest dot product with n (lowest index on ties).
  int nearest(const Eigen::Vector3d& n) const;
};

/// Window-gradient normals: for each axis the depth slope is averaged over
/// symmetric offsets i = 1..8, scaled by the focal length, and combined with
/// n_z = 1 before normalization. Offsets whose two samples are out of range
/// or invalid are skipped and the average runs over the remaining ones; a
/// pixel with an invalid center, or with no usable offset on some axis, is
/// invalid.
NormalField gradient_normals(const DepthMap& depth);

/// Single-step central differences, normalize(fx * dd/dx, fy * dd/dy, 1).
/// Pixels on the border or next to an invalid sample are invalid.
NormalField central_difference_normals(const DepthMap& depth);

/// Number of symmetric offsets used by gradient_normals.
inline constexpr int kGradientOffsets = 8;

struct SmoothedNormals {
  NormalField normals;
  ConfidenceMap confidence;
};

/// Weighted quantized smoothing. Every bin is scored over the pixel's 8x8
/// neighborhood (offsets -3..+4) as mean over 64 slots of
/// max(n_q . n_b, 0)^beta, with out-of-range or invalid neighbors counting
/// as 0. The best bin's center becomes the normal and its score the
/// confidence. Pixels invalid in `raw` stay invalid with confidence 0.
SmoothedNormals quantized_smoothed_normals(const NormalField& raw, const BinGrid& grid = {});

/// Per-pixel total-least-squares plane fit over a window x window patch of
/// back-projected points, oriented so n_z > 0. Returns geometric normals in
/// the camera frame; pixels with fewer than 3 valid points are invalid.
NormalField planefit_normals(const DepthMap& depth, int window = 9);

/// Re-expresses camera-frame geometric normals in the depth-gradient
/// convention used by gradient_normals (f * dd/dx, f * dd/dy, 1), using the
/// depth at each pixel. Pixels where the conversion is undefined become
/// invalid.
NormalField geometric_to_gradient_convention(const NormalField& geometric, const DepthMap& depth);

/// Mean dot product over pixels valid in both fields.
double normal_accuracy(const NormalField& pred, const NormalField& truth);

}  // namespace cfd
