#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace cfd {

/// Row-major 2-D field; rows = image height, cols = image width.
template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneF = Plane<float>;
using PlaneD = Plane<double>;
using PlaneU8 = Plane<std::uint8_t>;

/// Pinhole intrinsics in pixel units.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws InvalidInput unless fx, fy > 0 and the principal point lies
  /// inside a width x height image.
  void validate(int width, int height) const;

  /// Intrinsics of the window [x0, x0 + w) x [y0, y0 + h).
  Intrinsics cropped(int x0, int y0) const { return {fx, fy, cx - x0, cy - y0}; }

  /// Intrinsics after resampling a width x height image to out_w x out_h with
  /// half-pixel-center alignment.
  Intrinsics resized(int width, int height, int out_w, int out_h) const;

  bool operator==(const Intrinsics&) const = default;
};

/// Metric depth in meters. 0 marks an invalid / missing measurement.
struct DepthMap {
  PlaneF data;
  Intrinsics intrinsics;

  DepthMap() = default;
  DepthMap(int width, int height, const Intrinsics& intr, float fill = 0.0f)
      : data(PlaneF::Constant(height, width, fill)), intrinsics(intr) {}
  DepthMap(PlaneF d, const Intrinsics& intr) : data(std::move(d)), intrinsics(intr) {}

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }
  bool valid(int y, int x) const { return data(y, x) > 0.0f; }
};

/// Three channels in [0, 1].
struct RgbImage {
  std::array<PlaneF, 3> ch;

  RgbImage() = default;
  RgbImage(int width, int height, float fill = 0.0f) {
    for (auto& c : ch) c = PlaneF::Constant(height, width, fill);
  }

  int width() const { return static_cast<int>(ch[0].cols()); }
  int height() const { return static_cast<int>(ch[0].rows()); }
};

/// 0 = pixel on the object to remove, 1 = keep.
struct ObjectMask {
  PlaneU8 data;

  ObjectMask() = default;
  ObjectMask(int width, int height, std::uint8_t fill = 1)
      : data(PlaneU8::Constant(height, width, fill)) {}
  explicit ObjectMask(PlaneU8 d) : data(std::move(d)) {}

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }
  bool removed(int y, int x) const { return data(y, x) == 0; }
  int removed_count() const { return static_cast<int>((data == 0).count()); }
};

/// Per-pixel unit normals. Invalid pixels hold (0, 0, 0). Stored in double
/// precision; the PFM codec writes them as 32-bit floats.
struct NormalField {
  std::array<PlaneD, 3> ch;

  NormalField() = default;
  NormalField(int width, int height) {
    for (auto& c : ch) c = PlaneD::Zero(height, width);
  }

  int width() const { return static_cast<int>(ch[0].cols()); }
  int height() const { return static_cast<int>(ch[0].rows()); }
  bool valid(int y, int x) const {
    return ch[0](y, x) != 0.0 || ch[1](y, x) != 0.0 || ch[2](y, x) != 0.0;
  }
  Eigen::Vector3d at(int y, int x) const {
    return {ch[0](y, x), ch[1](y, x), ch[2](y, x)};
  }
  void set(int y, int x, const Eigen::Vector3d& n) {
    ch[0](y, x) = n.x();
    ch[1](y, x) = n.y();
    ch[2](y, x) = n.z();
  }
};

/// Per-pixel weights in [0, 1]; exactly 0 at invalid pixels.
struct ConfidenceMap {
  PlaneD data;

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }
};

}  // namespace cfd
