#include "cfdepth/normals.hpp"

#include "cfdepth/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace cfd {

void BinGrid::validate() const {
  if (n_latitudes < 1 || n_azimuths < 1) throw InvalidInput("BinGrid: bin counts must be >= 1");
  if (!(beta > 0.0)) throw InvalidInput("BinGrid: beta must be positive");
  if (!(azimuth_phase >= 0.0 && azimuth_phase < 1.0)) throw InvalidInput("BinGrid: azimuth_phase must lie in [0, 1)");
}

Eigen::Vector3d BinGrid::center(int bin) const {
  const int band = bin / n_azimuths;
  const int sector = bin % n_azimuths;
  const double theta = (band + 0.5) * (0.5 * std::numbers::pi / n_latitudes);
  const double phi = (sector + 0.5 - azimuth_phase) * (2.0 * std::numbers::pi / n_azimuths);
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::vector<Eigen::Vector3d> BinGrid::centers() const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(size());
  for (int b = 0; b < size(); ++b) out.push_back(center(b));
  return out;
}

int BinGrid::nearest(const Eigen::Vector3d& n) const {
  int best = 0;
  double best_dot = -2.0;
  for (int b = 0; b < size(); ++b) {
    const double d = center(b).dot(n);
    if (d > best_dot) {
      best_dot = d;
      best = b;
    }
  }
  return best;
}

NormalField gradient_normals(const DepthMap& depth) {
  const int w = depth.width();
  const int h = depth.height();
  const auto& d = depth.data;
  NormalField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(d(y, x) > 0.0f)) continue;
      double sx = 0.0;
      double sy = 0.0;
      int nx = 0;
      int ny = 0;
      for (int i = 1; i <= kGradientOffsets; ++i) {
        if (x - i >= 0 && x + i < w && d(y, x - i) > 0.0f && d(y, x + i) > 0.0f) {
          sx += (static_cast<double>(d(y, x + i)) - d(y, x - i)) / (2.0 * i);
          ++nx;
        }
        if (y - i >= 0 && y + i < h && d(y - i, x) > 0.0f && d(y + i, x) > 0.0f) {
          sy += (static_cast<double>(d(y + i, x)) - d(y - i, x)) / (2.0 * i);
          ++ny;
        }
      }
      if (nx == 0 || ny == 0) continue;
      const Eigen::Vector3d n(depth.intrinsics.fx * sx / nx, depth.intrinsics.fy * sy / ny, 1.0);
      out.set(y, x, n.normalized());
    }
  }
  return out;
}

NormalField central_difference_normals(const DepthMap& depth) {
  const int w = depth.width();
  const int h = depth.height();
  const auto& d = depth.data;
  NormalField out(w, h);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!(d(y, x) > 0.0f && d(y, x - 1) > 0.0f && d(y, x + 1) > 0.0f && d(y - 1, x) > 0.0f &&
            d(y + 1, x) > 0.0f)) {
        continue;
      }
      const double gx = (static_cast<double>(d(y, x + 1)) - d(y, x - 1)) / 2.0;
      const double gy = (static_cast<double>(d(y + 1, x)) - d(y - 1, x)) / 2.0;
      out.set(y, x, Eigen::Vector3d(depth.intrinsics.fx * gx, depth.intrinsics.fy * gy, 1.0).normalized());
    }
  }
  return out;
}

namespace {

constexpr int kWindowLo = -3;
constexpr int kWindowHi = 4;
constexpr double kWindowSlots = 64.0;

// Sum over offsets kWindowLo..kWindowHi along rows then columns; entries
// outside the image contribute nothing. Fixed order for every pixel.
PlaneD box_sum_8x8(const PlaneD& s) {
  const int h = static_cast<int>(s.rows());
  const int w = static_cast<int>(s.cols());
  PlaneD rows = PlaneD::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = kWindowLo; k <= kWindowHi; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) acc += s(y, xx);
      }
      rows(y, x) = acc;
    }
  }
  PlaneD out = PlaneD::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = kWindowLo; k <= kWindowHi; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) acc += rows(yy, x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

double score_term(double dot, double beta) {
  if (!(dot > 0.0)) return 0.0;
  if (beta == 8.0) {
    const double d2 = dot * dot;
    const double d4 = d2 * d2;
    return d4 * d4;
  }
  return std::pow(dot, beta);
}

}  // namespace

SmoothedNormals quantized_smoothed_normals(const NormalField& raw, const BinGrid& grid) {
  grid.validate();
  const int w = raw.width();
  const int h = raw.height();

  PlaneD best_score = PlaneD::Constant(h, w, -1.0);
  Plane<int> best_bin = Plane<int>::Zero(h, w);
  PlaneD s(h, w);
  for (int b = 0; b < grid.size(); ++b) {
    const Eigen::Vector3d nb = grid.center(b);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        s(y, x) = raw.valid(y, x) ? score_term(raw.at(y, x).dot(nb), grid.beta) : 0.0;
      }
    }
    const PlaneD sums = box_sum_8x8(s);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double score = sums(y, x) / kWindowSlots;
        if (score > best_score(y, x)) {
          best_score(y, x) = score;
          best_bin(y, x) = b;
        }
      }
    }
  }

  const auto centers = grid.centers();
  SmoothedNormals out{NormalField(w, h), ConfidenceMap{PlaneD::Zero(h, w)}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!raw.valid(y, x)) continue;
      out.normals.set(y, x, centers[best_bin(y, x)]);
      out.confidence.data(y, x) = best_score(y, x);
    }
  }
  return out;
}

NormalField planefit_normals(const DepthMap& depth, int window) {
  if (window < 3 || window % 2 == 0) throw InvalidInput("planefit_normals: window must be odd and >= 3");
  const int w = depth.width();
  const int h = depth.height();
  const int half = window / 2;
  const Intrinsics& k = depth.intrinsics;
  NormalField out(w, h);

  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.valid(y, x)) continue;
      pts.clear();
      for (int yy = std::max(0, y - half); yy <= std::min(h - 1, y + half); ++yy) {
        for (int xx = std::max(0, x - half); xx <= std::min(w - 1, x + half); ++xx) {
          const double d = depth.data(yy, xx);
          if (!(d > 0.0)) continue;
          pts.emplace_back((xx - k.cx) * d / k.fx, (yy - k.cy) * d / k.fy, d);
        }
      }
      if (pts.size() < 3) continue;
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& p : pts) mean += p;
      mean /= static_cast<double>(pts.size());
      Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
      for (const auto& p : pts) {
        const Eigen::Vector3d q = p - mean;
        scatter.noalias() += q * q.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
      Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
      if (n.z() < 0.0) n = -n;
      if (!(n.z() > 0.0)) continue;
      out.set(y, x, n);
    }
  }
  return out;
}

NormalField geometric_to_gradient_convention(const NormalField& geometric, const DepthMap& depth) {
  const int w = geometric.width();
  const int h = geometric.height();
  if (depth.width() != w || depth.height() != h) throw InvalidInput("dimension mismatch");
  const Intrinsics& k = depth.intrinsics;
  NormalField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!geometric.valid(y, x) || !depth.valid(y, x)) continue;
      const Eigen::Vector3d n = geometric.at(y, x);
      // Plane n . P = c through P = d * ray(x, y) gives
      // f_x * dd/dx = -d * n_x / (n . ray) and likewise for y.
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const double denom = n.dot(ray);
      if (std::abs(denom) < 1e-12) continue;
      const double d = depth.data(y, x);
      out.set(y, x, Eigen::Vector3d(-d * n.x() / denom, -d * n.y() / denom, 1.0).normalized());
    }
  }
  return out;
}

double normal_accuracy(const NormalField& pred, const NormalField& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw InvalidInput("normal_accuracy: dimension mismatch");
  }
  double sum = 0.0;
  long count = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!pred.valid(y, x) || !truth.valid(y, x)) continue;
      sum += pred.at(y, x).dot(truth.at(y, x));
      ++count;
    }
  }
  if (count == 0) throw InvalidInput("normal_accuracy: no pixel valid in both fields");
  return sum / static_cast<double>(count);
}

}  // namespace cfd
