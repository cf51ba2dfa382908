#include "cfdepth/baselines.hpp"

#include "cfdepth/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace cfd {

PoissonSolution poisson_solve(const DepthMap& depth, const ObjectMask& mask, double tolerance) {
  const int w = depth.width();
  const int h = depth.height();
  if (mask.width() != w || mask.height() != h) {
    throw InvalidInput("poisson_fill: mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                       ", depth is " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (mask.removed_count() == static_cast<long>(w) * h) throw InvalidInput("poisson_fill: mask has no boundary");

  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> index =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(h, w, -1);
  int n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.removed(y, x)) {
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
          throw BoundaryError("poisson_fill: hole touches the image border at (" + std::to_string(x) + ", " +
                              std::to_string(y) + ")");
        }
        index(y, x) = n++;
      }

  PoissonSolution out;
  out.depth = depth.data.cast<double>();
  out.unknowns = n;
  if (n == 0) return out;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(5 * static_cast<std::size_t>(n));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const int i = index(y, x);
      if (i < 0) continue;
      triplets.emplace_back(i, i, 4.0);
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dy[k];
        const int nx = x + dx[k];
        const int j = index(ny, nx);
        if (j >= 0) {
          triplets.emplace_back(i, j, -1.0);
        } else if (depth.valid(ny, nx)) {
          rhs[i] += depth.data(ny, nx);
        } else {
          throw BoundaryError("poisson_fill: boundary pixel (" + std::to_string(nx) + ", " + std::to_string(ny) +
                              ") has no valid depth");
        }
      }
    }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-15);
  cg.setMaxIterations(20 * n + 100);
  cg.compute(a);
  Eigen::VectorXd sol = cg.solve(rhs);
  out.iterations = static_cast<int>(cg.iterations());
  out.residual = (a * sol - rhs).lpNorm<Eigen::Infinity>();
  if (!(out.residual < tolerance)) {
    // One refinement pass on the residual equation recovers digits lost to
    // the relative stopping rule on large right-hand sides.
    sol += cg.solve(rhs - a * sol);
    out.iterations += static_cast<int>(cg.iterations());
    out.residual = (a * sol - rhs).lpNorm<Eigen::Infinity>();
  }
  if (!(out.residual < tolerance)) {
    throw NumericError("poisson_fill: residual " + std::to_string(out.residual) + " after " +
                       std::to_string(out.iterations) + " iterations");
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (index(y, x) >= 0) out.depth(y, x) = sol[index(y, x)];
  return out;
}

DepthMap poisson_fill(const DepthMap& depth, const ObjectMask& mask) {
  const PoissonSolution s = poisson_solve(depth, mask);
  DepthMap out = depth;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (mask.removed(y, x)) out.data(y, x) = static_cast<float>(s.depth(y, x));
  return out;
}

}  // namespace cfd
