#pragma once

#include "cfdepth/image.hpp"

namespace cfd {

struct PoissonSolution {
  PlaneD depth;           // input depth with the hole filled, in double
  int unknowns = 0;
  int iterations = 0;
  double residual = 0.0;  // max-norm of the Laplacian residual over the hole
};

/// Membrane infill: solves the 5-point Laplace equation over mask-0 pixels
/// with Dirichlet values from the adjacent mask-1 depths. Mask-1 pixels
/// are copied unchanged. BoundaryError when the hole touches the image
/// border or a boundary neighbor has no valid depth; InvalidInput when the
/// mask has no mask-1 pixel; NumericError if the solver stalls above
/// `tolerance`.
PoissonSolution poisson_solve(const DepthMap& depth, const ObjectMask& mask, double tolerance = 1e-8);

/// poisson_solve rounded to float; mask-1 pixels keep their exact bits.
DepthMap poisson_fill(const DepthMap& depth, const ObjectMask& mask);

/// The mask is ignored: returns its input.
inline DepthMap do_nothing(const DepthMap& depth) { return depth; }

}  // namespace cfd
