#pragma once

// Brute-force reference computations used to check the solvers and the
// analytic gradient. Nothing here shares code with the routines it checks.

#include <cstddef>
#include <functional>

#include "mgtta/gate_adapt.hpp"
#include "mgtta/simplex.hpp"

namespace mgtta::oracle {

/// min ||p - D anchor||_1 over convex combinations of all K! permutation
/// matrices with weights on a grid of the given resolution. K <= 3 only.
double grid_ds_fit(const Posterior& p, const Posterior& anchor, double resolution = 0.02);

/// Central finite differences of f at params with step h.
GateParams central_difference(const std::function<double(const GateParams&)>& f,
                              const GateParams& params, double h = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
double relative_error(const GateParams& a, const GateParams& b, double floor = 1e-12);

struct MarginSweep {
  int sign_changes = 0;
  double crossing = -1.0;  // midpoint of the first bracketing pair of grid points
  double spacing = 0.0;
};

/// Evaluates fuse_probs(alpha, p_v, p_t)[c] - [j] on `points` evenly spaced
/// alphas in [0,1] and records where the sign changes.
MarginSweep sweep_fused_margin(const Posterior& p_v, const Posterior& p_t, std::size_t c,
                               std::size_t j, int points = 1000);

}  // namespace mgtta::oracle
