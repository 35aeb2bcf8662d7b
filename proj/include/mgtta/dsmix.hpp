#pragma once

// Doubly stochastic mixing operators: construction, application to posteriors,
// and the best-fit mixing residual of a posterior against an anchor.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mgtta/simplex.hpp"

namespace mgtta {

using Rng = std::mt19937_64;

inline constexpr double kDsTol = 1e-8;

/// Dense row-major K x K matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t k, double fill = 0.0) : k_(k), a_(k * k, fill) {}
  SquareMatrix(std::size_t k, std::vector<double> row_major);

  static SquareMatrix identity(std::size_t k);

  std::size_t size() const noexcept { return k_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * k_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * k_ + j]; }
  std::span<const double> data() const noexcept { return a_; }

  std::vector<double> apply(std::span<const double> x) const;
  double row_sum(std::size_t i) const;
  double col_sum(std::size_t j) const;
  /// max over rows and columns of |sum - 1|
  double marginal_error() const;

 private:
  std::size_t k_ = 0;
  std::vector<double> a_;
};

/// Nonnegative square matrix with unit row and column sums (within kDsTol).
class DoublyStochasticMatrix {
 public:
  explicit DoublyStochasticMatrix(SquareMatrix m);

  static DoublyStochasticMatrix identity(std::size_t k);

  std::size_t size() const noexcept { return m_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const SquareMatrix& matrix() const noexcept { return m_; }

  /// D * x without any renormalization.
  std::vector<double> apply(std::span<const double> x) const { return m_.apply(x); }

  /// Convex combination (1 - w) * a + w * b.
  static DoublyStochasticMatrix mix(const DoublyStochasticMatrix& a, const DoublyStochasticMatrix& b,
                                    double w);

 private:
  struct Unchecked {};
  DoublyStochasticMatrix(SquareMatrix m, Unchecked) : m_(std::move(m)) {}
  friend struct SinkhornResult sinkhorn_project(const SquareMatrix&, double, int);

  SquareMatrix m_;
};

struct SinkhornResult {
  DoublyStochasticMatrix matrix;
  int iterations;
  bool converged;
  double marginal_error;
};

/// Alternating row/column normalization of a strictly positive matrix. When
/// `converged` is false the returned matrix may miss the DS tolerance.
SinkhornResult sinkhorn_project(const SquareMatrix& m, double tol = 1e-10, int max_iter = 500);

/// Dirichlet(1)-weighted combination of `n_perms` uniform permutation matrices.
DoublyStochasticMatrix random_birkhoff(std::size_t k, std::size_t n_perms, Rng& rng);

/// (1 - s) I + (s / K) J.
DoublyStochasticMatrix blend_identity_uniform(std::size_t k, double s);

DoublyStochasticMatrix permutation_matrix(std::span<const std::size_t> perm);

/// D * pi + residual, clipped at zero and renormalized. The residual must be
/// mass-preserving, and clipping may not remove more than 1e-6 of mass.
Posterior apply_mixing(const DoublyStochasticMatrix& d, const Posterior& pi,
                       std::span<const double> residual = {});

/// Euclidean projection of y onto the permutahedron of w, the convex hull of
/// all rearrangements of w. For w on the simplex this is exactly the set
/// {D w : D doubly stochastic}.
std::vector<double> project_permutahedron(std::span<const double> y, std::span<const double> w);

struct DsFitResult {
  double residual;
  int iterations;
  bool converged;
};

/// min over doubly stochastic D of ||p - D anchor||_1. Solved over the
/// reachable set {D anchor}, the permutahedron of the anchor, by projected
/// subgradient descent from the uniform posterior with Polyak steps toward an
/// adaptively lowered target level. Returns the best objective seen;
/// `converged` means the level gap closed before max_iter.
DsFitResult ds_fit_residual(const Posterior& p, const Posterior& anchor, int max_iter = 500);

}  // namespace mgtta
