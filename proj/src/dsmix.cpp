#include "mgtta/dsmix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mgtta {

SquareMatrix::SquareMatrix(std::size_t k, std::vector<double> row_major)
    : k_(k), a_(std::move(row_major)) {
  require(a_.size() == k_ * k_, ErrorKind::dimension_mismatch, "matrix data is not K*K");
}

SquareMatrix SquareMatrix::identity(std::size_t k) {
  SquareMatrix m(k);
  for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> SquareMatrix::apply(std::span<const double> x) const {
  require_same_dim(k_, x.size(), "matrix apply");
  std::vector<double> y(k_, 0.0);
  for (std::size_t i = 0; i < k_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k_; ++j) acc += a_[i * k_ + j] * x[j];
    y[i] = acc;
  }
  return y;
}

double SquareMatrix::row_sum(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < k_; ++j) s += (*this)(i, j);
  return s;
}

double SquareMatrix::col_sum(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, j);
  return s;
}

double SquareMatrix::marginal_error() const {
  double err = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    err = std::max(err, std::abs(row_sum(i) - 1.0));
    err = std::max(err, std::abs(col_sum(i) - 1.0));
  }
  return err;
}

DoublyStochasticMatrix::DoublyStochasticMatrix(SquareMatrix m) : m_(std::move(m)) {
  require(m_.size() >= 1, ErrorKind::invalid_argument, "empty matrix");
  for (double x : m_.data()) {
    require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument,
            "doubly stochastic entries must be nonnegative");
  }
  require(m_.marginal_error() <= kDsTol, ErrorKind::invalid_argument,
          "row/column sums deviate from 1 by " + std::to_string(m_.marginal_error()));
}

DoublyStochasticMatrix DoublyStochasticMatrix::identity(std::size_t k) {
  return DoublyStochasticMatrix(SquareMatrix::identity(k));
}

DoublyStochasticMatrix DoublyStochasticMatrix::mix(const DoublyStochasticMatrix& a,
                                                   const DoublyStochasticMatrix& b, double w) {
  require_same_dim(a.size(), b.size(), "mix");
  require(w >= 0.0 && w <= 1.0, ErrorKind::invalid_argument, "mix weight outside [0,1]");
  const std::size_t k = a.size();
  SquareMatrix m(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) m(i, j) = (1.0 - w) * a(i, j) + w * b(i, j);
  }
  return DoublyStochasticMatrix(std::move(m));
}

SinkhornResult sinkhorn_project(const SquareMatrix& m, double tol, int max_iter) {
  const std::size_t k = m.size();
  require(k >= 1, ErrorKind::invalid_argument, "empty matrix");
  for (double x : m.data()) {
    require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument,
            "sinkhorn input must be nonnegative");
  }
  SquareMatrix a = m;
  for (std::size_t i = 0; i < k; ++i) {
    require(a.row_sum(i) > 0.0 && a.col_sum(i) > 0.0, ErrorKind::invalid_argument,
            "sinkhorn input has an all-zero row or column");
  }

  int it = 0;
  double err = a.marginal_error();
  while (err >= tol && it < max_iter) {
    for (std::size_t i = 0; i < k; ++i) {
      const double s = a.row_sum(i);
      for (std::size_t j = 0; j < k; ++j) a(i, j) /= s;
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double s = a.col_sum(j);
      for (std::size_t i = 0; i < k; ++i) a(i, j) /= s;
    }
    ++it;
    err = a.marginal_error();
  }
  return {DoublyStochasticMatrix(std::move(a), DoublyStochasticMatrix::Unchecked{}), it, err < tol,
          err};
}

DoublyStochasticMatrix permutation_matrix(std::span<const std::size_t> perm) {
  const std::size_t k = perm.size();
  SquareMatrix m(k);
  for (std::size_t i = 0; i < k; ++i) {
    require(perm[i] < k, ErrorKind::invalid_argument, "permutation index out of range");
    m(i, perm[i]) = 1.0;
  }
  return DoublyStochasticMatrix(std::move(m));
}

DoublyStochasticMatrix random_birkhoff(std::size_t k, std::size_t n_perms, Rng& rng) {
  require(k >= 2, ErrorKind::invalid_argument, "random_birkhoff needs k >= 2");
  require(n_perms >= 1, ErrorKind::invalid_argument, "random_birkhoff needs n_perms >= 1");

  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(n_perms);
  for (double& x : w) x = expo(rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);

  SquareMatrix m(k);
  std::vector<std::size_t> perm(k);
  for (std::size_t p = 0; p < n_perms; ++p) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double wp = w[p] / total;
    for (std::size_t i = 0; i < k; ++i) m(i, perm[i]) += wp;
  }
  return DoublyStochasticMatrix(std::move(m));
}

DoublyStochasticMatrix blend_identity_uniform(std::size_t k, double s) {
  require(k >= 1, ErrorKind::invalid_argument, "blend needs k >= 1");
  require(s >= 0.0 && s <= 1.0, ErrorKind::invalid_argument, "blend strength outside [0,1]");
  const double off = s / static_cast<double>(k);
  SquareMatrix m(k, off);
  for (std::size_t i = 0; i < k; ++i) m(i, i) = (1.0 - s) + off;
  return DoublyStochasticMatrix(std::move(m));
}

Posterior apply_mixing(const DoublyStochasticMatrix& d, const Posterior& pi,
                       std::span<const double> residual) {
  require_same_dim(d.size(), pi.size(), "apply_mixing");
  std::vector<double> out = d.apply(pi.values());
  if (!residual.empty()) {
    require_same_dim(residual.size(), pi.size(), "apply_mixing residual");
    const double rsum = std::accumulate(residual.begin(), residual.end(), 0.0);
    require(std::abs(rsum) <= 1e-9, ErrorKind::invalid_residual,
            "residual must sum to zero, got " + std::to_string(rsum));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += residual[i];
  }
  double clipped = 0.0;
  double total = 0.0;
  for (double& x : out) {
    if (x < 0.0) {
      clipped -= x;
      x = 0.0;
    }
    total += x;
  }
  require(clipped <= 1e-6 && std::abs(total - 1.0) <= 1e-6, ErrorKind::invalid_residual,
          "clipping changed mass by " + std::to_string(std::max(clipped, std::abs(total - 1.0))));
  // a plain doubly stochastic product is already on the simplex
  if (clipped > 0.0 || !residual.empty())
    for (double& x : out) x /= total;
  return Posterior(std::move(out));
}

std::vector<double> project_permutahedron(std::span<const double> y, std::span<const double> w) {
  require_same_dim(y.size(), w.size(), "project_permutahedron");
  const std::size_t k = y.size();
  const auto ws = sorted_desc(w);
  const auto order = rank_order(y);

  // Nonincreasing isotonic fit of (y_sorted - w_sorted) by pool-adjacent-violators.
  std::vector<double> block_sum;
  std::vector<std::size_t> block_len;
  block_sum.reserve(k);
  block_len.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    block_sum.push_back(y[order[i]] - ws[i]);
    block_len.push_back(1);
    while (block_sum.size() > 1) {
      const std::size_t b = block_sum.size() - 1;
      const double prev = block_sum[b - 1] / static_cast<double>(block_len[b - 1]);
      const double cur = block_sum[b] / static_cast<double>(block_len[b]);
      if (prev >= cur) break;
      block_sum[b - 1] += block_sum[b];
      block_len[b - 1] += block_len[b];
      block_sum.pop_back();
      block_len.pop_back();
    }
  }

  std::vector<double> x(k);
  std::size_t i = 0;
  for (std::size_t b = 0; b < block_sum.size(); ++b) {
    const double v = block_sum[b] / static_cast<double>(block_len[b]);
    for (std::size_t n = 0; n < block_len[b]; ++n, ++i) x[order[i]] = y[order[i]] - v;
  }
  return x;
}

DsFitResult ds_fit_residual(const Posterior& p, const Posterior& anchor, int max_iter) {
  require_same_dim(p.size(), anchor.size(), "ds_fit_residual");
  require(max_iter >= 1, ErrorKind::invalid_argument, "max_iter must be positive");
  const std::size_t k = p.size();
  const auto a = anchor.values();

  auto objective = [&](std::span<const double> x, std::vector<double>& sign) {
    double f = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = p[i] - x[i];
      f += std::abs(r);
      sign[i] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    }
    return f;
  };

  // Uniform D maps every anchor to the uniform posterior.
  std::vector<double> x(k, 1.0 / static_cast<double>(k));
  std::vector<double> x_best = x;
  std::vector<double> sign(k);
  double f = objective(x, sign);
  double best = f;

  // Polyak steps toward best - delta; delta halves (with a restart from the
  // best iterate) whenever `patience` steps pass without reaching half of it.
  double delta = 0.5 * best;
  double level_best = best;
  int since_progress = 0;
  constexpr int patience = 10;

  int it = 0;
  bool converged = best <= 1e-12;
  while (!converged && it < max_iter) {
    ++it;
    double g_norm2 = 0.0;
    for (double s : sign) g_norm2 += s * s;

    const double target = std::max(0.0, best - delta);
    const double eta = (f - target) / g_norm2;
    for (std::size_t i = 0; i < k; ++i) x[i] += eta * sign[i];
    x = project_permutahedron(x, a);
    f = objective(x, sign);

    if (f < best) {
      best = f;
      x_best = x;
    }
    if (best <= level_best - 0.5 * delta) {
      level_best = best;
      since_progress = 0;
    } else if (++since_progress >= patience) {
      delta *= 0.5;
      level_best = best;
      since_progress = 0;
      x = x_best;
      f = objective(x, sign);
    }
    if (best <= 1e-12 || delta <= 1e-12) converged = true;
  }
  return {std::clamp(best, 0.0, 2.0), it, converged};
}

}  // namespace mgtta
