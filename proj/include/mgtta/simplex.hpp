#pragma once

// Probability-simplex arithmetic. All logarithms are natural, entropies in nats.

#include <cstddef>
#include <span>
#include <vector>

#include "mgtta/error.hpp"

namespace mgtta {

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kMajorizeTol = 1e-9;

/// A probability vector over K >= 2 classes. Construction validates
/// nonnegativity and unit mass (within kSimplexTol); the stored values are
/// exactly what was passed in.
class Posterior {
 public:
  Posterior() = default;
  explicit Posterior(std::vector<double> probs);

  /// Uniform distribution over k classes.
  static Posterior uniform(std::size_t k);
  /// Point mass on class `index`.
  static Posterior one_hot(std::size_t k, std::size_t index);
  /// Scales a nonnegative vector with positive sum onto the simplex.
  static Posterior normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }
  const std::vector<double>& vec() const noexcept { return probs_; }

  auto begin() const noexcept { return probs_.begin(); }
  auto end() const noexcept { return probs_.end(); }

  friend bool operator==(const Posterior&, const Posterior&) = default;

 private:
  std::vector<double> probs_;
};

/// Unnormalized class scores. Entries must be finite.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> logits);

  std::size_t size() const noexcept { return logits_.size(); }
  double operator[](std::size_t i) const { return logits_[i]; }
  std::span<const double> values() const noexcept { return logits_; }
  const std::vector<double>& vec() const noexcept { return logits_; }

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> logits_;
};

struct TopOne {
  double margin;       // p_[1] - p_[2]
  std::size_t argmax;  // lowest index among the maxima
};

double entropy(const Posterior& p);
double entropy(std::span<const double> p);

/// Descending-sorted copy of p.
std::vector<double> sorted_desc(std::span<const double> p);

/// u majorizes v: every descending prefix sum of u is >= that of v, minus tol.
bool majorizes(const Posterior& u, const Posterior& v, double tol = kMajorizeTol);

/// KL(p || q). With flooring enabled both arguments are clamped to
/// kProbFloor and renormalized first; without it a zero in q under positive
/// mass in p throws divergence_undefined.
double kl(const Posterior& p, const Posterior& q, bool floor = true);

/// Jensen-Shannon divergence against the midpoint; bounded by ln 2.
double js(const Posterior& p, const Posterior& q);

/// Fraction of class pairs ranked differently by p and q. Ties in either
/// ranking are broken by ascending class index.
double kendall_disagreement(const Posterior& p, const Posterior& q);

TopOne top_one_margin(const Posterior& p);
TopOne top_one_margin(std::span<const double> p);

/// 1 - max_k p_k, i.e. half the L1 distance to the nearest vertex.
double dist_to_permutation(const Posterior& p);

Posterior softmax(const LogitVector& z, double temperature = 1.0);
Posterior softmax(std::span<const double> z, double temperature = 1.0);

/// ln(max(p_k, kProbFloor)) entrywise.
LogitVector log_probs(const Posterior& p);

/// Descending argsort with ties by ascending index.
std::vector<std::size_t> rank_order(std::span<const double> p);

}  // namespace mgtta
