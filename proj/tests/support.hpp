#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mgtta/dsmix.hpp"
#include "mgtta/error.hpp"
#include "mgtta/simplex.hpp"

namespace test {

inline mgtta::Posterior random_posterior(std::size_t k, mgtta::Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(k);
  for (double& x : w) x = e(rng) + 1e-6;
  return mgtta::Posterior::normalized(std::move(w));
}

inline std::size_t pick(mgtta::Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Plain-loop entropy, kept apart from the library implementation.
inline double naive_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

template <typename F>
mgtta::ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const mgtta::Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected an mgtta::Error");
}

}  // namespace test
