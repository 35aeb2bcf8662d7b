#pragma once

// Synthetic two-modality posterior streams: clean samples with a controlled
// fused margin, and severity-laddered doubly stochastic shift per modality.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgtta/dsmix.hpp"
#include "mgtta/gate_adapt.hpp"
#include "mgtta/simplex.hpp"

namespace mgtta {

struct CleanSample {
  Posterior pi_v;
  Posterior pi_t;
  double beta_star = 0.5;
  Posterior pi_f;  // beta_star * pi_v + (1 - beta_star) * pi_t
  std::size_t label = 0;
  double gamma = 0.0;
};

/// Clean-stream generator settings. Modality logits are
/// signal * e_y + shared noise + per-modality noise for a latent class y.
struct StreamParams {
  std::size_t k = 10;
  std::size_t n = 2000;
  double beta_star = 0.5;
  double gamma_min = 0.0;
  double signal = 4.0;
  double shared_noise = 1.0;
  double modality_noise = 1.0;
  int max_attempts = 100000;  // per sample

  void validate() const;
};

std::vector<CleanSample> gen_clean_stream(const StreamParams& params, Rng& rng);
std::vector<CleanSample> gen_clean_stream(std::size_t k, std::size_t n, double beta_star,
                                          double gamma_min, Rng& rng);

/// Builds a CleanSample from modality posteriors, checking the invariants.
CleanSample make_clean_sample(Posterior pi_v, Posterior pi_t, double beta_star);

inline constexpr int kMaxSeverity = 5;
inline constexpr std::array<double, kMaxSeverity + 1> kSeverityMixing = {0.0, 0.10, 0.25,
                                                                          0.40, 0.60, 0.80};

/// Mixing strength for severity level 0..5.
double severity_to_mixing(int level);

struct ShiftSpec {
  int visual_severity = 0;
  int textual_severity = 0;
  double residual_scale = 0.0;
  bool conflicting = false;
  double birkhoff_noise = 0.0;
  std::size_t birkhoff_perms = 3;

  void validate() const;
  friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

struct StreamSample {
  CleanSample clean;
  Posterior p_v;
  Posterior p_t;
  LogitVector z_v;
  LogitVector z_t;

  ModalityOutputs outputs() const { return {p_v, p_t, z_v, z_t}; }
};

/// Mixing operator for one modality at a severity level: identity at level
/// 0, otherwise (1 - b) blend(s) + b * random Birkhoff.
DoublyStochasticMatrix modality_mixing(std::size_t k, int level, double birkhoff_noise,
                                       std::size_t birkhoff_perms, Rng& rng);

/// Zero-sum Gaussian residual, scaled down so that base + residual stays
/// nonnegative.
std::vector<double> feasible_residual(std::span<const double> base, double scale, Rng& rng);

/// Shifts each modality of a clean sample. In conflicting mode the clean top
/// pair (c, j) of pi_f is first arranged so that pi_v prefers j and pi_t
/// prefers c. The rng is consumed identically for every severity level.
StreamSample apply_shift(const CleanSample& sample, const ShiftSpec& spec, Rng& rng);

std::vector<StreamSample> apply_shift(std::span<const CleanSample> clean, const ShiftSpec& spec,
                                      Rng& rng);

}  // namespace mgtta
