#pragma once

// Executable checks of the demixing guarantees: entropy increase under
// doubly stochastic mixing, the sufficient condition for beneficial
// demixing, correctness transfer, and the modality-dominance flip threshold.

#include <cstddef>

#include "mgtta/dsmix.hpp"
#include "mgtta/simplex.hpp"

namespace mgtta {

/// Hypotheses and conclusions of the beneficial-demixing guarantee,
/// each evaluated independently.
struct DemixingVerdict {
  bool cond_majorize = false;    // q majorizes the shifted fused posterior
  bool cond_top2_order = false;  // top-two classes of q equal those of pi, same order
  bool cond_margin = false;      // ||q - pi||_inf < gamma(pi) / 2
  bool entropy_reduced = false;  // H(q) <= H(p_shift)
  bool argmax_preserved = false; // argmax q = argmax pi
  bool separable = false;        // gamma(pi) > 0; otherwise the guarantee is vacuous

  bool hypotheses_hold() const { return separable && cond_majorize && cond_top2_order && cond_margin; }
};

/// Throws guarantee_violated if all hypotheses hold but a conclusion fails.
/// A non-separable clean posterior is reported through `separable`.
DemixingVerdict check_beneficial_demixing(const Posterior& q, const Posterior& p_shift,
                                          const Posterior& pi_clean, double tol = kMajorizeTol);

/// Whether q predicts `true_label`. When the clean posterior predicts the
/// label and the demixing hypotheses hold, a miss throws guarantee_violated.
bool correctness_transfer(const Posterior& q, const Posterior& p_shift, const Posterior& pi_clean,
                          std::size_t true_label, double tol = kMajorizeTol);

struct DominanceThreshold {
  double threshold;
  std::size_t class_c;
  std::size_t class_j;
  double delta_v;  // p_v[c] - p_v[j] < 0
  double delta_t;  // p_t[c] - p_t[j] > 0
};

/// Gate value above which convex fusion of p_v and p_t ranks j over c.
/// Throws precondition_violated unless delta_v < 0 < delta_t.
DominanceThreshold failure_threshold(const Posterior& p_v, const Posterior& p_t, std::size_t c,
                                     std::size_t j);
DominanceThreshold failure_threshold(double delta_v, double delta_t);

/// alpha * delta_v + (1 - alpha) * delta_t
double fused_margin(double alpha, double delta_v, double delta_t);

/// Strictly above the threshold the fused decision flips to j.
bool decision_flips(const DominanceThreshold& t, double alpha);

/// pi majorizes D pi and H(D pi) >= H(pi) - 1e-9. Throws
/// guarantee_violated if either fails.
bool verify_entropy_increase(const Posterior& pi, const DoublyStochasticMatrix& d);

struct DemixingInstance {
  Posterior pi_clean;
  Posterior p_shift;
  Posterior q;
  double gamma;
  double eps;
  int attempts;
};

/// Draws a clean posterior with margin >= min_gamma, shifts it with a random
/// mixing operator and moves q a fraction eps back toward the clean point.
/// Every hypothesis of the demixing guarantee is checked on the returned
/// instance; draws that fail are rejected.
DemixingInstance sample_demixing_instance(std::size_t k, Rng& rng, double min_gamma = 0.1,
                                          int max_attempts = 100000);

}  // namespace mgtta
