#pragma once

// Running modality anchors, the sorted-profile reliability proxy, the
// cross-modality conflict score, and the reliability-aware gate prior.

#include <span>
#include <utility>

#include "mgtta/simplex.hpp"

namespace mgtta {

/// EMA posterior built from confident samples of one modality.
class ModalityAnchor {
 public:
  ModalityAnchor(std::size_t k, double momentum, double conf_threshold);

  std::size_t size() const noexcept { return probs_.size(); }
  double momentum() const noexcept { return momentum_; }
  double conf_threshold() const noexcept { return threshold_; }
  bool initialized() const noexcept { return initialized_; }
  /// Running anchor; uniform until the first confident sample arrives.
  const Posterior& probs() const noexcept { return probs_; }

  /// Folds the mean of the batch members whose top probability reaches the
  /// threshold into the anchor. The first confident batch replaces the
  /// anchor outright. Returns the number of confident samples used.
  std::size_t update(std::span<const Posterior> batch);

  /// Back to the uninitialized state.
  void reset();

 private:
  Posterior probs_;
  double momentum_;
  double threshold_;
  bool initialized_ = false;
};

/// Conflict correction direction. `toward_reliable` is the real rule;
/// `inverted` flips the sign of d(z) and exists only to check that the test
/// suite notices when the correction points the wrong way.
enum class ConflictDirection { toward_reliable, inverted };

struct ConflictParams {
  double lambda_r = 1.0;
  double lambda_c = 0.25;
  double tau = 5.0;
  ConflictDirection direction = ConflictDirection::toward_reliable;

  void validate() const;
};

struct GatePrior {
  double a_v;
  double a_t;
};

/// Value-semantics form of ModalityAnchor::update.
ModalityAnchor update_anchor(ModalityAnchor anchor, std::span<const Posterior> batch);

/// L1 distance between the descending-sorted profiles of p and the anchor.
/// Throws uninitialized_anchor before the anchor has seen confident data.
double rho_proxy(const Posterior& p, const ModalityAnchor& anchor);

/// rho_proxy, or 0 for an uninitialized anchor (neutral cold start).
double rho_or_neutral(const Posterior& p, const ModalityAnchor& anchor);

/// JS(p_v, p_t) + lambda_r * normalized Kendall disagreement.
double conflict_score(const Posterior& p_v, const Posterior& p_t, const ConflictParams& params);

/// softmax over -tau * rho per modality, with the conflict term pushing the
/// two logits apart in favour of the lower-rho modality.
GatePrior gate_prior(double rho_v, double rho_t, double kappa, const ConflictParams& params);

/// Logit pair before the final softmax; exposed for diagnostics.
std::pair<double, double> gate_prior_logits(double rho_v, double rho_t, double kappa,
                                            const ConflictParams& params);

}  // namespace mgtta
