#include "mgtta/reliability.hpp"

#include <cmath>

namespace mgtta {

ModalityAnchor::ModalityAnchor(std::size_t k, double momentum, double conf_threshold)
    : probs_(Posterior::uniform(k)), momentum_(momentum), threshold_(conf_threshold) {
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::invalid_argument,
          "anchor momentum must lie in [0,1)");
  require(conf_threshold > 0.0 && conf_threshold <= 1.0, ErrorKind::invalid_argument,
          "anchor confidence threshold must lie in (0,1]");
}

std::size_t ModalityAnchor::update(std::span<const Posterior> batch) {
  require(!batch.empty(), ErrorKind::empty_batch, "anchor update needs a nonempty batch");
  const std::size_t k = probs_.size();
  std::vector<double> mean(k, 0.0);
  std::size_t used = 0;
  for (const Posterior& p : batch) {
    require_same_dim(p.size(), k, "anchor update");
    if (p[top_one_margin(p).argmax] >= threshold_) {
      for (std::size_t i = 0; i < k; ++i) mean[i] += p[i];
      ++used;
    }
  }
  if (used == 0) return 0;

  for (double& x : mean) x /= static_cast<double>(used);
  if (!initialized_) {
    probs_ = Posterior::normalized(std::move(mean));
    initialized_ = true;
    return used;
  }
  std::vector<double> next(k);
  for (std::size_t i = 0; i < k; ++i) next[i] = momentum_ * probs_[i] + (1.0 - momentum_) * mean[i];
  probs_ = Posterior::normalized(std::move(next));
  return used;
}

void ModalityAnchor::reset() {
  probs_ = Posterior::uniform(probs_.size());
  initialized_ = false;
}

ModalityAnchor update_anchor(ModalityAnchor anchor, std::span<const Posterior> batch) {
  anchor.update(batch);
  return anchor;
}

void ConflictParams::validate() const {
  require(std::isfinite(lambda_r) && lambda_r >= 0.0, ErrorKind::invalid_argument,
          "lambda_r must be nonnegative");
  require(std::isfinite(lambda_c) && lambda_c >= 0.0, ErrorKind::invalid_argument,
          "lambda_c must be nonnegative");
  require(std::isfinite(tau) && tau > 0.0, ErrorKind::invalid_argument, "tau must be positive");
}

double rho_proxy(const Posterior& p, const ModalityAnchor& anchor) {
  require(anchor.initialized(), ErrorKind::uninitialized_anchor,
          "anchor has not seen a confident sample");
  require_same_dim(p.size(), anchor.size(), "rho_proxy");
  const auto sp = sorted_desc(p.values());
  const auto sa = sorted_desc(anchor.probs().values());
  double d = 0.0;
  for (std::size_t i = 0; i < sp.size(); ++i) d += std::abs(sp[i] - sa[i]);
  return d;
}

double rho_or_neutral(const Posterior& p, const ModalityAnchor& anchor) {
  return anchor.initialized() ? rho_proxy(p, anchor) : 0.0;
}

double conflict_score(const Posterior& p_v, const Posterior& p_t, const ConflictParams& params) {
  require_same_dim(p_v.size(), p_t.size(), "conflict_score");
  return js(p_v, p_t) + params.lambda_r * kendall_disagreement(p_v, p_t);
}

std::pair<double, double> gate_prior_logits(double rho_v, double rho_t, double kappa,
                                            const ConflictParams& params) {
  require(rho_v >= 0.0 && rho_t >= 0.0 && kappa >= 0.0, ErrorKind::invalid_argument,
          "gate prior inputs must be nonnegative");
  double l_v = -params.tau * rho_v;
  double l_t = -params.tau * rho_t;
  double d = rho_v > rho_t ? 1.0 : (rho_v < rho_t ? -1.0 : 0.0);
  if (params.direction == ConflictDirection::inverted) d = -d;
  l_v -= params.lambda_c * kappa * d;
  l_t += params.lambda_c * kappa * d;
  return {l_v, l_t};
}

GatePrior gate_prior(double rho_v, double rho_t, double kappa, const ConflictParams& params) {
  const auto [l_v, l_t] = gate_prior_logits(rho_v, rho_t, kappa, params);
  // Two-way softmax as a logistic of the logit gap.
  const double a_v = 1.0 / (1.0 + std::exp(l_t - l_v));
  return {a_v, 1.0 - a_v};
}

}  // namespace mgtta
