#pragma once

// Trainable fusion gate, logit-level fusion, the three-term adaptation
// objective with its analytic gradient, and the per-batch adaptation loop.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgtta/reliability.hpp"
#include "mgtta/simplex.hpp"

namespace mgtta {

inline constexpr std::size_t kGateFeatureCount = 5;

/// Per-sample inputs to the gate.
struct GateFeatures {
  double rho_v = 0.0;
  double rho_t = 0.0;
  double kappa = 0.0;
  double h_v = 0.0;
  double h_t = 0.0;

  std::array<double, kGateFeatureCount> as_array() const { return {rho_v, rho_t, kappa, h_v, h_t}; }
};

/// Affine gate: alpha = logistic(weights . features + bias).
struct GateParams {
  std::array<double, kGateFeatureCount> weights{};
  double bias = 0.0;

  friend bool operator==(const GateParams&, const GateParams&) = default;
};

enum class AdaptMode { source_only, entropy_only, entropy_div, mg_mtta };

std::string_view to_string(AdaptMode mode) noexcept;
AdaptMode parse_mode(std::string_view name);

/// Adaptation hyperparameters. Defaults are the reported final configuration.
struct AdaptConfig {
  double lambda_g = 0.1;
  double lambda_d = 0.01;
  double lambda_c = 0.25;
  double lambda_r = 1.0;
  double tau = 5.0;
  double eta = 0.7;
  double mu = 0.9;
  double lr = 1e-3;
  int steps = 2;
  int batch_size = 64;
  AdaptMode mode = AdaptMode::mg_mtta;
  ConflictDirection direction = ConflictDirection::toward_reliable;

  void validate() const;
  ConflictParams conflict() const { return {lambda_r, lambda_c, tau, direction}; }
  /// Gate and diversity weights after the mode switches off unused terms.
  double effective_lambda_g() const;
  double effective_lambda_d() const;
};

struct LossBreakdown {
  double l_ent = 0.0;
  double l_gate = 0.0;
  double l_div = 0.0;
  double total = 0.0;
};

/// Modality logits plus gate features for one sample.
struct GateInput {
  LogitVector z_v;
  LogitVector z_t;
  GateFeatures features;
};

double gate_alpha(const GateParams& params, const GateFeatures& features);

/// softmax(alpha * z_v + (1 - alpha) * z_t)
Posterior fuse_logits(double alpha, const LogitVector& z_v, const LogitVector& z_t);

/// alpha * p_v + (1 - alpha) * p_t
Posterior fuse_probs(double alpha, const Posterior& p_v, const Posterior& p_t);

LossBreakdown batch_loss(std::span<const GateInput> batch, const GateParams& params,
                         std::span<const GatePrior> priors, const AdaptConfig& cfg);

/// Exact derivative of batch_loss(...).total with respect to the gate parameters.
GateParams batch_gradient(std::span<const GateInput> batch, const GateParams& params,
                          std::span<const GatePrior> priors, const AdaptConfig& cfg);

/// What the frozen model emits for one test sample.
struct ModalityOutputs {
  Posterior p_v;
  Posterior p_t;
  LogitVector z_v;
  LogitVector z_t;
};

/// Everything that adapts within one episode.
struct AdaptState {
  GateParams params;
  ModalityAnchor anchor_v;
  ModalityAnchor anchor_t;

  AdaptState(std::size_t k, const AdaptConfig& cfg);
};

struct AdaptResult {
  std::vector<Posterior> adapted;    // fused posteriors after the update
  std::vector<Posterior> pre_fused;  // frozen fusion at alpha = 0.5
  std::vector<GateFeatures> features;
  std::vector<GatePrior> priors;
  std::vector<double> alphas;        // post-update gate values
  LossBreakdown loss_before;
  LossBreakdown loss_after;
};

/// Fusion weight used by the frozen, non-adapting model.
inline constexpr double kSourceAlpha = 0.5;

/// Anchor update, prior construction, cfg.steps gradient steps, then fusion
/// with the updated gate. source_only skips the steps and fuses at kSourceAlpha.
AdaptResult adapt_batch(AdaptState& state, std::span<const ModalityOutputs> batch,
                        const AdaptConfig& cfg);

/// Zero gate parameters and uninitialized anchors.
void reset_episode(AdaptState& state);

}  // namespace mgtta
