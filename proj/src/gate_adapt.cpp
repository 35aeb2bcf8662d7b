#include "mgtta/gate_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgtta {

std::string_view to_string(AdaptMode mode) noexcept {
  switch (mode) {
    case AdaptMode::source_only: return "source_only";
    case AdaptMode::entropy_only: return "entropy_only";
    case AdaptMode::entropy_div: return "entropy_div";
    case AdaptMode::mg_mtta: return "mg_mtta";
  }
  return "unknown";
}

AdaptMode parse_mode(std::string_view name) {
  for (AdaptMode m : {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::entropy_div,
                      AdaptMode::mg_mtta}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorKind::config_invalid, "unknown adaptation mode '" + std::string(name) + "'");
}

void AdaptConfig::validate() const {
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  require(nonneg(lambda_g) && nonneg(lambda_d) && nonneg(lambda_c) && nonneg(lambda_r),
          ErrorKind::config_invalid, "loss and prior weights must be nonnegative");
  require(std::isfinite(tau) && tau > 0.0, ErrorKind::config_invalid, "tau must be positive");
  require(eta > 0.0 && eta <= 1.0, ErrorKind::config_invalid, "eta must lie in (0,1]");
  require(mu >= 0.0 && mu < 1.0, ErrorKind::config_invalid, "mu must lie in [0,1)");
  require(nonneg(lr), ErrorKind::config_invalid, "lr must be nonnegative");
  require(steps >= 1, ErrorKind::config_invalid, "steps must be at least 1");
  require(batch_size >= 1, ErrorKind::config_invalid, "batch_size must be at least 1");
}

double AdaptConfig::effective_lambda_g() const {
  return mode == AdaptMode::entropy_only || mode == AdaptMode::entropy_div ? 0.0 : lambda_g;
}

double AdaptConfig::effective_lambda_d() const {
  return mode == AdaptMode::entropy_only ? 0.0 : lambda_d;
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double gate_logit(const GateParams& params, const GateFeatures& features) {
  const auto f = features.as_array();
  double u = params.bias;
  for (std::size_t i = 0; i < kGateFeatureCount; ++i) u += params.weights[i] * f[i];
  return u;
}

double logistic(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

void log_softmax(std::span<const double> z, std::span<double> out) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - zmax);
  const double lse = zmax + std::log(sum);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
}

// KL([alpha, 1-alpha] || [a, 1-a]) with alpha = logistic(u), in log space.
double gate_kl(double u, const GatePrior& prior) {
  const double alpha = logistic(u);
  const double log_alpha = -softplus(-u);
  const double log_1m_alpha = -softplus(u);
  const double log_a = std::log(std::max(prior.a_v, 1e-300));
  const double log_1m_a = std::log(std::max(prior.a_t, 1e-300));
  const double kl = alpha * (log_alpha - log_a) + (1.0 - alpha) * (log_1m_alpha - log_1m_a);
  return std::max(kl, 0.0);
}

struct Evaluation {
  LossBreakdown loss;
  GateParams grad;
};

Evaluation evaluate(std::span<const GateInput> batch, const GateParams& params,
                    std::span<const GatePrior> priors, const AdaptConfig& cfg, bool want_grad) {
  require(!batch.empty(), ErrorKind::empty_batch, "loss needs a nonempty batch");
  require_same_dim(batch.size(), priors.size(), "one prior per sample");
  const std::size_t n = batch.size();
  const std::size_t k = batch.front().z_v.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda_g = cfg.effective_lambda_g();
  const double lambda_d = cfg.effective_lambda_d();

  std::vector<double> u(n);
  std::vector<double> alpha(n);
  std::vector<double> logq(n * k);
  std::vector<double> q(n * k);
  std::vector<double> h(n);
  std::vector<double> mean_q(k, 0.0);
  std::vector<double> z(k);

  Evaluation ev;
  for (std::size_t i = 0; i < n; ++i) {
    const GateInput& s = batch[i];
    require_same_dim(s.z_v.size(), k, "batch logits");
    require_same_dim(s.z_t.size(), k, "batch logits");
    u[i] = gate_logit(params, s.features);
    alpha[i] = logistic(u[i]);
    for (std::size_t c = 0; c < k; ++c) z[c] = alpha[i] * s.z_v[c] + (1.0 - alpha[i]) * s.z_t[c];
    std::span<double> lq(logq.data() + i * k, k);
    log_softmax(z, lq);
    double hi = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      q[i * k + c] = std::exp(lq[c]);
      hi -= q[i * k + c] * lq[c];
      mean_q[c] += q[i * k + c] * inv_n;
    }
    h[i] = std::max(hi, 0.0);
    ev.loss.l_ent += h[i] * inv_n;
    ev.loss.l_gate += gate_kl(u[i], priors[i]) * inv_n;
  }
  ev.loss.l_div = -entropy(mean_q);
  ev.loss.total = ev.loss.l_ent + lambda_g * ev.loss.l_gate + lambda_d * ev.loss.l_div;
  if (!want_grad) return ev;

  std::vector<double> log_mean(k);
  for (std::size_t c = 0; c < k; ++c) log_mean[c] = std::log(std::max(mean_q[c], 1e-300));

  for (std::size_t i = 0; i < n; ++i) {
    const GateInput& s = batch[i];
    const double* qi = q.data() + i * k;
    const double* lqi = logq.data() + i * k;

    // d/dz of H(q) is -q (log q + H); d/dz of sum_k m_k log m_k through
    // this sample's softmax is q (log m - <q, log m>) / n.
    double q_dot_logm = 0.0;
    for (std::size_t c = 0; c < k; ++c) q_dot_logm += qi[c] * log_mean[c];
    double d_alpha = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double dz_ent = -qi[c] * (lqi[c] + h[i]) * inv_n;
      const double dz_div = qi[c] * (log_mean[c] - q_dot_logm) * inv_n;
      const double dz = dz_ent + lambda_d * dz_div;
      d_alpha += dz * (s.z_v[c] - s.z_t[c]);
    }
    // dKL/dalpha = logit(alpha) - logit(a_v), and logit(alpha) = u.
    const double prior_logit = std::log(std::max(priors[i].a_v, 1e-300)) -
                               std::log(std::max(priors[i].a_t, 1e-300));
    d_alpha += lambda_g * (u[i] - prior_logit) * inv_n;

    const double d_u = d_alpha * alpha[i] * (1.0 - alpha[i]);
    const auto f = s.features.as_array();
    for (std::size_t j = 0; j < kGateFeatureCount; ++j) ev.grad.weights[j] += d_u * f[j];
    ev.grad.bias += d_u;
  }
  return ev;
}

std::vector<GateInput> gate_inputs(std::span<const ModalityOutputs> batch,
                                   std::span<const GateFeatures> features) {
  std::vector<GateInput> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back({batch[i].z_v, batch[i].z_t, features[i]});
  }
  return out;
}

}  // namespace

double gate_alpha(const GateParams& params, const GateFeatures& features) {
  return logistic(gate_logit(params, features));
}

Posterior fuse_logits(double alpha, const LogitVector& z_v, const LogitVector& z_t) {
  require_same_dim(z_v.size(), z_t.size(), "fuse_logits");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_argument, "alpha outside [0,1]");
  std::vector<double> z(z_v.size());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = alpha * z_v[c] + (1.0 - alpha) * z_t[c];
  return softmax(z);
}

Posterior fuse_probs(double alpha, const Posterior& p_v, const Posterior& p_t) {
  require_same_dim(p_v.size(), p_t.size(), "fuse_probs");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_argument, "alpha outside [0,1]");
  std::vector<double> q(p_v.size());
  for (std::size_t c = 0; c < q.size(); ++c) q[c] = alpha * p_v[c] + (1.0 - alpha) * p_t[c];
  return Posterior(std::move(q));
}

LossBreakdown batch_loss(std::span<const GateInput> batch, const GateParams& params,
                         std::span<const GatePrior> priors, const AdaptConfig& cfg) {
  return evaluate(batch, params, priors, cfg, false).loss;
}

GateParams batch_gradient(std::span<const GateInput> batch, const GateParams& params,
                          std::span<const GatePrior> priors, const AdaptConfig& cfg) {
  return evaluate(batch, params, priors, cfg, true).grad;
}

AdaptState::AdaptState(std::size_t k, const AdaptConfig& cfg)
    : anchor_v(k, cfg.mu, cfg.eta), anchor_t(k, cfg.mu, cfg.eta) {}

AdaptResult adapt_batch(AdaptState& state, std::span<const ModalityOutputs> batch,
                        const AdaptConfig& cfg) {
  cfg.validate();
  require(!batch.empty(), ErrorKind::empty_batch, "adapt_batch needs a nonempty batch");
  const std::size_t n = batch.size();

  // Anchors see the frozen posteriors of this batch before any gate update.
  std::vector<Posterior> pv;
  std::vector<Posterior> pt;
  pv.reserve(n);
  pt.reserve(n);
  for (const auto& s : batch) {
    pv.push_back(s.p_v);
    pt.push_back(s.p_t);
  }
  state.anchor_v.update(pv);
  state.anchor_t.update(pt);

  const ConflictParams conflict = cfg.conflict();
  AdaptResult res;
  res.features.reserve(n);
  res.priors.reserve(n);
  res.pre_fused.reserve(n);
  for (const auto& s : batch) {
    GateFeatures f;
    f.rho_v = rho_or_neutral(s.p_v, state.anchor_v);
    f.rho_t = rho_or_neutral(s.p_t, state.anchor_t);
    f.kappa = conflict_score(s.p_v, s.p_t, conflict);
    f.h_v = entropy(s.p_v);
    f.h_t = entropy(s.p_t);
    res.features.push_back(f);
    res.priors.push_back(gate_prior(f.rho_v, f.rho_t, f.kappa, conflict));
    res.pre_fused.push_back(fuse_logits(kSourceAlpha, s.z_v, s.z_t));
  }

  const auto inputs = gate_inputs(batch, res.features);
  res.loss_before = batch_loss(inputs, state.params, res.priors, cfg);

  if (cfg.mode != AdaptMode::source_only) {
    for (int step = 0; step < cfg.steps; ++step) {
      const GateParams g = batch_gradient(inputs, state.params, res.priors, cfg);
      for (std::size_t j = 0; j < kGateFeatureCount; ++j) state.params.weights[j] -= cfg.lr * g.weights[j];
      state.params.bias -= cfg.lr * g.bias;
    }
  }
  res.loss_after = batch_loss(inputs, state.params, res.priors, cfg);

  res.adapted.reserve(n);
  res.alphas.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = cfg.mode == AdaptMode::source_only
                             ? kSourceAlpha
                             : gate_alpha(state.params, res.features[i]);
    res.alphas.push_back(alpha);
    res.adapted.push_back(fuse_logits(alpha, batch[i].z_v, batch[i].z_t));
  }
  return res;
}

void reset_episode(AdaptState& state) {
  state.params = GateParams{};
  state.anchor_v.reset();
  state.anchor_t.reset();
}

}  // namespace mgtta
