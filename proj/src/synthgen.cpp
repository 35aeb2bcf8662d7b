#include "mgtta/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

namespace mgtta {

void StreamParams::validate() const {
  require(k >= 2, ErrorKind::config_invalid, "stream k must be at least 2");
  require(n >= 1, ErrorKind::config_invalid, "stream n must be at least 1");
  require(beta_star >= 0.0 && beta_star <= 1.0, ErrorKind::config_invalid,
          "beta_star must lie in [0,1]");
  require(gamma_min >= 0.0 && gamma_min <= 0.9, ErrorKind::config_invalid,
          "gamma_min must lie in [0,0.9]");
  require(std::isfinite(signal) && shared_noise >= 0.0 && modality_noise >= 0.0,
          ErrorKind::config_invalid, "generator noise levels must be nonnegative");
  require(max_attempts >= 1, ErrorKind::config_invalid, "max_attempts must be positive");
}

CleanSample make_clean_sample(Posterior pi_v, Posterior pi_t, double beta_star) {
  require_same_dim(pi_v.size(), pi_t.size(), "clean sample");
  require(beta_star >= 0.0 && beta_star <= 1.0, ErrorKind::invalid_argument,
          "beta_star must lie in [0,1]");
  CleanSample s;
  s.pi_f = fuse_probs(beta_star, pi_v, pi_t);
  const TopOne top = top_one_margin(s.pi_f);
  s.pi_v = std::move(pi_v);
  s.pi_t = std::move(pi_t);
  s.beta_star = beta_star;
  s.label = top.argmax;
  s.gamma = top.margin;
  return s;
}

std::vector<CleanSample> gen_clean_stream(const StreamParams& params, Rng& rng) {
  params.validate();
  const std::size_t k = params.k;
  std::uniform_int_distribution<std::size_t> cls(0, k - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<CleanSample> out;
  out.reserve(params.n);
  std::vector<double> shared(k);
  std::vector<double> zv(k);
  std::vector<double> zt(k);
  for (std::size_t i = 0; i < params.n; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < params.max_attempts && !accepted; ++attempt) {
      const std::size_t y = cls(rng);
      for (std::size_t c = 0; c < k; ++c) {
        shared[c] = params.shared_noise * normal(rng) + (c == y ? params.signal : 0.0);
      }
      for (std::size_t c = 0; c < k; ++c) zv[c] = shared[c] + params.modality_noise * normal(rng);
      for (std::size_t c = 0; c < k; ++c) zt[c] = shared[c] + params.modality_noise * normal(rng);
      CleanSample s = make_clean_sample(softmax(zv), softmax(zt), params.beta_star);
      if (s.gamma >= params.gamma_min) {
        out.push_back(std::move(s));
        accepted = true;
      }
    }
    if (!accepted) {
      throw Error(ErrorKind::rejection_budget,
                  "no clean sample reached gamma_min=" + std::to_string(params.gamma_min) + " in " +
                      std::to_string(params.max_attempts) + " draws");
    }
  }
  return out;
}

std::vector<CleanSample> gen_clean_stream(std::size_t k, std::size_t n, double beta_star,
                                          double gamma_min, Rng& rng) {
  StreamParams p;
  p.k = k;
  p.n = n;
  p.beta_star = beta_star;
  p.gamma_min = gamma_min;
  return gen_clean_stream(p, rng);
}

double severity_to_mixing(int level) {
  require(level >= 0 && level <= kMaxSeverity, ErrorKind::invalid_argument,
          "severity level must lie in 0..5");
  return kSeverityMixing[static_cast<std::size_t>(level)];
}

void ShiftSpec::validate() const {
  require(visual_severity >= 0 && visual_severity <= kMaxSeverity && textual_severity >= 0 &&
              textual_severity <= kMaxSeverity,
          ErrorKind::config_invalid, "severity levels must lie in 0..5");
  require(std::isfinite(residual_scale) && residual_scale >= 0.0, ErrorKind::config_invalid,
          "residual_scale must be nonnegative");
  require(birkhoff_noise >= 0.0 && birkhoff_noise <= 1.0, ErrorKind::config_invalid,
          "birkhoff_noise must lie in [0,1]");
  require(birkhoff_perms >= 1, ErrorKind::config_invalid, "birkhoff_perms must be positive");
}

DoublyStochasticMatrix modality_mixing(std::size_t k, int level, double birkhoff_noise,
                                       std::size_t birkhoff_perms, Rng& rng) {
  // Drawn unconditionally so every level consumes the same random numbers.
  const DoublyStochasticMatrix noise = random_birkhoff(k, birkhoff_perms, rng);
  if (level == 0) return DoublyStochasticMatrix::identity(k);
  const DoublyStochasticMatrix blend = blend_identity_uniform(k, severity_to_mixing(level));
  if (birkhoff_noise == 0.0) return blend;
  return DoublyStochasticMatrix::mix(blend, noise, birkhoff_noise);
}

std::vector<double> feasible_residual(std::span<const double> base, double scale, Rng& rng) {
  const std::size_t k = base.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> r(k);
  for (double& x : r) x = scale * normal(rng);
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(k);
  for (double& x : r) x -= mean;

  double t = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (r[i] < 0.0) t = std::min(t, base[i] / -r[i]);
  }
  for (double& x : r) x *= t;
  return r;
}

namespace {

Posterior shift_modality(const Posterior& pi, int level, const ShiftSpec& spec, Rng& rng) {
  const std::size_t k = pi.size();
  const DoublyStochasticMatrix d =
      modality_mixing(k, level, spec.birkhoff_noise, spec.birkhoff_perms, rng);
  const std::vector<double> base = d.apply(pi.values());
  std::vector<double> residual;
  if (spec.residual_scale > 0.0) residual = feasible_residual(base, spec.residual_scale, rng);
  if (level == 0) return pi;
  return apply_mixing(d, pi, residual);
}

Posterior with_order(const Posterior& p, std::size_t hi, std::size_t lo) {
  if (p[hi] >= p[lo]) return p;
  std::vector<double> v = p.vec();
  std::swap(v[hi], v[lo]);
  return Posterior(std::move(v));
}

}  // namespace

StreamSample apply_shift(const CleanSample& sample, const ShiftSpec& spec, Rng& rng) {
  spec.validate();
  Posterior pi_v = sample.pi_v;
  Posterior pi_t = sample.pi_t;
  if (spec.conflicting) {
    const auto order = rank_order(sample.pi_f.values());
    const std::size_t c = order[0];
    const std::size_t j = order[1];
    pi_v = with_order(pi_v, j, c);
    pi_t = with_order(pi_t, c, j);
  }

  StreamSample out{sample, {}, {}, {}, {}};
  out.p_v = shift_modality(pi_v, spec.visual_severity, spec, rng);
  out.p_t = shift_modality(pi_t, spec.textual_severity, spec, rng);
  out.z_v = log_probs(out.p_v);
  out.z_t = log_probs(out.p_t);
  return out;
}

std::vector<StreamSample> apply_shift(std::span<const CleanSample> clean, const ShiftSpec& spec,
                                      Rng& rng) {
  std::vector<StreamSample> out;
  out.reserve(clean.size());
  for (const auto& s : clean) out.push_back(apply_shift(s, spec, rng));
  return out;
}

}  // namespace mgtta
