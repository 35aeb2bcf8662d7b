#include "mgtta/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace mgtta {

namespace {

struct TopTwo {
  std::size_t first;
  std::size_t second;
  bool tied;  // a tie at the top or between second and third place
};

TopTwo top_two(const Posterior& p) {
  const auto order = rank_order(p.values());
  bool tied = p[order[0]] == p[order[1]];
  if (p.size() > 2 && p[order[1]] == p[order[2]]) tied = true;
  return {order[0], order[1], tied};
}

}  // namespace

DemixingVerdict check_beneficial_demixing(const Posterior& q, const Posterior& p_shift,
                                          const Posterior& pi_clean, double tol) {
  require_same_dim(q.size(), p_shift.size(), "check_beneficial_demixing");
  require_same_dim(q.size(), pi_clean.size(), "check_beneficial_demixing");

  const TopOne clean = top_one_margin(pi_clean);
  DemixingVerdict v;
  v.separable = clean.margin > 0.0;
  v.cond_majorize = majorizes(q, p_shift, tol);

  const TopTwo tq = top_two(q);
  const TopTwo tp = top_two(pi_clean);
  v.cond_top2_order = !tq.tied && !tp.tied && tq.first == tp.first && tq.second == tp.second;

  double linf = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) linf = std::max(linf, std::abs(q[i] - pi_clean[i]));
  v.cond_margin = linf < clean.margin / 2.0;

  v.entropy_reduced = entropy(q) <= entropy(p_shift) + tol;
  v.argmax_preserved = top_one_margin(q).argmax == clean.argmax && top_one_margin(q).margin > 0.0;

  if (v.hypotheses_hold() && !(v.entropy_reduced && v.argmax_preserved)) {
    throw Error(ErrorKind::guarantee_violated,
                "demixing hypotheses hold but entropy_reduced=" + std::to_string(v.entropy_reduced) +
                    " argmax_preserved=" + std::to_string(v.argmax_preserved));
  }
  return v;
}

bool correctness_transfer(const Posterior& q, const Posterior& p_shift, const Posterior& pi_clean,
                          std::size_t true_label, double tol) {
  require(true_label < q.size(), ErrorKind::invalid_argument, "label out of range");
  const DemixingVerdict v = check_beneficial_demixing(q, p_shift, pi_clean, tol);
  const bool q_correct = top_one_margin(q).argmax == true_label;
  const bool clean_correct = top_one_margin(pi_clean).argmax == true_label;
  if (v.hypotheses_hold() && clean_correct && !q_correct) {
    throw Error(ErrorKind::guarantee_violated, "clean prediction correct but adapted prediction is not");
  }
  return q_correct;
}

DominanceThreshold failure_threshold(double delta_v, double delta_t) {
  require(delta_v < 0.0 && delta_t > 0.0, ErrorKind::precondition_violated,
          "modality margins must satisfy delta_v < 0 < delta_t");
  return {delta_t / (delta_t - delta_v), 0, 0, delta_v, delta_t};
}

DominanceThreshold failure_threshold(const Posterior& p_v, const Posterior& p_t, std::size_t c,
                                     std::size_t j) {
  require_same_dim(p_v.size(), p_t.size(), "failure_threshold");
  require(c < p_v.size() && j < p_v.size() && c != j, ErrorKind::invalid_argument,
          "class indices must be distinct and in range");
  DominanceThreshold t = failure_threshold(p_v[c] - p_v[j], p_t[c] - p_t[j]);
  t.class_c = c;
  t.class_j = j;
  return t;
}

double fused_margin(double alpha, double delta_v, double delta_t) {
  return alpha * delta_v + (1.0 - alpha) * delta_t;
}

bool decision_flips(const DominanceThreshold& t, double alpha) { return alpha > t.threshold; }

bool verify_entropy_increase(const Posterior& pi, const DoublyStochasticMatrix& d) {
  const Posterior mixed = apply_mixing(d, pi);
  const bool maj = majorizes(pi, mixed);
  const bool ent = entropy(mixed) >= entropy(pi) - 1e-9;
  if (!maj || !ent) {
    throw Error(ErrorKind::guarantee_violated,
                "mixing decreased entropy or broke majorization (majorizes=" + std::to_string(maj) +
                    ", entropy_ok=" + std::to_string(ent) + ")");
  }
  return true;
}

DemixingInstance sample_demixing_instance(std::size_t k, Rng& rng, double min_gamma,
                                          int max_attempts) {
  require(k >= 2, ErrorKind::invalid_argument, "k must be at least 2");
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> n_perms(1, 4);

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    // Sharpened Dirichlet(1) so margins >= min_gamma are common.
    std::vector<double> w(k);
    for (double& x : w) x = std::pow(expo(rng), 2.0);
    const Posterior pi = Posterior::normalized(std::move(w));
    const double gamma = top_one_margin(pi).margin;
    if (gamma < min_gamma) continue;

    const double s = unit(rng);
    const double b = 0.5 * unit(rng);
    const auto d = DoublyStochasticMatrix::mix(
        blend_identity_uniform(k, s), random_birkhoff(k, static_cast<std::size_t>(n_perms(rng)), rng), b);
    const Posterior p = apply_mixing(d, pi);

    double linf = 0.0;
    for (std::size_t i = 0; i < k; ++i) linf = std::max(linf, std::abs(p[i] - pi[i]));
    // q = (1 - eps) pi + eps p has ||q - pi||_inf = eps * linf; keep it under gamma / 2.
    const double eps_cap = linf > 0.0 ? std::min(1.0, 0.5 * gamma / linf) : 1.0;
    const double eps = eps_cap * unit(rng);

    std::vector<double> qv(k);
    for (std::size_t i = 0; i < k; ++i) qv[i] = (1.0 - eps) * pi[i] + eps * p[i];
    Posterior q = Posterior::normalized(std::move(qv));

    const DemixingVerdict v = check_beneficial_demixing(q, p, pi);
    if (v.hypotheses_hold()) return {pi, p, std::move(q), gamma, eps, attempt};
  }
  throw Error(ErrorKind::rejection_budget, "no hypothesis-satisfying demixing instance found");
}

}  // namespace mgtta
