#include "mgtta/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace mgtta {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::divergence_undefined: return "divergence undefined";
    case ErrorKind::invalid_residual: return "invalid residual";
    case ErrorKind::uninitialized_anchor: return "uninitialized anchor";
    case ErrorKind::empty_batch: return "empty batch";
    case ErrorKind::precondition_violated: return "precondition violated";
    case ErrorKind::guarantee_violated: return "guarantee violated";
    case ErrorKind::rejection_budget: return "rejection budget exceeded";
    case ErrorKind::config_invalid: return "invalid config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Posterior::Posterior(std::vector<double> probs) : probs_(std::move(probs)) {
  require(probs_.size() >= 2, ErrorKind::invalid_argument, "posterior needs K >= 2");
  double sum = 0.0;
  for (double x : probs_) {
    require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument,
            "posterior entries must be finite and nonnegative");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= kSimplexTol, ErrorKind::invalid_argument,
          "posterior mass is " + std::to_string(sum));
}

Posterior Posterior::uniform(std::size_t k) {
  return Posterior(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

Posterior Posterior::one_hot(std::size_t k, std::size_t index) {
  require(index < k, ErrorKind::invalid_argument, "one-hot index out of range");
  std::vector<double> v(k, 0.0);
  v[index] = 1.0;
  return Posterior(std::move(v));
}

Posterior Posterior::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double x : weights) {
    require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument,
            "weights must be finite and nonnegative");
    sum += x;
  }
  require(sum > 0.0, ErrorKind::invalid_argument, "weights sum to zero");
  for (double& x : weights) x /= sum;
  return Posterior(std::move(weights));
}

LogitVector::LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
  for (double x : logits_) {
    require(std::isfinite(x), ErrorKind::invalid_argument, "logits must be finite");
  }
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

double entropy(const Posterior& p) { return entropy(p.values()); }

std::vector<double> sorted_desc(std::span<const double> p) {
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

bool majorizes(const Posterior& u, const Posterior& v, double tol) {
  require_same_dim(u.size(), v.size(), "majorizes");
  const auto su = sorted_desc(u.values());
  const auto sv = sorted_desc(v.values());
  double pu = 0.0;
  double pv = 0.0;
  for (std::size_t i = 0; i < su.size(); ++i) {
    pu += su[i];
    pv += sv[i];
    if (pu < pv - tol) return false;
  }
  return true;
}

namespace {

std::vector<double> floored(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::max(x, kProbFloor);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

double kl_raw(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

}  // namespace

double kl(const Posterior& p, const Posterior& q, bool floor) {
  require_same_dim(p.size(), q.size(), "kl");
  if (floor) {
    const auto pf = floored(p.values());
    const auto qf = floored(q.values());
    return kl_raw(pf, qf);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] <= 0.0) {
      throw Error(ErrorKind::divergence_undefined,
                  "q has zero mass at class " + std::to_string(i) + " where p is positive");
    }
  }
  return kl_raw(p.values(), q.values());
}

double js(const Posterior& p, const Posterior& q) {
  require_same_dim(p.size(), q.size(), "js");
  const auto pf = floored(p.values());
  const auto qf = floored(q.values());
  std::vector<double> mid(pf.size());
  for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (pf[i] + qf[i]);
  const double d = 0.5 * kl_raw(pf, mid) + 0.5 * kl_raw(qf, mid);
  return std::clamp(d, 0.0, std::log(2.0));
}

double kendall_disagreement(const Posterior& p, const Posterior& q) {
  require_same_dim(p.size(), q.size(), "kendall_disagreement");
  const std::size_t k = p.size();
  std::size_t discordant = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      // With index tie-breaking, i precedes j exactly when p_i >= p_j.
      if ((p[i] >= p[j]) != (q[i] >= q[j])) ++discordant;
    }
  }
  const double pairs = static_cast<double>(k * (k - 1) / 2);
  return static_cast<double>(discordant) / pairs;
}

TopOne top_one_margin(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  double second = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != best) second = std::max(second, p[i]);
  }
  return {p[best] - second, best};
}

TopOne top_one_margin(const Posterior& p) { return top_one_margin(p.values()); }

double dist_to_permutation(const Posterior& p) {
  return 1.0 - *std::max_element(p.begin(), p.end());
}

Posterior softmax(std::span<const double> z, double temperature) {
  require(temperature > 0.0, ErrorKind::invalid_argument, "softmax temperature must be positive");
  require(z.size() >= 2, ErrorKind::invalid_argument, "softmax needs K >= 2");
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - zmax) / temperature);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return Posterior(std::move(out));
}

Posterior softmax(const LogitVector& z, double temperature) {
  return softmax(z.values(), temperature);
}

LogitVector log_probs(const Posterior& p) {
  std::vector<double> z(p.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::log(std::max(p[i], kProbFloor));
  return LogitVector(std::move(z));
}

std::vector<std::size_t> rank_order(std::span<const double> p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return idx;
}

}  // namespace mgtta
