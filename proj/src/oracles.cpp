#include "mgtta/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mgtta::oracle {

namespace {

// Visits every way of splitting `units` grid units over the remaining
// vertices, accumulating the mixed point in `acc`.
void enumerate(const std::vector<std::vector<double>>& vertices, std::size_t v, int units,
               double unit, std::vector<double>& acc, std::span<const double> p, double& best) {
  const std::size_t k = acc.size();
  if (v + 1 == vertices.size()) {
    double f = 0.0;
    const double w = units * unit;
    for (std::size_t i = 0; i < k; ++i) f += std::abs(p[i] - (acc[i] + w * vertices[v][i]));
    best = std::min(best, f);
    return;
  }
  for (int u = 0; u <= units; ++u) {
    const double w = u * unit;
    for (std::size_t i = 0; i < k; ++i) acc[i] += w * vertices[v][i];
    enumerate(vertices, v + 1, units - u, unit, acc, p, best);
    for (std::size_t i = 0; i < k; ++i) acc[i] -= w * vertices[v][i];
  }
}

}  // namespace

double grid_ds_fit(const Posterior& p, const Posterior& anchor, double resolution) {
  require_same_dim(p.size(), anchor.size(), "grid_ds_fit");
  const std::size_t k = p.size();
  require(k <= 3, ErrorKind::invalid_argument, "grid oracle is limited to K <= 3");
  const int units = static_cast<int>(std::lround(1.0 / resolution));

  // P * anchor for every permutation matrix P.
  std::vector<std::vector<double>> vertices;
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    std::vector<double> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = anchor[perm[i]];
    vertices.push_back(std::move(v));
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<double> acc(k, 0.0);
  double best = std::numeric_limits<double>::infinity();
  enumerate(vertices, 0, units, 1.0 / units, acc, p.values(), best);
  return best;
}

GateParams central_difference(const std::function<double(const GateParams&)>& f,
                              const GateParams& params, double h) {
  GateParams g;
  for (std::size_t j = 0; j <= kGateFeatureCount; ++j) {
    GateParams plus = params;
    GateParams minus = params;
    double& xp = j < kGateFeatureCount ? plus.weights[j] : plus.bias;
    double& xm = j < kGateFeatureCount ? minus.weights[j] : minus.bias;
    xp += h;
    xm -= h;
    const double d = (f(plus) - f(minus)) / (2.0 * h);
    (j < kGateFeatureCount ? g.weights[j] : g.bias) = d;
  }
  return g;
}

double relative_error(const GateParams& a, const GateParams& b, double floor) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t j = 0; j < kGateFeatureCount; ++j) {
    diff += std::pow(a.weights[j] - b.weights[j], 2);
    na += a.weights[j] * a.weights[j];
    nb += b.weights[j] * b.weights[j];
  }
  diff += std::pow(a.bias - b.bias, 2);
  na += a.bias * a.bias;
  nb += b.bias * b.bias;
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

MarginSweep sweep_fused_margin(const Posterior& p_v, const Posterior& p_t, std::size_t c,
                               std::size_t j, int points) {
  require(points >= 2, ErrorKind::invalid_argument, "sweep needs at least two points");
  MarginSweep out;
  out.spacing = 1.0 / (points - 1);
  double prev_alpha = 0.0;
  double prev = 0.0;
  for (int i = 0; i < points; ++i) {
    const double alpha = static_cast<double>(i) / (points - 1);
    const Posterior q = fuse_probs(alpha, p_v, p_t);
    const double m = q[c] - q[j];
    if (i > 0 && (prev > 0.0) != (m > 0.0)) {
      if (out.sign_changes == 0) out.crossing = 0.5 * (prev_alpha + alpha);
      ++out.sign_changes;
    }
    prev = m;
    prev_alpha = alpha;
  }
  return out;
}

}  // namespace mgtta::oracle
