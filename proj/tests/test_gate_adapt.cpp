#include <doctest.h>

#include <algorithm>

#include "mgtta/gate_adapt.hpp"
#include "support.hpp"

using namespace mgtta;
using doctest::Approx;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LogitVector random_logits(std::size_t k, Rng& rng, double scale = 1.5) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> z(k);
  for (double& x : z) x = n(rng);
  return LogitVector(z);
}

GateFeatures random_features(std::size_t k, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lk = std::log(double(k));
  return {u(rng), u(rng), u(rng), lk * u(rng), lk * u(rng)};
}

struct Instance {
  std::vector<GateInput> batch;
  std::vector<GatePrior> priors;
  GateParams params;
};

Instance random_instance(Rng& rng, const AdaptConfig& cfg) {
  std::normal_distribution<double> w(0.0, 0.5);
  Instance in;
  const std::size_t k = test::pick(rng, 2, 10);
  const std::size_t n = test::pick(rng, 1, 10);
  for (std::size_t i = 0; i < n; ++i) {
    const GateFeatures f = random_features(k, rng);
    in.batch.push_back({random_logits(k, rng), random_logits(k, rng), f});
    in.priors.push_back(gate_prior(f.rho_v, f.rho_t, f.kappa, cfg.conflict()));
  }
  for (double& x : in.params.weights) x = w(rng);
  in.params.bias = w(rng);
  return in;
}

std::vector<ModalityOutputs> random_outputs(std::size_t k, std::size_t n, Rng& rng) {
  std::vector<ModalityOutputs> out;
  for (std::size_t i = 0; i < n; ++i) {
    const LogitVector zv = random_logits(k, rng, 2.5);
    const LogitVector zt = random_logits(k, rng, 2.5);
    const Posterior pv = softmax(zv);
    const Posterior pt = softmax(zt);
    out.push_back({pv, pt, LogitVector(log_probs(pv).vec()), LogitVector(log_probs(pt).vec())});
  }
  return out;
}

// Objective evaluated directly from its definition.
double reference_total(const Instance& in, const GateParams& p, const AdaptConfig& cfg) {
  const double n = double(in.batch.size());
  const std::size_t k = in.batch.front().z_v.size();
  std::vector<double> mean(k, 0.0);
  double ent = 0.0, gate = 0.0;
  for (std::size_t i = 0; i < in.batch.size(); ++i) {
    const auto f = in.batch[i].features.as_array();
    double u = p.bias;
    for (std::size_t j = 0; j < f.size(); ++j) u += p.weights[j] * f[j];
    const double a = logistic(u);
    std::vector<double> z(k);
    double zmax = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = a * in.batch[i].z_v[c] + (1.0 - a) * in.batch[i].z_t[c];
      zmax = std::max(zmax, z[c]);
    }
    double s = 0.0;
    for (double& x : z) s += (x = std::exp(x - zmax));
    for (double& x : z) x /= s;
    ent += test::naive_entropy(z) / n;
    for (std::size_t c = 0; c < k; ++c) mean[c] += z[c] / n;
    const GatePrior& pr = in.priors[i];
    gate += (a * std::log(a / pr.a_v) + (1.0 - a) * std::log((1.0 - a) / pr.a_t)) / n;
  }
  return ent + cfg.effective_lambda_g() * gate - cfg.effective_lambda_d() * test::naive_entropy(mean);
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const AdaptConfig cfg;
  CHECK(cfg.lr == 1e-3);
  CHECK(cfg.lambda_g == 0.1);
  CHECK(cfg.lambda_d == 0.01);
  CHECK(cfg.lambda_c == 0.25);
  CHECK(cfg.tau == 5.0);
  CHECK(cfg.eta == 0.7);
  CHECK(cfg.mu == 0.9);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.steps == 2);
  CHECK_NOTHROW(cfg.validate());

  AdaptConfig bad;
  bad.steps = 0;
  CHECK(test::error_kind_of([&] { bad.validate(); }) == ErrorKind::config_invalid);
  bad = {};
  bad.lambda_g = -1.0;
  CHECK(test::error_kind_of([&] { bad.validate(); }) == ErrorKind::config_invalid);
  CHECK(parse_mode("entropy_div") == AdaptMode::entropy_div);
  CHECK(to_string(AdaptMode::mg_mtta) == "mg_mtta");
  CHECK(test::error_kind_of([] { parse_mode("tent"); }) == ErrorKind::config_invalid);

  AdaptConfig ent;
  ent.mode = AdaptMode::entropy_only;
  CHECK(ent.effective_lambda_g() == 0.0);
  CHECK(ent.effective_lambda_d() == 0.0);
  ent.mode = AdaptMode::entropy_div;
  CHECK(ent.effective_lambda_g() == 0.0);
  CHECK(ent.effective_lambda_d() == 0.01);
}

TEST_CASE("gate alpha examples") {
  GateParams p;
  CHECK(gate_alpha(p, {0.3, 0.1, 0.9, 1.0, 2.0}) == 0.5);
  p.bias = 10.0;
  CHECK(gate_alpha(p, {}) > 0.999);
  p.bias = -800.0;
  CHECK(gate_alpha(p, {}) >= 0.0);
  GateParams q;
  q.weights = {1.0, -1.0, 0.0, 0.0, 0.0};
  CHECK(gate_alpha(q, {0.3, 0.1, 0.0, 0.0, 0.0}) == Approx(logistic(0.2)).epsilon(1e-14));
  CHECK(gate_alpha(q, {0.3, 0.1, 0.0, 0.0, 0.0}) == Approx(0.549834).epsilon(1e-6));
}

TEST_CASE("fusion examples") {
  const LogitVector zv({1.0, 0.0, -2.0});
  const LogitVector zt({-0.5, 0.7, 0.2});
  CHECK(fuse_logits(1.0, zv, zt) == softmax(zv));
  CHECK(fuse_logits(0.0, zv, zt) == softmax(zt));
  for (double a : {0.0, 0.3, 0.9}) {
    const Posterior f = fuse_logits(a, zv, zv);
    for (std::size_t c = 0; c < 3; ++c) CHECK(f[c] == Approx(softmax(zv)[c]).epsilon(1e-14));
  }

  const Posterior mid = fuse_probs(0.5, Posterior({1.0, 0.0}), Posterior({0.0, 1.0}));
  CHECK(mid[0] == 0.5);
  const Posterior pv({0.8, 0.2});
  CHECK(fuse_probs(1.0, pv, Posterior({0.2, 0.8})) == pv);
  const Posterior f = fuse_probs(0.6, pv, Posterior({0.2, 0.8}));
  CHECK(f[0] == Approx(0.56));
  CHECK(f[1] == Approx(0.44));

  CHECK(test::error_kind_of([&] { fuse_probs(1.5, pv, pv); }) == ErrorKind::invalid_argument);
  CHECK(test::error_kind_of([&] { fuse_logits(0.5, zv, LogitVector({0.0, 1.0})); }) ==
        ErrorKind::dimension_mismatch);
}

TEST_CASE("property: probability fusion stays on the simplex") {
  Rng rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = test::pick(rng, 2, 12);
    CHECK_NOTHROW(fuse_probs(u(rng), test::random_posterior(k, rng), test::random_posterior(k, rng)));
  }
}

TEST_CASE("batch loss examples") {
  AdaptConfig cfg;
  // one-hot fused posterior, gate sitting on its prior
  const std::vector<GateInput> sharp{{LogitVector({0.0, -800.0}), LogitVector({0.0, -800.0}), {}}};
  const std::vector<GatePrior> even{{0.5, 0.5}};
  const LossBreakdown l = batch_loss(sharp, GateParams{}, even, cfg);
  CHECK(l.l_ent == Approx(0.0).epsilon(1e-12));
  CHECK(l.l_gate == Approx(0.0).epsilon(1e-12));

  const std::vector<GateInput> opposite{{LogitVector({0.0, -800.0}), LogitVector({0.0, -800.0}), {}},
                                        {LogitVector({-800.0, 0.0}), LogitVector({-800.0, 0.0}), {}}};
  const std::vector<GatePrior> evens{{0.5, 0.5}, {0.5, 0.5}};
  CHECK(batch_loss(opposite, GateParams{}, evens, cfg).l_div == Approx(-std::log(2.0)).epsilon(1e-12));

  // one sample: the batch marginal is the sample itself
  Rng rng(42);
  for (int t = 0; t < 20; ++t) {
    Instance in = random_instance(rng, cfg);
    in.batch.resize(1);
    in.priors.resize(1);
    const LossBreakdown one = batch_loss(in.batch, in.params, in.priors, cfg);
    const double a = gate_alpha(in.params, in.batch[0].features);
    const double h = entropy(fuse_logits(a, in.batch[0].z_v, in.batch[0].z_t));
    CHECK(one.total == Approx((1.0 - cfg.lambda_d) * h + cfg.lambda_g * one.l_gate).epsilon(1e-10));
  }

  CHECK(test::error_kind_of([&] { batch_loss({}, GateParams{}, {}, cfg); }) == ErrorKind::empty_batch);
  CHECK(test::error_kind_of([&] { batch_loss(sharp, GateParams{}, evens, cfg); }) ==
        ErrorKind::dimension_mismatch);
}

TEST_CASE("property: loss breakdown invariants and reference objective") {
  Rng rng(43);
  const AdaptMode modes[] = {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::entropy_div,
                             AdaptMode::mg_mtta};
  for (int t = 0; t < 200; ++t) {
    AdaptConfig cfg;
    cfg.mode = modes[t % 4];
    cfg.lambda_g = 0.5;
    cfg.lambda_d = 0.3;
    const Instance in = random_instance(rng, cfg);
    const LossBreakdown l = batch_loss(in.batch, in.params, in.priors, cfg);
    const std::size_t k = in.batch.front().z_v.size();
    CHECK(l.total == Approx(l.l_ent + cfg.effective_lambda_g() * l.l_gate + cfg.effective_lambda_d() * l.l_div)
                         .epsilon(1e-10));
    CHECK(l.l_ent >= 0.0);
    CHECK(l.l_gate >= 0.0);
    CHECK(l.l_div <= 0.0);
    CHECK(l.l_div >= -std::log(double(k)) - 1e-12);
    CHECK(l.total == Approx(reference_total(in, in.params, cfg)).epsilon(1e-9));
  }
}

TEST_CASE("gradient examples") {
  AdaptConfig cfg;
  cfg.lambda_g = 0.0;
  Rng rng(44);
  std::vector<GateInput> equal;
  std::vector<GatePrior> priors;
  for (int i = 0; i < 5; ++i) {
    const LogitVector z = random_logits(4, rng);
    equal.push_back({z, z, random_features(4, rng)});
    priors.push_back({0.3, 0.7});
  }
  GateParams p;
  p.weights = {0.2, -0.4, 0.1, 0.3, -0.2};
  CHECK(batch_gradient(equal, p, priors, cfg) == GateParams{});

  cfg = {};
  cfg.lambda_d = 0.0;
  std::vector<GatePrior> halves(5, {0.5, 0.5});
  CHECK(batch_gradient(equal, GateParams{}, halves, cfg) == GateParams{});
}

TEST_CASE("property: analytic gradient matches central differences") {
  Rng rng(45);
  const AdaptMode modes[] = {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::entropy_div,
                             AdaptMode::mg_mtta};
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    AdaptConfig cfg;
    cfg.mode = modes[t % 4];
    cfg.lambda_g = 0.05 + 0.02 * (t % 50);
    cfg.lambda_d = 0.01 + 0.01 * (t % 30);
    const Instance in = random_instance(rng, cfg);
    const GateParams g = batch_gradient(in.batch, in.params, in.priors, cfg);

    std::vector<double> analytic(g.weights.begin(), g.weights.end());
    analytic.push_back(g.bias);
    std::vector<double> numeric;
    for (std::size_t j = 0; j <= kGateFeatureCount; ++j) {
      GateParams up = in.params, dn = in.params;
      double& a = j < kGateFeatureCount ? up.weights[j] : up.bias;
      double& b = j < kGateFeatureCount ? dn.weights[j] : dn.bias;
      a += h;
      b -= h;
      numeric.push_back((reference_total(in, up, cfg) - reference_total(in, dn, cfg)) / (2 * h));
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      diff += (analytic[j] - numeric[j]) * (analytic[j] - numeric[j]);
      norm += numeric[j] * numeric[j];
    }
    CHECK(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8) < 1e-4);
  }
}

TEST_CASE("adapt batch: source only and zero learning rate") {
  Rng rng(46);
  const auto batch = random_outputs(6, 32, rng);

  AdaptConfig src;
  src.mode = AdaptMode::source_only;
  src.lr = 0.5;
  AdaptState a(6, src);
  const AdaptResult ra = adapt_batch(a, batch, src);
  CHECK(a.params == GateParams{});
  src.lr = 1e-6;
  AdaptState b(6, src);
  const AdaptResult rb = adapt_batch(b, batch, src);
  CHECK(ra.adapted == rb.adapted);
  CHECK(ra.adapted == ra.pre_fused);

  AdaptConfig frozen;
  frozen.lr = 0.0;
  AdaptState c(6, frozen);
  const AdaptResult rc = adapt_batch(c, batch, frozen);
  CHECK(c.params == GateParams{});
  CHECK(rc.adapted == rc.pre_fused);

  CHECK(test::error_kind_of([&] { adapt_batch(c, std::vector<ModalityOutputs>{}, frozen); }) ==
        ErrorKind::empty_batch);
}

TEST_CASE("property: two gradient steps descend the objective") {
  Rng rng(47);
  int descended = 0;
  for (int t = 0; t < 200; ++t) {
    AdaptConfig cfg;
    AdaptState s(8, cfg);
    const AdaptResult r = adapt_batch(s, random_outputs(8, 64, rng), cfg);
    if (r.loss_after.total <= r.loss_before.total) ++descended;
  }
  CHECK(descended >= 190);
}

TEST_CASE("property: a dominant gate term pulls alpha onto the prior") {
  Rng rng(48);
  AdaptConfig cfg;
  cfg.lambda_g = 100.0;
  cfg.lambda_d = 0.0;
  // without the conflict correction the prior logit is affine in the features
  cfg.lambda_c = 0.0;
  // the entropy features are nearly collinear with the bias, so the step must stay small
  cfg.lr = 0.01;
  cfg.steps = 20000;
  cfg.eta = 0.3;
  const auto batch = random_outputs(5, 16, rng);
  AdaptState s(5, cfg);
  const AdaptResult r = adapt_batch(s, batch, cfg);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(std::abs(r.alphas[i] - r.priors[i].a_v) < 0.02);
}

TEST_CASE("mode reduction: mg_mtta without prior or diversity equals entropy_only") {
  Rng rng(49);
  const auto batch = random_outputs(7, 40, rng);
  AdaptConfig mg;
  mg.lambda_g = 0.0;
  mg.lambda_d = 0.0;
  mg.lr = 0.3;
  AdaptConfig ent = mg;
  ent.mode = AdaptMode::entropy_only;
  AdaptState a(7, mg), b(7, ent);
  for (int rep = 0; rep < 3; ++rep) {
    const AdaptResult ra = adapt_batch(a, batch, mg);
    const AdaptResult rb = adapt_batch(b, batch, ent);
    CHECK(ra.adapted == rb.adapted);
    CHECK(ra.alphas == rb.alphas);
  }
  CHECK(a.params == b.params);
}

TEST_CASE("episode reset") {
  Rng rng(50);
  const auto batch = random_outputs(4, 20, rng);
  AdaptConfig cfg;
  cfg.lr = 0.5;
  AdaptState pristine(4, cfg);
  AdaptState used(4, cfg);
  for (int i = 0; i < 5; ++i) adapt_batch(used, random_outputs(4, 20, rng), cfg);
  CHECK_FALSE(used.params == GateParams{});

  reset_episode(used);
  reset_episode(used);
  CHECK(used.params == GateParams{});
  CHECK_FALSE(used.anchor_v.initialized());
  CHECK_FALSE(used.anchor_t.initialized());
  CHECK(gate_alpha(used.params, {0.4, 0.9, 1.2, 0.3, 2.0}) == 0.5);

  AdaptConfig src = cfg;
  src.mode = AdaptMode::source_only;
  const AdaptResult a = adapt_batch(used, batch, src);
  const AdaptResult b = adapt_batch(pristine, batch, src);
  CHECK(a.adapted == b.adapted);
  CHECK(a.alphas == b.alphas);
}
