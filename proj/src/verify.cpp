#include "mgtta/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "mgtta/oracles.hpp"
#include "mgtta/theory.hpp"

namespace mgtta {

namespace {

Rng seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, 0x5eedu};
  return Rng(seq);
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Posterior random_posterior(std::size_t k, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(k);
  for (double& x : w) x = e(rng) + 1e-6;
  return Posterior::normalized(std::move(w));
}

CheckResult timed(std::string name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string pct(double x) {
  std::ostringstream os;
  os.precision(2);
  os << std::fixed << 100.0 * x;
  return os.str();
}

}  // namespace

CheckResult check_majorization_fuzz(const VerifyOptions& opt, int cases) {
  return timed("majorization_fuzz", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 1);
    std::uniform_real_distribution<double> pos(0.01, 10.0);
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
      const std::size_t k = uniform_size(rng, 2, 12);
      const Posterior u = random_posterior(k, rng);
      const DoublyStochasticMatrix d = [&] {
        if (i % 2 == 0) return random_birkhoff(k, uniform_size(rng, 1, 6), rng);
        SquareMatrix m(k);
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b < k; ++b) m(a, b) = pos(rng);
        return sinkhorn_project(m).matrix;
      }();
      const Posterior du = apply_mixing(d, u);
      if (majorizes(u, du) && entropy(du) >= entropy(u) - 1e-9) ++ok;
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " pairs";
  });
}

CheckResult check_demixing_guarantee(const VerifyOptions& opt, int cases) {
  return timed("demixing_guarantee", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 2);
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
      const DemixingInstance inst = sample_demixing_instance(uniform_size(rng, 3, 10), rng);
      try {
        const DemixingVerdict v = check_beneficial_demixing(inst.q, inst.p_shift, inst.pi_clean);
        if (v.hypotheses_hold() && v.entropy_reduced && v.argmax_preserved) ++ok;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::guarantee_violated) throw;
      }
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " certified instances";
  });
}

CheckResult check_flip_threshold(const VerifyOptions& opt, std::size_t samples) {
  return timed("flip_threshold", [&](CheckResult& r) {
    const DominanceThreshold worked = failure_threshold(-0.2, 0.3);
    const bool worked_ok = std::abs(worked.threshold - 0.6) < 1e-12 &&
                           std::abs(fused_margin(0.7, -0.2, 0.3) + 0.05) < 1e-12 &&
                           decision_flips(worked, 0.7) && !decision_flips(worked, 0.5);

    ExperimentConfig cfg;
    cfg.seeds = {opt.seed};
    cfg.conditions = {{"conflict", {}}};
    cfg.methods = default_methods();
    ShiftSpec spec;
    spec.visual_severity = 2;
    spec.textual_severity = 3;
    spec.conflicting = true;
    std::size_t ok = 0;
    double worst = 0.0;
    for (const SweepRow& row : alpha_threshold_sweep(cfg, spec, samples)) {
      const double err = std::abs(row.located - row.threshold);
      worst = std::max(worst, err);
      if (row.sign_changes == 1 && err <= 1e-3) ++ok;
    }
    r.passed = worked_ok && ok == samples;
    std::ostringstream os;
    os << ok << "/" << samples << " located within 1e-3 (worst " << worst << "), worked instance "
       << (worked_ok ? "ok" : "wrong");
    r.detail = os.str();
  });
}

CheckResult check_gradients(const VerifyOptions& opt, int cases) {
  return timed("gradient_check", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 3);
    std::normal_distribution<double> nz(0.0, 1.5);
    std::normal_distribution<double> nw(0.0, 0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const AdaptMode modes[] = {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::entropy_div,
                               AdaptMode::mg_mtta};
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < cases; ++i) {
      AdaptConfig cfg;
      cfg.mode = modes[i % 4];
      cfg.lambda_g = 0.05 + unit(rng);
      cfg.lambda_d = 0.01 + unit(rng);
      cfg.direction = opt.direction;
      const std::size_t k = uniform_size(rng, 2, 10);
      const std::size_t n = uniform_size(rng, 1, 12);
      std::vector<GateInput> batch;
      std::vector<GatePrior> priors;
      for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> zv(k), zt(k);
        for (std::size_t c = 0; c < k; ++c) {
          zv[c] = nz(rng);
          zt[c] = nz(rng);
        }
        const GateFeatures f{unit(rng), unit(rng), unit(rng), unit(rng) * std::log(double(k)),
                             unit(rng) * std::log(double(k))};
        batch.push_back({LogitVector(zv), LogitVector(zt), f});
        priors.push_back(gate_prior(f.rho_v, f.rho_t, f.kappa, cfg.conflict()));
      }
      GateParams params;
      for (double& w : params.weights) w = nw(rng);
      params.bias = nw(rng);

      const GateParams analytic = batch_gradient(batch, params, priors, cfg);
      const GateParams numeric = oracle::central_difference(
          [&](const GateParams& p) { return batch_loss(batch, p, priors, cfg).total; }, params);
      const double err = oracle::relative_error(analytic, numeric);
      worst = std::max(worst, err);
      if (err < 1e-4) ++ok;
    }
    r.passed = ok == cases;
    std::ostringstream os;
    os << ok << "/" << cases << " below 1e-4 (worst " << worst << ")";
    r.detail = os.str();
  });
}

CheckResult check_ds_fit(const VerifyOptions& opt) {
  return timed("ds_fit", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 4);
    int grid_ok = 0;
    double grid_worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const std::size_t k = 2 + static_cast<std::size_t>(i % 2);
      const Posterior p = random_posterior(k, rng);
      const Posterior a = random_posterior(k, rng);
      const double err = std::abs(ds_fit_residual(p, a).residual - oracle::grid_ds_fit(p, a));
      grid_worst = std::max(grid_worst, err);
      if (err <= 0.02) ++grid_ok;
    }
    int zero_ok = 0;
    double zero_worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t k = uniform_size(rng, 2, 10);
      const Posterior a = random_posterior(k, rng);
      const Posterior p = apply_mixing(random_birkhoff(k, uniform_size(rng, 1, 5), rng), a);
      const double res = ds_fit_residual(p, a).residual;
      zero_worst = std::max(zero_worst, res);
      if (res <= 1e-3) ++zero_ok;
    }
    r.passed = grid_ok == 50 && zero_ok == 100;
    std::ostringstream os;
    os << grid_ok << "/50 within 0.02 of grid (worst " << grid_worst << "), " << zero_ok
       << "/100 zero-residual <= 1e-3 (worst " << zero_worst << ")";
    r.detail = os.str();
  });
}

CheckResult check_sinkhorn(const VerifyOptions& opt, int cases) {
  return timed("sinkhorn", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 5);
    std::uniform_real_distribution<double> pos(0.01, 10.0);
    int ok = 0;
    int max_iter = 0;
    for (int i = 0; i < cases; ++i) {
      const std::size_t k = uniform_size(rng, 2, 20);
      SquareMatrix m(k);
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) m(a, b) = pos(rng);
      const SinkhornResult s = sinkhorn_project(m);
      max_iter = std::max(max_iter, s.iterations);
      if (s.matrix.matrix().marginal_error() <= 1e-8 && s.iterations <= 500) ++ok;
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " within 1e-8 (max " +
               std::to_string(max_iter) + " iterations)";
  });
}

ExperimentConfig severity_scenario() {
  ExperimentConfig cfg;
  cfg.stream.k = 10;
  cfg.stream.n = 2000;
  for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
  AdaptConfig src;
  src.mode = AdaptMode::source_only;
  cfg.methods = {{"source_only", src}};
  for (int level = 0; level <= kMaxSeverity; ++level) {
    ShiftSpec spec;
    spec.textual_severity = level;
    spec.birkhoff_noise = 0.3;
    cfg.conditions.push_back({"L" + std::to_string(level), spec});
  }
  return cfg;
}

ExperimentConfig conflict_scenario(ConflictDirection direction) {
  ExperimentConfig cfg;
  cfg.stream.k = 10;
  cfg.stream.n = 2000;
  for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
  ShiftSpec spec;
  spec.textual_severity = 5;
  spec.conflicting = true;
  cfg.conditions = {{"conflict_t5", spec}};

  AdaptConfig base;
  base.lr = 0.1;
  base.lambda_g = 1.0;
  base.direction = direction;
  for (AdaptMode m : {AdaptMode::source_only, AdaptMode::entropy_only, AdaptMode::mg_mtta}) {
    AdaptConfig c = base;
    c.mode = m;
    cfg.methods.push_back({std::string(to_string(m)), c});
  }
  return cfg;
}

CheckResult check_severity_calibration(const VerifyOptions&) {
  return timed("severity_calibration", [&](CheckResult& r) {
    const auto reports = run_experiment(severity_scenario());
    std::vector<double> acc(kMaxSeverity + 1, 0.0);
    for (const auto& rep : reports) acc[std::stoi(rep.condition.substr(1))] = rep.top1_accuracy;
    bool ok = true;
    std::ostringstream os;
    for (std::size_t l = 0; l < acc.size(); ++l) {
      if (l > 0 && acc[l] > acc[l - 1] + 0.005) ok = false;
      os << (l ? " " : "") << "L" << l << "=" << pct(acc[l]);
    }
    r.passed = ok;
    r.detail = os.str();
  });
}

CheckResult check_conflict_ordering(const VerifyOptions& opt) {
  return timed("conflict_ordering", [&](CheckResult& r) {
    double src = 0, ent = 0, mg = 0;
    for (const auto& rep : run_experiment(conflict_scenario(opt.direction))) {
      if (rep.method == "source_only") src = rep.top1_accuracy;
      else if (rep.method == "entropy_only") ent = rep.top1_accuracy;
      else if (rep.method == "mg_mtta") mg = rep.top1_accuracy;
    }
    r.passed = mg > src && ent <= src + 0.005 && mg - ent >= 0.03;
    r.detail = "source_only=" + pct(src) + " entropy_only=" + pct(ent) + " mg_mtta=" + pct(mg);
  });
}

CheckResult check_conflict_direction(const VerifyOptions& opt, int cases) {
  return timed("conflict_direction", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ConflictParams params;
    params.direction = opt.direction;
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
      const double rv = unit(rng);
      const double rt = (i % 5 == 0) ? rv : unit(rng);
      const double kappa = unit(rng);
      const double step = 0.05 + unit(rng);
      const double lo = gate_prior(rv, rt, kappa, params).a_v;
      const double hi = gate_prior(rv, rt, kappa + step, params).a_v;
      const bool good = rv > rt ? hi < lo : rv < rt ? hi > lo : hi == lo;
      if (good) ++ok;
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " kappa perturbations move a_v correctly";
  });
}

CheckResult check_gate_monotonicity(const VerifyOptions& opt, int cases) {
  return timed("gate_monotonicity", [&](CheckResult& r) {
    Rng rng = seeded(opt.seed, 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ConflictParams params;
    params.direction = opt.direction;
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
      const double rv = unit(rng);
      const double rt = unit(rng);
      const double kappa = unit(rng);
      const double bump = 0.01 + 0.5 * unit(rng);
      // Keep the sign of rho_v - rho_t fixed so only the reliability term moves.
      if ((rv > rt) != (rv + bump > rt) || rv == rt) {
        ++ok;
        continue;
      }
      const double a = gate_prior(rv, rt, kappa, params).a_v;
      const double b = gate_prior(rv + bump, rt, kappa, params).a_v;
      if (b < a) ++ok;
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " rho_v increases lower a_v";
  });
}

CheckResult check_run_determinism(const VerifyOptions& opt) {
  return timed("run_determinism", [&](CheckResult& r) {
    ExperimentConfig cfg;
    cfg.stream.n = 300;
    cfg.seeds = {opt.seed, opt.seed + 1};
    ShiftSpec spec;
    spec.visual_severity = 2;
    spec.textual_severity = 4;
    spec.conflicting = true;
    spec.birkhoff_noise = 0.2;
    spec.residual_scale = 0.05;
    cfg.conditions = {{"mixed", spec}};
    cfg.methods = default_methods();
    const std::string hash = config_hash(cfg);
    auto render = [&] {
      std::ostringstream os;
      write_reports(os, run_experiment(cfg), ReportFormat::records, hash);
      return os.str();
    };
    const std::string a = render();
    const std::string b = render();
    r.passed = a == b;
    r.detail = r.passed ? "identical record output" : "record output differs between runs";
  });
}

std::vector<CheckResult> verify_suite(const VerifyOptions& opt) {
  return {check_majorization_fuzz(opt),  check_demixing_guarantee(opt), check_flip_threshold(opt),
          check_gradients(opt),          check_ds_fit(opt),             check_sinkhorn(opt),
          check_gate_monotonicity(opt),  check_conflict_direction(opt), check_severity_calibration(opt),
          check_conflict_ordering(opt),  check_run_determinism(opt)};
}

}  // namespace mgtta
