#include <doctest.h>

#include <sstream>

#include "mgtta/records.hpp"
#include "mgtta/synthgen.hpp"
#include "support.hpp"

using namespace mgtta;
using doctest::Approx;

TEST_CASE("clean stream invariants") {
  Rng rng(61);
  const auto stream = gen_clean_stream(10, 1000, 0.5, 0.0, rng);
  REQUIRE(stream.size() == 1000);
  for (const auto& s : stream) {
    for (std::size_t c = 0; c < 10; ++c) {
      CHECK(s.pi_f[c] == Approx(0.5 * s.pi_v[c] + 0.5 * s.pi_t[c]).epsilon(1e-15));
    }
    CHECK(s.label == top_one_margin(s.pi_f).argmax);
    CHECK(s.gamma == top_one_margin(s.pi_f).margin);
  }

  Rng r2(62);
  for (const auto& s : gen_clean_stream(6, 300, 0.3, 0.2, r2)) CHECK(s.gamma >= 0.2);
}

TEST_CASE("clean stream is deterministic under a seed") {
  StreamParams p;
  p.n = 200;
  Rng a(63), b(63);
  const auto x = gen_clean_stream(p, a);
  const auto y = gen_clean_stream(p, b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].pi_v == y[i].pi_v);
    CHECK(x[i].pi_t == y[i].pi_t);
  }
}

TEST_CASE("clean stream errors") {
  Rng rng(64);
  StreamParams hopeless;
  hopeless.k = 100;
  hopeless.n = 1;
  hopeless.gamma_min = 0.89;
  hopeless.signal = 0.0;
  CHECK(test::error_kind_of([&] { gen_clean_stream(hopeless, rng); }) == ErrorKind::rejection_budget);
  CHECK(test::error_kind_of([&] { gen_clean_stream(1, 10, 0.5, 0.0, rng); }) == ErrorKind::config_invalid);
  CHECK(test::error_kind_of([&] { gen_clean_stream(5, 10, 0.5, 0.95, rng); }) == ErrorKind::config_invalid);
  CHECK(test::error_kind_of([&] { gen_clean_stream(5, 10, 1.5, 0.0, rng); }) == ErrorKind::config_invalid);

  const CleanSample s = make_clean_sample(Posterior({0.7, 0.3}), Posterior({0.4, 0.6}), 0.25);
  CHECK(s.pi_f[0] == Approx(0.475));
  CHECK(s.label == 1);
  CHECK(s.gamma == Approx(0.05));
}

TEST_CASE("severity ladder") {
  CHECK(severity_to_mixing(0) == 0.0);
  const double expected[] = {0.0, 0.10, 0.25, 0.40, 0.60, 0.80};
  for (int l = 0; l <= kMaxSeverity; ++l) CHECK(severity_to_mixing(l) == expected[l]);
  for (int l = 0; l < kMaxSeverity; ++l) CHECK(severity_to_mixing(l + 1) > severity_to_mixing(l));
  CHECK(test::error_kind_of([] { severity_to_mixing(6); }) == ErrorKind::invalid_argument);
  CHECK(test::error_kind_of([] { severity_to_mixing(-1); }) == ErrorKind::invalid_argument);

  ShiftSpec bad;
  bad.textual_severity = 7;
  CHECK(test::error_kind_of([&] { bad.validate(); }) == ErrorKind::config_invalid);
  bad = {};
  bad.birkhoff_noise = 1.5;
  CHECK(test::error_kind_of([&] { bad.validate(); }) == ErrorKind::config_invalid);
}

TEST_CASE("zero severity is the identity shift") {
  Rng rng(65);
  const auto clean = gen_clean_stream(8, 200, 0.5, 0.0, rng);
  ShiftSpec spec;
  spec.birkhoff_noise = 0.4;
  spec.residual_scale = 0.3;
  const auto shifted = apply_shift(clean, spec, rng);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(shifted[i].p_v == clean[i].pi_v);
    CHECK(shifted[i].p_t == clean[i].pi_t);
  }
}

TEST_CASE("property: logits are floored log posteriors") {
  Rng rng(66);
  const auto clean = gen_clean_stream(5, 100, 0.5, 0.0, rng);
  ShiftSpec spec;
  spec.visual_severity = 3;
  spec.textual_severity = 1;
  spec.residual_scale = 0.1;
  for (const auto& s : apply_shift(clean, spec, rng)) {
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(s.z_v[c] == std::log(std::max(s.p_v[c], kProbFloor)));
      CHECK(s.z_t[c] == std::log(std::max(s.p_t[c], kProbFloor)));
    }
  }
}

TEST_CASE("property: shift without residual never sharpens") {
  Rng rng(67);
  const auto clean = gen_clean_stream(10, 1000, 0.5, 0.0, rng);
  ShiftSpec spec;
  spec.visual_severity = 2;
  spec.textual_severity = 4;
  spec.birkhoff_noise = 0.3;
  for (const auto& s : apply_shift(clean, spec, rng)) {
    CHECK(majorizes(s.clean.pi_v, s.p_v));
    CHECK(majorizes(s.clean.pi_t, s.p_t));
  }
}

TEST_CASE("property: conflicting mode opposes the modality margins") {
  Rng rng(68);
  const auto clean = gen_clean_stream(10, 1000, 0.5, 0.0, rng);
  ShiftSpec spec;
  spec.conflicting = true;
  for (int vl : {0, 2, 5}) {
    spec.visual_severity = vl;
    spec.textual_severity = 5 - vl;
    Rng r(static_cast<std::uint64_t>(vl));
    for (const auto& s : apply_shift(clean, spec, r)) {
      const auto order = rank_order(s.clean.pi_f.values());
      const std::size_t c = order[0], j = order[1];
      CHECK(s.p_v[c] - s.p_v[j] < 0.0);
      CHECK(s.p_t[c] - s.p_t[j] > 0.0);
    }
  }
}

TEST_CASE("property: ladder entropy is nondecreasing in severity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng g(seed);
    const auto clean = gen_clean_stream(10, 400, 0.5, 0.0, g);
    double prev = -1.0;
    for (int level = 0; level <= kMaxSeverity; ++level) {
      ShiftSpec spec;
      spec.visual_severity = level;
      spec.textual_severity = level;
      Rng r(seed);
      double h = 0.0;
      for (const auto& s : apply_shift(clean, spec, r)) h += entropy(s.p_v) + entropy(s.p_t);
      CHECK(h >= prev - 1e-9);
      prev = h;
    }
  }
}

TEST_CASE("feasible residual is zero-sum and keeps mass nonnegative") {
  Rng rng(69);
  for (int i = 0; i < 300; ++i) {
    const Posterior base = test::random_posterior(test::pick(rng, 2, 10), rng);
    const auto r = feasible_residual(base.values(), 0.5, rng);
    double sum = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      sum += r[c];
      CHECK(base[c] + r[c] >= -1e-12);
    }
    CHECK(std::abs(sum) <= 1e-12);
  }
}

TEST_CASE("stream records round trip") {
  Rng rng(70);
  const auto clean = gen_clean_stream(6, 30, 0.4, 0.0, rng);
  ShiftSpec spec;
  spec.visual_severity = 2;
  spec.conflicting = true;
  spec.residual_scale = 0.05;
  const auto stream = apply_shift(clean, spec, rng);

  std::stringstream buf;
  write_stream(buf, stream, spec);
  const auto back = read_stream(buf);
  REQUIRE(back.size() == stream.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].index == i);
    CHECK(back[i].spec == spec);
    CHECK(back[i].sample.p_v == stream[i].p_v);
    CHECK(back[i].sample.p_t == stream[i].p_t);
    CHECK(back[i].sample.clean.pi_f == stream[i].clean.pi_f);
    CHECK(back[i].sample.clean.label == stream[i].clean.label);
    CHECK(back[i].sample.z_v.vec() == stream[i].z_v.vec());
  }
  CHECK(test::error_kind_of([] { parse_stream_record("{\"index\": 0}"); }) == ErrorKind::io);
  CHECK(test::error_kind_of([] { parse_stream_record("not json"); }) == ErrorKind::io);
}
