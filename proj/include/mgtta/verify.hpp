#pragma once

// Self-checks of the library against independent oracles. Each check is
// seeded and returns a single pass/fail verdict with a short detail string.

#include <cstdint>
#include <string>
#include <vector>

#include "mgtta/harness.hpp"

namespace mgtta {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  ConflictDirection direction = ConflictDirection::toward_reliable;
};

CheckResult check_majorization_fuzz(const VerifyOptions& opt, int cases = 1000);
CheckResult check_demixing_guarantee(const VerifyOptions& opt, int cases = 10000);
CheckResult check_flip_threshold(const VerifyOptions& opt, std::size_t samples = 500);
CheckResult check_gradients(const VerifyOptions& opt, int cases = 100);
CheckResult check_ds_fit(const VerifyOptions& opt);
CheckResult check_sinkhorn(const VerifyOptions& opt, int cases = 100);
CheckResult check_severity_calibration(const VerifyOptions& opt);
CheckResult check_conflict_ordering(const VerifyOptions& opt);
CheckResult check_conflict_direction(const VerifyOptions& opt, int cases = 2000);
CheckResult check_gate_monotonicity(const VerifyOptions& opt, int cases = 2000);
CheckResult check_run_determinism(const VerifyOptions& opt);

/// Source-only ladder over textual severity 0..5, 10 seeds of 2000 samples.
ExperimentConfig severity_scenario();

/// Conflicting modalities with a heavily shifted textual stream, 10 seeds of
/// 2000 samples, methods source_only, entropy_only, mg_mtta.
ExperimentConfig conflict_scenario(ConflictDirection direction = ConflictDirection::toward_reliable);

std::vector<CheckResult> verify_suite(const VerifyOptions& opt);

}  // namespace mgtta
