#pragma once

// Episodic experiment runner over shift conditions and adaptation methods,
// plus the per-condition diagnostics it reports.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mgtta/gate_adapt.hpp"
#include "mgtta/synthgen.hpp"

namespace mgtta {

struct Condition {
  std::string id;
  ShiftSpec spec;
};

struct MethodSpec {
  std::string name;
  AdaptConfig cfg;
};

enum class ReportFormat { table, records };

struct ExperimentConfig {
  StreamParams stream;
  std::vector<std::uint64_t> seeds;
  std::vector<Condition> conditions;
  std::vector<MethodSpec> methods;
  std::string out_path;  // empty: stdout
  ReportFormat format = ReportFormat::table;

  void validate() const;
};

/// The four matched methods with the built-in defaults.
std::vector<MethodSpec> default_methods(const AdaptConfig& base = {});

/// Reads the key-value config format (INI sections). Missing keys take the
/// built-in defaults; unknown sections or keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Config in normalized form: every field spelled out, conditions and methods
/// sorted by name, output section omitted. Parsing it back reproduces every
/// other field of c.
std::string canonical_config(const ExperimentConfig& cfg);

/// FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct ConditionReport {
  std::string method;
  std::string condition;
  double top1_accuracy = 0.0;
  double delta_vs_source = 0.0;
  double mean_entropy_pre = 0.0;
  double mean_entropy_post = 0.0;
  double majorization_ratio = 0.0;
  double dist_to_perm_mean = 0.0;
  double collapse = 0.0;
  std::size_t n_samples = 0;
};

/// Fraction of pairs where adapted[i] majorizes shifted[i].
double majorization_ratio(std::span<const Posterior> adapted, std::span<const Posterior> shifted,
                          double tol = kMajorizeTol);

/// 1 - H(mean posterior) / ln K.
double collapse_stat(std::span<const Posterior> batch);

/// Metrics of one method on one shifted stream, fresh episode.
struct EpisodeMetrics {
  double accuracy = 0.0;
  double mean_entropy_pre = 0.0;
  double mean_entropy_post = 0.0;
  double majorization_ratio = 0.0;
  double dist_to_perm_mean = 0.0;
  double collapse = 0.0;
  std::size_t n_samples = 0;
};

EpisodeMetrics run_episode(std::span<const StreamSample> stream, const AdaptConfig& cfg);

/// Clean stream for a seed; identical for every condition.
std::vector<CleanSample> clean_stream_for(const StreamParams& params, std::uint64_t seed);
/// Shifted stream for (seed, condition). The shift rng depends on the seed
/// only, so conditions share random draws.
std::vector<StreamSample> shifted_stream_for(std::span<const CleanSample> clean,
                                             const ShiftSpec& spec, std::uint64_t seed);

/// One report per (condition, method), averaged over seeds, sorted by
/// (condition id, method name).
std::vector<ConditionReport> run_experiment(const ExperimentConfig& cfg);

void write_reports(std::ostream& out, std::span<const ConditionReport> reports,
                   ReportFormat format, const std::string& hash);

struct SweepRow {
  std::size_t sample = 0;
  std::size_t class_c = 0;
  std::size_t class_j = 0;
  double threshold = 0.0;
  double located = 0.0;
  int sign_changes = 0;
};

/// Flip-threshold sweep over conflicting-mode samples of the configured
/// stream (first seed), `count` samples. The shift must be conflicting and
/// residual-free.
std::vector<SweepRow> alpha_threshold_sweep(const ExperimentConfig& cfg, const ShiftSpec& spec,
                                            std::size_t count, int points = 1000);

struct SeverityRow {
  int level = 0;
  std::string method;
  double accuracy = 0.0;
  double mean_entropy_pre = 0.0;
};

/// Accuracy per severity level (0..5) for every configured method, applying
/// the level to the visual and/or textual modality of `base`.
std::vector<SeverityRow> severity_sweep(const ExperimentConfig& cfg, const ShiftSpec& base,
                                        bool visual, bool textual);

}  // namespace mgtta
