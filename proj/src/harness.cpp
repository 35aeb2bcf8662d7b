#include "mgtta/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include <json.hpp>

#include "mgtta/oracles.hpp"
#include "mgtta/theory.hpp"

namespace mgtta {

double majorization_ratio(std::span<const Posterior> adapted, std::span<const Posterior> shifted,
                          double tol) {
  require_same_dim(adapted.size(), shifted.size(), "majorization_ratio");
  require(!adapted.empty(), ErrorKind::empty_batch, "majorization_ratio needs samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < adapted.size(); ++i) {
    if (majorizes(adapted[i], shifted[i], tol)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(adapted.size());
}

double collapse_stat(std::span<const Posterior> batch) {
  require(!batch.empty(), ErrorKind::empty_batch, "collapse_stat needs a nonempty batch");
  const std::size_t k = batch.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& p : batch) {
    require_same_dim(p.size(), k, "collapse_stat");
    for (std::size_t c = 0; c < k; ++c) mean[c] += p[c];
  }
  for (double& x : mean) x /= static_cast<double>(batch.size());
  return std::clamp(1.0 - entropy(mean) / std::log(static_cast<double>(k)), 0.0, 1.0);
}

EpisodeMetrics run_episode(std::span<const StreamSample> stream, const AdaptConfig& cfg) {
  cfg.validate();
  require(!stream.empty(), ErrorKind::empty_batch, "episode needs samples");
  AdaptState state(stream.front().p_v.size(), cfg);
  reset_episode(state);

  EpisodeMetrics m;
  std::size_t correct = 0;
  std::size_t majorizing = 0;
  std::size_t batches = 0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<ModalityOutputs> batch;
  for (std::size_t start = 0; start < stream.size(); start += bs) {
    const std::size_t end = std::min(stream.size(), start + bs);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(stream[i].outputs());

    const AdaptResult r = adapt_batch(state, batch, cfg);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Posterior& q = r.adapted[i];
      if (top_one_margin(q).argmax == stream[start + i].clean.label) ++correct;
      if (majorizes(q, r.pre_fused[i])) ++majorizing;
      m.mean_entropy_pre += entropy(r.pre_fused[i]);
      m.mean_entropy_post += entropy(q);
      m.dist_to_perm_mean += dist_to_permutation(q);
    }
    m.collapse += collapse_stat(r.adapted);
    ++batches;
  }
  const double n = static_cast<double>(stream.size());
  m.n_samples = stream.size();
  m.accuracy = static_cast<double>(correct) / n;
  m.majorization_ratio = static_cast<double>(majorizing) / n;
  m.mean_entropy_pre /= n;
  m.mean_entropy_post /= n;
  m.dist_to_perm_mean /= n;
  m.collapse /= static_cast<double>(batches);
  return m;
}

std::vector<CleanSample> clean_stream_for(const StreamParams& params, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0u};
  Rng rng(seq);
  return gen_clean_stream(params, rng);
}

std::vector<StreamSample> shifted_stream_for(std::span<const CleanSample> clean,
                                             const ShiftSpec& spec, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 1u};
  Rng rng(seq);
  return apply_shift(clean, spec, rng);
}

std::vector<ConditionReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  AdaptConfig source_cfg;
  source_cfg.mode = AdaptMode::source_only;

  // (condition, method) -> per-seed sums
  std::map<std::pair<std::string, std::string>, ConditionReport> acc;
  const double seeds = static_cast<double>(cfg.seeds.size());

  for (const std::uint64_t seed : cfg.seeds) {
    const auto clean = clean_stream_for(cfg.stream, seed);
    for (const Condition& cond : cfg.conditions) {
      const auto stream = shifted_stream_for(clean, cond.spec, seed);
      const double source_acc = run_episode(stream, source_cfg).accuracy;

      for (const MethodSpec& method : cfg.methods) {
        const EpisodeMetrics m = run_episode(stream, method.cfg);
        ConditionReport& r = acc[{cond.id, method.name}];
        r.method = method.name;
        r.condition = cond.id;
        r.top1_accuracy += m.accuracy / seeds;
        r.delta_vs_source += (m.accuracy - source_acc) / seeds;
        r.mean_entropy_pre += m.mean_entropy_pre / seeds;
        r.mean_entropy_post += m.mean_entropy_post / seeds;
        r.majorization_ratio += m.majorization_ratio / seeds;
        r.dist_to_perm_mean += m.dist_to_perm_mean / seeds;
        r.collapse += m.collapse / seeds;
        r.n_samples += m.n_samples;
      }
    }
  }

  std::vector<ConditionReport> out;
  out.reserve(acc.size());
  for (auto& [key, r] : acc) out.push_back(std::move(r));
  return out;
}

void write_reports(std::ostream& out, std::span<const ConditionReport> reports,
                   ReportFormat format, const std::string& hash) {
  if (format == ReportFormat::records) {
    out << nlohmann::json{{"type", "header"}, {"config_hash", hash}}.dump() << '\n';
    for (const auto& r : reports) {
      const nlohmann::json j = {{"type", "report"},
                                {"config_hash", hash},
                                {"method", r.method},
                                {"condition", r.condition},
                                {"top1_accuracy", r.top1_accuracy},
                                {"delta_vs_source", r.delta_vs_source},
                                {"mean_entropy_pre", r.mean_entropy_pre},
                                {"mean_entropy_post", r.mean_entropy_post},
                                {"majorization_ratio", r.majorization_ratio},
                                {"dist_to_perm_mean", r.dist_to_perm_mean},
                                {"collapse", r.collapse},
                                {"n_samples", r.n_samples}};
      out << j.dump() << '\n';
    }
    return;
  }

  out << "# config_hash=" << hash << '\n'
      << "condition,method,top1_accuracy,delta_vs_source,mean_entropy_pre,mean_entropy_post,"
         "majorization_ratio,dist_to_perm_mean,collapse,n_samples\n";
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::fixed << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.condition << ',' << r.method << ',' << r.top1_accuracy << ',' << r.delta_vs_source << ','
        << r.mean_entropy_pre << ',' << r.mean_entropy_post << ',' << r.majorization_ratio << ','
        << r.dist_to_perm_mean << ',' << r.collapse << ',' << r.n_samples << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

std::vector<SweepRow> alpha_threshold_sweep(const ExperimentConfig& cfg, const ShiftSpec& spec,
                                            std::size_t count, int points) {
  cfg.validate();
  require(spec.conflicting, ErrorKind::invalid_argument, "threshold sweep needs a conflicting shift");
  // a residual may undo the conflicting arrangement the threshold relies on
  require(spec.residual_scale == 0.0, ErrorKind::invalid_argument,
          "threshold sweep needs a residual-free shift");
  StreamParams params = cfg.stream;
  params.n = count;
  const auto clean = clean_stream_for(params, cfg.seeds.front());
  const auto stream = shifted_stream_for(clean, spec, cfg.seeds.front());

  std::vector<SweepRow> rows;
  rows.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& s = stream[i];
    const auto order = rank_order(s.clean.pi_f.values());
    const DominanceThreshold t = failure_threshold(s.p_v, s.p_t, order[0], order[1]);
    const auto sweep = oracle::sweep_fused_margin(s.p_v, s.p_t, order[0], order[1], points);
    rows.push_back({i, order[0], order[1], t.threshold, sweep.crossing, sweep.sign_changes});
  }
  return rows;
}

std::vector<SeverityRow> severity_sweep(const ExperimentConfig& cfg, const ShiftSpec& base,
                                        bool visual, bool textual) {
  ExperimentConfig sweep = cfg;
  sweep.conditions.clear();
  for (int level = 0; level <= kMaxSeverity; ++level) {
    ShiftSpec s = base;
    if (visual) s.visual_severity = level;
    if (textual) s.textual_severity = level;
    sweep.conditions.push_back({"L" + std::to_string(level), s});
  }
  std::vector<SeverityRow> rows;
  for (const auto& r : run_experiment(sweep)) {
    rows.push_back({std::stoi(r.condition.substr(1)), r.method, r.top1_accuracy, r.mean_entropy_pre});
  }
  return rows;
}

}  // namespace mgtta
