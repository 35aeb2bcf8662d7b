// mgtta: run experiments, self-checks, sweeps and stream generation.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgtta/harness.hpp"
#include "mgtta/records.hpp"
#include "mgtta/verify.hpp"

namespace {

using namespace mgtta;

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config) {
  auto* c = cmd->add_option("--config", o.config, "Experiment config file")->check(CLI::ExistingFile);
  if (needs_config) c->required();
  cmd->add_option("--seed", o.seed, "Use this single seed instead of the configured list");
  cmd->add_option("--out", o.out, "Output path (default: config output path, then stdout)");
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "records"}));
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else {
    cfg.seeds = {1};
    cfg.conditions = {{"default", {}}};
    cfg.methods = default_methods();
  }
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.out.empty()) cfg.out_path = o.out;
  if (!o.format.empty()) cfg.format = o.format == "records" ? ReportFormat::records : ReportFormat::table;
  cfg.validate();
  return cfg;
}

// Writes to the file when a path is set, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      require(static_cast<bool>(*file_), ErrorKind::io, "cannot open output '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    require(static_cast<bool>(stream()), ErrorKind::io, "write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

const Condition& pick_condition(const ExperimentConfig& cfg, const std::string& id) {
  if (id.empty()) return cfg.conditions.front();
  for (const auto& c : cfg.conditions) {
    if (c.id == id) return c;
  }
  throw Error(ErrorKind::config_invalid, "no condition '" + id + "' in config");
}

int cmd_run(const CommonOpts& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const auto reports = run_experiment(cfg);
  Sink sink(cfg.out_path);
  write_reports(sink.stream(), reports, cfg.format, config_hash(cfg));
  sink.finish();
  return 0;
}

int cmd_verify(const CommonOpts& o, bool inverted) {
  VerifyOptions opt;
  opt.seed = o.seed.value_or(1);
  if (inverted) opt.direction = ConflictDirection::inverted;
  const auto results = verify_suite(opt);

  Sink sink(o.out);
  std::ostream& out = sink.stream();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    if (o.format == "records") {
      out << nlohmann::json{{"check", r.name}, {"passed", r.passed}, {"detail", r.detail},
                            {"seed", opt.seed}}
                 .dump()
          << '\n';
    } else {
      out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(22) << r.name << r.detail
          << "  [seed " << opt.seed << ", " << std::fixed << std::setprecision(2) << r.seconds << "s]\n";
    }
  }
  if (o.format != "records") out << (all ? "all checks passed\n" : "verification failed\n");
  sink.finish();
  return all ? 0 : 1;
}

int cmd_sweep(const CommonOpts& o, const std::string& kind, const std::string& condition,
              std::size_t count, const std::string& modality) {
  const ExperimentConfig cfg = resolve_config(o);
  const ShiftSpec& base = pick_condition(cfg, condition).spec;
  const bool records = cfg.format == ReportFormat::records;
  Sink sink(cfg.out_path);
  std::ostream& out = sink.stream();
  out << std::setprecision(17);

  if (kind == "threshold") {
    ShiftSpec spec = base;
    spec.conflicting = true;
    spec.residual_scale = 0.0;
    const auto rows = alpha_threshold_sweep(cfg, spec, count);
    if (!records) out << "sample,class_c,class_j,threshold,located,sign_changes\n";
    for (const auto& r : rows) {
      if (records) {
        out << nlohmann::json{{"sample", r.sample},       {"class_c", r.class_c},
                              {"class_j", r.class_j},     {"threshold", r.threshold},
                              {"located", r.located},     {"sign_changes", r.sign_changes}}
                   .dump()
            << '\n';
      } else {
        out << r.sample << ',' << r.class_c << ',' << r.class_j << ',' << r.threshold << ','
            << r.located << ',' << r.sign_changes << '\n';
      }
    }
  } else {
    const bool visual = modality != "textual";
    const bool textual = modality != "visual";
    const auto rows = severity_sweep(cfg, base, visual, textual);
    if (!records) out << "level,method,accuracy,mean_entropy_pre\n";
    for (const auto& r : rows) {
      if (records) {
        out << nlohmann::json{{"level", r.level}, {"method", r.method}, {"accuracy", r.accuracy},
                              {"mean_entropy_pre", r.mean_entropy_pre}}
                   .dump()
            << '\n';
      } else {
        out << r.level << ',' << r.method << ',' << r.accuracy << ',' << r.mean_entropy_pre << '\n';
      }
    }
  }
  sink.finish();
  return 0;
}

int cmd_gen(const CommonOpts& o, const std::string& condition) {
  const ExperimentConfig cfg = resolve_config(o);
  const Condition& cond = pick_condition(cfg, condition);
  const std::uint64_t seed = cfg.seeds.front();
  const auto clean = clean_stream_for(cfg.stream, seed);
  const auto stream = shifted_stream_for(clean, cond.spec, seed);
  Sink sink(cfg.out_path);
  if (cfg.format == ReportFormat::records) {
    write_stream(sink.stream(), stream, cond.spec);
  } else {
    std::ostream& out = sink.stream();
    out << "index,label,gamma,argmax_v,argmax_t,entropy_v,entropy_t\n" << std::setprecision(17);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const auto& s = stream[i];
      out << i << ',' << s.clean.label << ',' << s.clean.gamma << ',' << top_one_margin(s.p_v).argmax
          << ',' << top_one_margin(s.p_t).argmax << ',' << entropy(s.p_v) << ',' << entropy(s.p_t)
          << '\n';
    }
  }
  sink.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Majorization-guided multimodal test-time adaptation on synthetic streams"};
  app.require_subcommand(1);

  CommonOpts run_o, verify_o, sweep_o, gen_o;
  auto* run = app.add_subcommand("run", "Run an experiment config and report per-condition metrics");
  add_common(run, run_o, true);

  auto* verify = app.add_subcommand("verify", "Run the property and oracle checks");
  add_common(verify, verify_o, false);
  bool inverted = false;
  verify->add_flag("--invert-conflict", inverted, "Flip the conflict direction (mutation check)");

  auto* sweep = app.add_subcommand("sweep", "Flip-threshold sweep (conflicting, residual dropped) or severity sweep");
  add_common(sweep, sweep_o, false);
  std::string kind = "threshold";
  std::string sweep_cond;
  std::size_t count = 500;
  std::string modality = "textual";
  sweep->add_option("--kind", kind, "Sweep kind")->check(CLI::IsMember({"threshold", "severity"}));
  sweep->add_option("--condition", sweep_cond, "Base condition id (default: first)");
  sweep->add_option("--count", count, "Samples for the threshold sweep")->check(CLI::PositiveNumber);
  sweep->add_option("--modality", modality, "Modality the severity ladder applies to")
      ->check(CLI::IsMember({"visual", "textual", "both"}));

  auto* gen = app.add_subcommand("gen", "Emit a shifted stream for one condition and the first seed");
  add_common(gen, gen_o, false);
  std::string gen_cond;
  gen->add_option("--condition", gen_cond, "Condition id (default: first)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_o);
    if (*verify) return cmd_verify(verify_o, inverted);
    if (*sweep) return cmd_sweep(sweep_o, kind, sweep_cond, count, modality);
    if (*gen) return cmd_gen(gen_o, gen_cond);
  } catch (const mgtta::Error& e) {
    std::cerr << "error (" << mgtta::to_string(e.kind()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
