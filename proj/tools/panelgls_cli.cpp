#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <thread>

#include "panelgls/emit.hpp"
#include "panelgls/harness.hpp"
#include "panelgls/linalg.hpp"
#include "panelgls/simgen.hpp"

namespace pg = panelgls;

namespace {

struct CommonOpts {
  std::string configPath;
  int reps = -1;
  long long seed = -1;
  std::string out;
  int threads = 0;
  bool svg = true;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("config", o.configPath, "experiment configuration file")->required();
  sub->add_option("--reps", o.reps, "override replication count");
  sub->add_option("--seed", o.seed, "override base seed");
  sub->add_option("--out", o.out, "override output directory");
  sub->add_option("--threads", o.threads, "worker threads (default: hardware)");
  sub->add_flag("--svg,!--no-svg", o.svg, "emit SVG charts (default on)");
}

pg::ExperimentConfig load_config(const CommonOpts& o) {
  pg::ExperimentConfig cfg = pg::parse_config(o.configPath);
  if (o.reps > 0) cfg.reps = o.reps;
  if (o.seed >= 0) cfg.baseSeed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) cfg.outputDir = o.out;
  cfg.validate();
  return cfg;
}

int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void emit_and_report(const pg::McSummary& summary, const pg::ExperimentConfig& cfg, bool svg) {
  pg::EmitOptions opts;
  opts.svg = svg;
  for (const std::string& path : pg::emit_outputs(summary, cfg.outputDir, opts))
    std::cout << "wrote " << path << "\n";
}

pg::GeneratedDataset generate_point(const pg::ExperimentConfig& cfg, const pg::GridPoint& pt) {
  const std::uint64_t seed = pg::replication_seed(cfg.baseSeed, pt.index, 0);
  if (cfg.experiment == pg::ExperimentKind::Example1) {
    pg::Example1Config gc;
    gc.scenario = pt.scenario;
    gc.T = pt.T;
    gc.n = cfg.n;
    gc.seed = seed;
    return pg::gen_example1(gc);
  }
  if (cfg.experiment == pg::ExperimentKind::Example2) {
    pg::Example2Config gc;
    gc.scenario = pt.scenario;
    gc.T = pt.T;
    gc.n = cfg.n;
    gc.seed = seed;
    return pg::gen_example2(gc);
  }
  pg::TeacherSimConfig gc;
  gc.n = cfg.n;
  gc.S = pt.subjects;
  gc.alpha = pt.alpha;
  gc.seed = seed;
  return pg::gen_teacher_scores(gc);
}

int cmd_validate(const CommonOpts& o) {
  const pg::ExperimentConfig cfg = load_config(o);
  std::cout << "configuration ok:\n" << pg::serialize_config(cfg);
  if (cfg.experiment == pg::ExperimentKind::Diagnostics) return 0;

  for (const pg::GridPoint& pt : pg::grid_points(cfg)) {
    const pg::GeneratedDataset ds = generate_point(cfg, pt);
    const pg::RankReport plain = pg::validate_design(ds.design, false);
    const pg::RankReport withD = pg::validate_design(ds.design, true);
    std::cout << "grid " << pt.key(cfg.experiment);
    if (cfg.experiment != pg::ExperimentKind::Example3) std::cout << " T=" << pt.T;
    std::cout << ": Z rank " << plain.rank << "/" << plain.cols << ", [Z|D] rank " << withD.rank
              << "/" << withD.cols;
    if (!plain.fullRank)
      std::cout << "; Z dependent columns: " << pg::format_column_list(plain.dependentColumns);
    else if (!withD.fullRank)
      std::cout << "; columns absorbed by student effects: "
                << pg::format_column_list(withD.dependentColumns);
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panelgls: panel estimators and bias-compression experiments"};
  app.require_subcommand(1);

  CommonOpts runOpts, diagOpts, valOpts;
  CLI::App* run = app.add_subcommand("run", "run the configured Monte Carlo experiment");
  add_common(run, runOpts);
  CLI::App* diag = app.add_subcommand("diagnose", "theorem-condition and row-sum diagnostics");
  add_common(diag, diagOpts);
  CLI::App* val = app.add_subcommand("validate", "validate configuration and design ranks");
  add_common(val, valOpts);

  CLI11_PARSE(app, argc, argv);

  const auto progress = [](const std::string& msg) { std::cerr << "[panelgls] " << msg << "\n"; };
  try {
    if (run->parsed()) {
      const pg::ExperimentConfig cfg = load_config(runOpts);
      const pg::McSummary summary =
          pg::run_experiment(cfg, effective_threads(runOpts.threads), progress);
      emit_and_report(summary, cfg, runOpts.svg);
      return 0;
    }
    if (diag->parsed()) {
      const pg::ExperimentConfig cfg = load_config(diagOpts);
      const pg::McSummary summary = pg::run_diagnostics(cfg, progress);
      emit_and_report(summary, cfg, diagOpts.svg);
      return 0;
    }
    return cmd_validate(valOpts);
  } catch (const pg::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const pg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
