#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "panelgls/types.hpp"

namespace panelgls {

enum class ExperimentKind { Example1, Example2, Example3, Diagnostics };
std::string to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& name);

// Parsed key-value configuration. Keys: experiment, scenarios, T, subjects,
// alpha, reps, baseSeed, estimators, outputDir, n. Defaults are filled per
// experiment; unknown keys are rejected.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Example1;
  std::vector<int> scenarios;       // example1 (1..4), example2 (1..3)
  std::vector<int> Tgrid;           // example1/example2/diagnostics
  std::vector<int> subjects;        // example3 (1..4)
  std::vector<double> alphas;       // example3, in [0,1]
  int reps = 100;
  std::uint64_t baseSeed = 12345;
  std::vector<std::string> estimators;  // canonical tags, e.g. "OLS", "GLS-known"
  std::string outputDir = "out";
  int n = 1000;

  bool operator==(const ExperimentConfig&) const = default;
  void validate() const;  // throws ValidationError listing every offense
};

ExperimentConfig default_config(ExperimentKind kind);
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

// One design point of the experiment grid. index is the position in
// grid_points() order and feeds the replication seed.
struct GridPoint {
  int index = 0;
  int scenario = 0;   // example1/example2
  int T = 0;          // example1/example2/diagnostics
  int subjects = 1;   // example3
  double alpha = 0.0; // example3
  std::string key(ExperimentKind kind) const;
};
std::vector<GridPoint> grid_points(const ExperimentConfig& cfg);

// Documented rep-seed mixing: mix_seed(mix_seed(baseSeed, gridIndex), rep).
std::uint64_t replication_seed(std::uint64_t baseSeed, int gridIndex, int repIndex);

// Mean over the supplied coefficients of |estimate - truth| / standardizer.
double metric_standardized_abs_bias(const Eigen::VectorXd& estimates,
                                    const Eigen::VectorXd& trueTheta, double standardizer);

// Sample variance of estimated teacher-by-subject effects within one grade,
// averaged across subjects, as a fraction of that grade's marginal variance.
// estimates follow the persistence-design column order.
double metric_teacher_variance_fraction(const Eigen::VectorXd& estimates, int grade,
                                        int nClasses, int S, double marginalVar);

// Per-replication metrics: one value per estimator for examples 1-2, one per
// grade for example 3. Estimator order follows cfg.estimators.
struct RepMetrics {
  std::vector<std::vector<double>> byEstimator;
};
RepMetrics run_replication(const ExperimentConfig& cfg, const GridPoint& pt, int rep);

struct McCell {
  std::string scenario;  // grid-point key (or diagnostic family)
  int tOrGrade = 0;
  std::string estimator;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  int reps = 0;
};
struct McSummary {
  std::string experiment;
  std::vector<McCell> cells;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs every grid point for cfg.reps replications (parallel over reps,
// deterministic aggregation order) and aggregates mean and Monte Carlo
// standard error per estimator and metric.
McSummary run_experiment(const ExperimentConfig& cfg, int threads = 1,
                         const ProgressFn& progress = {});

// Theorem-condition and row-sum diagnostics for the configured experiment;
// for the `diagnostics` experiment, profiles the standard / ramp /
// linear-growth families plus the Dirichlet and lemma spot checks.
McSummary run_diagnostics(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace panelgls
