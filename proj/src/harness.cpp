#include "panelgls/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "panelgls/diagnostics.hpp"
#include "panelgls/estimators.hpp"
#include "panelgls/linalg.hpp"
#include "panelgls/rng.hpp"
#include "panelgls/simgen.hpp"

namespace panelgls {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Example1: return "example1";
    case ExperimentKind::Example2: return "example2";
    case ExperimentKind::Example3: return "example3";
    case ExperimentKind::Diagnostics: return "diagnostics";
  }
  return "?";
}

ExperimentKind experiment_from_string(const std::string& name) {
  if (name == "example1") return ExperimentKind::Example1;
  if (name == "example2") return ExperimentKind::Example2;
  if (name == "example3") return ExperimentKind::Example3;
  if (name == "diagnostics") return ExperimentKind::Diagnostics;
  throw ValidationError("unknown experiment '" + name +
                        "' (expected example1, example2, example3 or diagnostics)");
}

namespace {

const std::vector<std::string> kKnownKeys = {"experiment", "scenarios", "T",      "subjects", "alpha",
                                             "reps",       "baseSeed",  "estimators", "outputDir", "n"};

std::string canonical_estimator(const std::string& raw) {
  std::string s;
  for (char c : raw) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "ols") return "OLS";
  if (s == "fe" || s == "fixed_effects") return "FE";
  if (s == "re_quasi" || s == "re-quasi") return "RE-quasi";
  if (s == "gls_known" || s == "gls-known") return "GLS-known";
  if (s == "gls_feasible" || s == "gls-feasible") return "GLS-feasible";
  if (s == "class_means" || s == "class-means") return "class-means";
  throw ValidationError("unknown estimator '" + raw + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const std::string& item : split_list(s)) {
    // a..b range shorthand
    const std::size_t dots = item.find("..");
    try {
      if (dots != std::string::npos) {
        const int a = std::stoi(item.substr(0, dots));
        const int b = std::stoi(item.substr(dots + 2));
        for (int v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoi(item));
      }
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "': cannot parse integer '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "': cannot parse number '" + item + "'");
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::Example1:
      cfg.scenarios = {1, 2, 3, 4};
      cfg.Tgrid = {3, 5, 10, 15, 20};
      cfg.estimators = {"OLS", "GLS-known"};
      break;
    case ExperimentKind::Example2:
      cfg.scenarios = {1, 2, 3};
      for (int t = 2; t <= 20; ++t) cfg.Tgrid.push_back(t);
      cfg.estimators = {"OLS", "GLS-known", "GLS-feasible"};
      break;
    case ExperimentKind::Example3:
      cfg.subjects = {1, 2, 3, 4};
      cfg.alphas = {0.0, 0.3, 0.7, 1.0};
      cfg.estimators = {"class-means", "OLS", "GLS-known"};
      break;
    case ExperimentKind::Diagnostics:
      cfg.Tgrid = {3, 5, 10, 15, 20, 50, 100, 200};
      cfg.reps = 1;
      break;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> issues;
  if (reps < 1) issues.push_back("reps must be >= 1");
  if (n < 1) issues.push_back("n must be >= 1");
  const bool ex12 = experiment == ExperimentKind::Example1 || experiment == ExperimentKind::Example2;
  if (ex12) {
    if (scenarios.empty() || Tgrid.empty()) issues.push_back("grid (scenarios x T) must be non-empty");
    const int maxScenario = experiment == ExperimentKind::Example1 ? 4 : 3;
    for (int s : scenarios)
      if (s < 1 || s > maxScenario)
        issues.push_back("scenario " + std::to_string(s) + " outside 1.." + std::to_string(maxScenario));
    for (int t : Tgrid)
      if (t < 2) issues.push_back("T must be >= 2");
  } else if (experiment == ExperimentKind::Example3) {
    if (subjects.empty() || alphas.empty()) issues.push_back("grid (subjects x alpha) must be non-empty");
    for (int s : subjects)
      if (s < 1 || s > 4) issues.push_back("subjects must lie in 1..4");
    for (double a : alphas)
      if (a < 0.0 || a > 1.0) issues.push_back("alpha must lie in [0,1]");
    if (n % 25 != 0) issues.push_back("n must be divisible by the class size 25");
  } else {
    if (Tgrid.empty()) issues.push_back("T grid must be non-empty");
  }
  for (const std::string& e : estimators) {
    if (e == "RE-quasi") {
      issues.push_back("estimator RE-quasi requires known scalar variance components and applies to no experiment");
      continue;
    }
    if (e == "class-means" && experiment != ExperimentKind::Example3)
      issues.push_back("estimator class-means applies only to example3");
  }
  if (!issues.empty()) {
    std::string msg = "invalid configuration:";
    for (const std::string& i : issues) msg += "\n  - " + i;
    throw ValidationError(msg);
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> unknown;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineNo) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      unknown.push_back(key);
      continue;
    }
    if (kv.count(key)) throw ValidationError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const std::string& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  if (!kv.count("experiment")) throw ValidationError("config: missing required key 'experiment'");

  ExperimentConfig cfg = default_config(experiment_from_string(kv["experiment"]));
  if (kv.count("scenarios")) cfg.scenarios = parse_int_list(kv["scenarios"], "scenarios");
  if (kv.count("T")) cfg.Tgrid = parse_int_list(kv["T"], "T");
  if (kv.count("subjects")) cfg.subjects = parse_int_list(kv["subjects"], "subjects");
  if (kv.count("alpha")) cfg.alphas = parse_double_list(kv["alpha"], "alpha");
  if (kv.count("reps")) {
    const auto v = parse_int_list(kv["reps"], "reps");
    if (v.size() != 1) throw ValidationError("key 'reps': expected a single integer");
    cfg.reps = v[0];
  }
  if (kv.count("n")) {
    const auto v = parse_int_list(kv["n"], "n");
    if (v.size() != 1) throw ValidationError("key 'n': expected a single integer");
    cfg.n = v[0];
  }
  if (kv.count("baseSeed")) {
    try {
      cfg.baseSeed = std::stoull(trim(kv["baseSeed"]));
    } catch (const std::exception&) {
      throw ValidationError("key 'baseSeed': cannot parse unsigned integer");
    }
  }
  if (kv.count("estimators")) {
    cfg.estimators.clear();
    for (const std::string& e : split_list(kv["estimators"]))
      cfg.estimators.push_back(canonical_estimator(e));
  }
  if (kv.count("outputDir")) cfg.outputDir = kv["outputDir"];
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config file not found: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "experiment = " << to_string(cfg.experiment) << "\n";
  auto ints = [&](const char* key, const std::vector<int>& v) {
    if (v.empty()) return;
    os << key << " = ";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << "\n";
  };
  ints("scenarios", cfg.scenarios);
  ints("T", cfg.Tgrid);
  ints("subjects", cfg.subjects);
  if (!cfg.alphas.empty()) {
    os << "alpha = ";
    for (std::size_t i = 0; i < cfg.alphas.size(); ++i) os << (i ? "," : "") << fmt(cfg.alphas[i]);
    os << "\n";
  }
  os << "reps = " << cfg.reps << "\n";
  os << "baseSeed = " << cfg.baseSeed << "\n";
  if (!cfg.estimators.empty()) {
    os << "estimators = ";
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) os << (i ? "," : "") << cfg.estimators[i];
    os << "\n";
  }
  os << "outputDir = " << cfg.outputDir << "\n";
  os << "n = " << cfg.n << "\n";
  return os.str();
}

std::string GridPoint::key(ExperimentKind kind) const {
  if (kind == ExperimentKind::Example3) {
    std::ostringstream os;
    os << "S" << subjects << "/a" << alpha;
    return os.str();
  }
  return std::to_string(scenario);
}

std::vector<GridPoint> grid_points(const ExperimentConfig& cfg) {
  std::vector<GridPoint> pts;
  int idx = 0;
  if (cfg.experiment == ExperimentKind::Example3) {
    for (int s : cfg.subjects)
      for (double a : cfg.alphas) {
        GridPoint p;
        p.index = idx++;
        p.subjects = s;
        p.alpha = a;
        pts.push_back(p);
      }
  } else {
    const std::vector<int> scenarios =
        cfg.experiment == ExperimentKind::Diagnostics ? std::vector<int>{0} : cfg.scenarios;
    for (int s : scenarios)
      for (int t : cfg.Tgrid) {
        GridPoint p;
        p.index = idx++;
        p.scenario = s;
        p.T = t;
        pts.push_back(p);
      }
  }
  return pts;
}

std::uint64_t replication_seed(std::uint64_t baseSeed, int gridIndex, int repIndex) {
  return mix_seed(mix_seed(baseSeed, static_cast<std::uint64_t>(gridIndex)),
                  static_cast<std::uint64_t>(repIndex));
}

double metric_standardized_abs_bias(const Eigen::VectorXd& estimates,
                                    const Eigen::VectorXd& trueTheta, double standardizer) {
  if (estimates.size() != trueTheta.size())
    throw ValidationError("metric_standardized_abs_bias: dimension mismatch");
  if (estimates.size() == 0) throw ValidationError("metric_standardized_abs_bias: empty estimate");
  if (standardizer <= 0.0) throw ValidationError("metric_standardized_abs_bias: standardizer must be > 0");
  return (estimates - trueTheta).cwiseAbs().mean() / standardizer;
}

double metric_teacher_variance_fraction(const Eigen::VectorXd& estimates, int grade,
                                        int nClasses, int S, double marginalVar) {
  if (nClasses < 2) throw ValidationError("metric_teacher_variance_fraction: need at least 2 teachers");
  if (marginalVar <= 0.0) throw ValidationError("metric_teacher_variance_fraction: marginal variance must be > 0");
  if (estimates.size() < static_cast<Eigen::Index>(grade + 1) * nClasses * S)
    throw ValidationError("metric_teacher_variance_fraction: estimate vector too short");
  double avgVar = 0.0;
  for (int s = 0; s < S; ++s) {
    double mean = 0.0, m2 = 0.0;
    for (int c = 0; c < nClasses; ++c) {
      const double v = estimates((static_cast<Eigen::Index>(grade) * nClasses + c) * S + s);
      mean += v;
    }
    mean /= nClasses;
    for (int c = 0; c < nClasses; ++c) {
      const double v = estimates((static_cast<Eigen::Index>(grade) * nClasses + c) * S + s);
      m2 += (v - mean) * (v - mean);
    }
    avgVar += m2 / (nClasses - 1);
  }
  return avgVar / S / marginalVar;
}

namespace {

double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
}

std::vector<Eigen::Index> treatment_indices(ExperimentKind kind, int scenario, int T) {
  std::vector<Eigen::Index> idx;
  if (kind == ExperimentKind::Example1) {
    if (scenario <= 2) {
      idx.push_back(1);
    } else {
      for (int t = 0; t < T; ++t) idx.push_back(T + t);
    }
  } else {
    idx.push_back(T);  // example2: final-period treatment coefficient
  }
  return idx;
}

double bias_metric_for(const Eigen::VectorXd& theta, const std::vector<Eigen::Index>& idx,
                       double sd) {
  Eigen::VectorXd sub(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) sub(static_cast<Eigen::Index>(j)) = theta(idx[j]);
  return metric_standardized_abs_bias(sub, Eigen::VectorXd::Zero(sub.size()), sd);
}

}  // namespace

RepMetrics run_replication(const ExperimentConfig& cfg, const GridPoint& pt, int rep) {
  const std::uint64_t seed = replication_seed(cfg.baseSeed, pt.index, rep);
  RepMetrics out;
  out.byEstimator.resize(cfg.estimators.size());

  if (cfg.experiment == ExperimentKind::Example1 || cfg.experiment == ExperimentKind::Example2) {
    GeneratedDataset ds;
    if (cfg.experiment == ExperimentKind::Example1) {
      Example1Config gc;
      gc.scenario = pt.scenario;
      gc.T = pt.T;
      gc.n = cfg.n;
      gc.seed = seed;
      ds = gen_example1(gc);
    } else {
      Example2Config gc;
      gc.scenario = pt.scenario;
      gc.T = pt.T;
      gc.n = cfg.n;
      gc.seed = seed;
      ds = gen_example2(gc);
    }

    double sd;
    if (cfg.experiment == ExperimentKind::Example1) {
      sd = sample_sd(ds.y);
    } else {
      Eigen::VectorXd last(ds.design.n);
      for (int i = 0; i < ds.design.n; ++i)
        last(i) = ds.y(static_cast<Eigen::Index>(i) * pt.T + pt.T - 1);
      sd = sample_sd(last);
    }
    const std::vector<Eigen::Index> idx = treatment_indices(cfg.experiment, pt.scenario, pt.T);

    BlockCovariance cov;
    bool covBuilt = false;
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      const std::string& est = cfg.estimators[e];
      Eigen::VectorXd theta;
      if (est == "OLS") {
        theta = ols(ds.design, ds.y).theta;
      } else if (est == "FE") {
        theta = fixed_effects(ds.design, ds.y).theta;
      } else if (est == "GLS-known") {
        if (!covBuilt) {
          cov = assemble_block_covariance(ds.truth);
          covBuilt = true;
        }
        theta = gls_known_R(ds.design, ds.y, cov).theta;
      } else if (est == "GLS-feasible") {
        theta = feasible_gls(ds.design, ds.y).theta;
      } else {
        throw ValidationError("estimator " + est + " not applicable to " + to_string(cfg.experiment));
      }
      out.byEstimator[e] = {bias_metric_for(theta, idx, sd)};
    }
    return out;
  }

  if (cfg.experiment == ExperimentKind::Example3) {
    TeacherSimConfig gc;
    gc.n = cfg.n;
    gc.S = pt.subjects;
    gc.alpha = pt.alpha;
    gc.seed = seed;
    GeneratedDataset ds = gen_teacher_scores(gc);
    const int G = gc.G;
    const int nClasses = gc.classesPerGrade();

    // Empirical per-grade marginal variance, pooled across subjects.
    std::vector<double> gradeVar(G, 0.0);
    {
      std::vector<double> mean(G, 0.0);
      std::vector<int> cnt(G, 0);
      for (Eigen::Index r = 0; r < ds.y.size(); ++r) {
        mean[ds.gradeOf[r]] += ds.y(r);
        ++cnt[ds.gradeOf[r]];
      }
      for (int g = 0; g < G; ++g) mean[g] /= cnt[g];
      for (Eigen::Index r = 0; r < ds.y.size(); ++r) {
        const int g = ds.gradeOf[r];
        gradeVar[g] += (ds.y(r) - mean[g]) * (ds.y(r) - mean[g]);
      }
      for (int g = 0; g < G; ++g) gradeVar[g] /= (cnt[g] - 1);
    }

    BlockCovariance cov;
    bool covBuilt = false;
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      const std::string& est = cfg.estimators[e];
      Eigen::VectorXd effects;
      if (est == "class-means") {
        effects = class_means(ds.y, ds.design.studentOf, ds.gradeOf, ds.subjectOf, ds.classOf, gc.S);
      } else if (est == "OLS") {
        effects = ols(ds.design, ds.y).theta;
      } else if (est == "FE") {
        effects = fixed_effects(ds.design, ds.y).theta;
      } else if (est == "GLS-known") {
        if (!covBuilt) {
          cov = assemble_block_covariance(ds.truth);
          covBuilt = true;
        }
        effects = gls_known_R(ds.design, ds.y, cov).theta;
      } else if (est == "GLS-feasible") {
        effects = feasible_gls(ds.design, ds.y).theta;
      } else {
        throw ValidationError("estimator " + est + " not applicable to example3");
      }
      std::vector<double> fractions(G);
      for (int g = 0; g < G; ++g)
        fractions[g] = metric_teacher_variance_fraction(effects, g, nClasses, gc.S, gradeVar[g]);
      out.byEstimator[e] = std::move(fractions);
    }
    return out;
  }

  throw ValidationError("run_replication: diagnostics experiment has no replications");
}

McSummary run_experiment(const ExperimentConfig& cfg, int threads, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.experiment == ExperimentKind::Diagnostics) return run_diagnostics(cfg, progress);

  McSummary summary;
  summary.experiment = to_string(cfg.experiment);
  const std::vector<GridPoint> pts = grid_points(cfg);
  threads = std::max(1, threads);

  for (const GridPoint& pt : pts) {
    if (progress) progress("grid point " + pt.key(cfg.experiment) +
                           (cfg.experiment == ExperimentKind::Example3
                                ? ""
                                : " T=" + std::to_string(pt.T)));
    std::vector<RepMetrics> results(cfg.reps);
    std::atomic<int> next{0};
    std::exception_ptr firstError;
    std::mutex errMutex;
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= cfg.reps) break;
        try {
          results[r] = run_replication(cfg, pt, r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(errMutex);
          if (!firstError) firstError = std::current_exception();
          next.store(cfg.reps);
          break;
        }
      }
    };
    if (threads == 1 || cfg.reps == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < std::min(threads, cfg.reps); ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (firstError) std::rethrow_exception(firstError);

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      const std::size_t slots = results[0].byEstimator[e].size();
      for (std::size_t slot = 0; slot < slots; ++slot) {
        Eigen::VectorXd vals(cfg.reps);
        for (int r = 0; r < cfg.reps; ++r) vals(r) = results[r].byEstimator[e][slot];
        McCell cell;
        cell.scenario = pt.key(cfg.experiment);
        cell.tOrGrade = cfg.experiment == ExperimentKind::Example3 ? static_cast<int>(slot) + 1 : pt.T;
        cell.estimator = cfg.estimators[e];
        cell.metric = cfg.experiment == ExperimentKind::Example3 ? "teacher_var_fraction"
                                                                 : "std_abs_bias";
        cell.value = vals.mean();
        cell.stderr_ = cfg.reps > 1 ? sample_sd(vals) / std::sqrt(double(cfg.reps)) : 0.0;
        cell.reps = cfg.reps;
        summary.cells.push_back(std::move(cell));
      }
    }
  }
  return summary;
}

namespace {

HeterogeneityModel standard_family(int T) {
  HeterogeneityModel h;
  h.d = 1;
  h.A1 = Eigen::VectorXd::Ones(T);  // A1 = nu * 1 with nu = 1
  h.S1 = Eigen::MatrixXd::Identity(1, 1);
  h.Psi1 = Eigen::MatrixXd::Identity(T, T);
  return h;
}

HeterogeneityModel ramp_family(int T, double residVar) {
  HeterogeneityModel h;
  h.d = 2;
  h.A1.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    h.A1(t, 0) = double(T - 1 - t) / (T - 1);
    h.A1(t, 1) = double(t) / (T - 1);
  }
  h.S1.resize(2, 2);
  h.S1 << 1.0, 0.5, 0.5, 1.0;
  h.Psi1 = residVar * Eigen::MatrixXd::Identity(T, T);
  return h;
}

HeterogeneityModel linear_growth_family(int T) {
  HeterogeneityModel h;
  h.d = 2;
  h.A1.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    h.A1(t, 0) = 1.0;
    h.A1(t, 1) = t + 1;
  }
  h.S1 = Eigen::MatrixXd::Identity(2, 2);
  h.Psi1 = Eigen::MatrixXd::Identity(T, T);
  return h;
}

void push_profile(McSummary& summary, const std::string& family, const TheoremProfile& p) {
  for (std::size_t g = 0; g < p.Tgrid.size(); ++g) {
    const int T = p.Tgrid[g];
    auto push = [&](const char* metric, double value) {
      McCell c;
      c.scenario = family;
      c.tOrGrade = T;
      c.metric = metric;
      c.value = value;
      c.reps = 1;
      summary.cells.push_back(std::move(c));
    };
    push("lambda_min", p.lambdaMin(g));
    push("lambda_min_over_T", p.lambdaMin(g) / T);
    push("psi_rowsum_max", p.rowSumMax(g));
    push("compression_max", p.compressionMax(g));
  }
}

}  // namespace

McSummary run_diagnostics(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  McSummary summary;
  summary.experiment = to_string(cfg.experiment) + "-diagnostics";

  if (cfg.experiment == ExperimentKind::Diagnostics) {
    if (progress) progress("theorem condition profiles");
    push_profile(summary, "standard",
                 theorem_condition_profile(standard_family, cfg.Tgrid));
    push_profile(summary, "ramp",
                 theorem_condition_profile([](int T) { return ramp_family(T, 0.2); }, cfg.Tgrid));
    push_profile(summary, "linear-growth",
                 theorem_condition_profile(linear_growth_family, cfg.Tgrid));

    if (progress) progress("dirichlet moment check");
    Eigen::VectorXd omega(2);
    omega << 1.0, 1.0;
    const DirichletCheck chk = dirichlet_limit_check(omega, 10000, 1.0, cfg.baseSeed, 200000);
    auto push = [&](const char* metric, double value) {
      McCell c;
      c.scenario = "dirichlet";
      c.tOrGrade = 10000;
      c.metric = metric;
      c.value = value;
      c.reps = 1;
      summary.cells.push_back(std::move(c));
    };
    push("dev_from_mc", chk.devFromMc);
    push("dev_from_stated", chk.devFromStated);
    push("lambda_min_sample", chk.lambdaMinSample);

    if (progress) progress("lemma inequality sweep");
    Rng rng(cfg.baseSeed);
    int holds = 0;
    const int trials = 1000;
    for (int k = 0; k < trials; ++k) {
      const int d = 1 + static_cast<int>(rng.next_u64() % 6);
      Eigen::MatrixXd Gm(d, d), Hm(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          Gm(i, j) = rng.normal();
          Hm(i, j) = rng.normal();
        }
      const Eigen::MatrixXd B = Gm * Gm.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
      const Eigen::MatrixXd M = Hm * Hm.transpose();
      const Lemma1Result res = lemma1_check(B, M);
      if (res.lowerHolds && res.upperHolds) ++holds;
    }
    McCell c;
    c.scenario = "lemma1";
    c.tOrGrade = trials;
    c.metric = "hold_fraction";
    c.value = double(holds) / trials;
    c.reps = trials;
    summary.cells.push_back(std::move(c));
    return summary;
  }

  // Experiment families: implied-model theorem profile plus the row-sum
  // diagnostic on one generated design per grid point.
  const std::vector<GridPoint> pts = grid_points(cfg);
  if (cfg.experiment == ExperimentKind::Example1 || cfg.experiment == ExperimentKind::Example2) {
    std::function<HeterogeneityModel(int)> family;
    if (cfg.experiment == ExperimentKind::Example1) {
      family = [](int T) {
        Example1Config gc;
        gc.T = T;
        gc.n = 1;
        return gen_example1(gc).truth;
      };
    } else {
      family = [](int T) {
        Example2Config gc;
        gc.T = T;
        gc.n = 1;
        return gen_example2(gc).truth;
      };
    }
    push_profile(summary, "model", theorem_condition_profile(family, cfg.Tgrid));
  }

  for (const GridPoint& pt : pts) {
    if (progress) progress("rowsum diagnostic at " + pt.key(cfg.experiment));
    const std::uint64_t seed = replication_seed(cfg.baseSeed, pt.index, 0);
    GeneratedDataset ds;
    if (cfg.experiment == ExperimentKind::Example1) {
      Example1Config gc;
      gc.scenario = pt.scenario;
      gc.T = pt.T;
      gc.n = cfg.n;
      gc.seed = seed;
      ds = gen_example1(gc);
    } else if (cfg.experiment == ExperimentKind::Example2) {
      Example2Config gc;
      gc.scenario = pt.scenario;
      gc.T = pt.T;
      gc.n = cfg.n;
      gc.seed = seed;
      ds = gen_example2(gc);
    } else {
      TeacherSimConfig gc;
      gc.n = cfg.n;
      gc.S = pt.subjects;
      gc.alpha = pt.alpha;
      gc.seed = seed;
      ds = gen_teacher_scores(gc);
    }
    const BlockCovariance cov = assemble_block_covariance(ds.truth);
    auto push = [&](const char* metric, double value) {
      McCell c;
      c.scenario = pt.key(cfg.experiment);
      c.tOrGrade = cfg.experiment == ExperimentKind::Example3 ? ds.design.T : pt.T;
      c.metric = metric;
      c.value = value;
      c.reps = 1;
      summary.cells.push_back(std::move(c));
    };
    push("rowsum_max", rowsum_condition(ds.design, cov));
    if (cfg.experiment != ExperimentKind::Example3) {
      // restricted to the treatment-effect columns; the intercept and period
      // means are ancillary and their rows grow with T regardless of the
      // assignment mechanism
      const std::vector<Eigen::Index> idx =
          treatment_indices(cfg.experiment, pt.scenario, pt.T);
      PanelDesign sub = ds.design;
      sub.Z.resize(ds.design.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) sub.Z.col(j) = ds.design.Z.col(idx[j]);
      push("rowsum_max_treatment", rowsum_condition(sub, cov));
    }
  }
  return summary;
}

}  // namespace panelgls
