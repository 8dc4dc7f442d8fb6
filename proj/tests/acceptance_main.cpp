// Acceptance suite: one pass/fail line per criterion. Run all with no
// arguments or a single criterion with --criterion N. Exit code 0 only if
// every selected criterion passes.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "panelgls/diagnostics.hpp"
#include "panelgls/emit.hpp"
#include "panelgls/estimators.hpp"
#include "panelgls/harness.hpp"
#include "panelgls/simgen.hpp"

using namespace panelgls;

namespace {

constexpr std::uint64_t kSeed = 20240611;
int gThreads = 2;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

using CellKey = std::pair<std::string, int>;  // scenario key, T or grade

std::map<CellKey, McCell> cells_for(const McSummary& s, const std::string& estimator) {
  std::map<CellKey, McCell> out;
  for (const McCell& c : s.cells)
    if (c.estimator == estimator) out[{c.scenario, c.tOrGrade}] = c;
  return out;
}

// ---------------------------------------------------------------------------
// 1. gammaT band
bool criterion1(std::string& detail) {
  Check chk;
  const GammaResult g7 = gamma({0.7, 0.3}, 5);
  const GammaResult g8 = gamma({0.8, 0.2}, 5);
  chk.require(std::abs(g7.gammaT - 0.7 * 5 / (1.0 + 0.7 * 4)) <= 1e-12, "gammaT(0.7,5) formula");
  chk.require(std::abs(g8.gammaT - 0.8 * 5 / (1.0 + 0.8 * 4)) <= 1e-12, "gammaT(0.8,5) formula");
  chk.require(std::abs(g7.gammaT - 0.9211) < 5e-5, "gammaT(0.7,5) != 0.9211");
  chk.require(std::abs(g8.gammaT - 0.9524) < 5e-5, "gammaT(0.8,5) != 0.9524");
  chk.require(g7.gammaT >= 0.92 && g8.gammaT <= 0.953, "band 0.92..0.95 not bracketed");
  detail = "gammaT(0.7,5)=" + fmt(g7.gammaT) + " gammaT(0.8,5)=" + fmt(g8.gammaT);
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 2. Eq.4/Eq.5 identity and Woodbury vs dense on 100 random instances
bool criterion2(std::string& detail) {
  Check chk;
  pgtest::Rng rng(kSeed);
  double worstId = 0.0, worstInv = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    pgtest::Rng r = rng.substream(rep);
    const int n = 5 + static_cast<int>(r.next_u64() % 96);   // <= 100
    const int T = 2 + static_cast<int>(r.next_u64() % 7);    // <= 8
    const double nu2 = 0.2 + r.u01() * 2.0;
    const double sigma2 = 0.2 + r.u01() * 2.0;
    Eigen::VectorXd theta(2);
    theta << r.normal(), r.normal();
    const auto data = pgtest::gen_standard(r, n, T, nu2, sigma2, pgtest::Selection::None, theta);

    HeterogeneityModel h;
    h.d = 1;
    h.A1 = Eigen::VectorXd::Ones(T);
    h.S1 = nu2 * Eigen::MatrixXd::Identity(1, 1);
    h.Psi1 = sigma2 * Eigen::MatrixXd::Identity(T, T);
    const BlockCovariance cov = assemble_block_covariance(h);

    const Eigen::VectorXd a = re_quasi_demeaned(data.design, data.y, {nu2, sigma2}).theta;
    const Eigen::VectorXd b = gls_known_R(data.design, data.y, cov).theta;
    worstId = std::max(worstId,
                       (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
    worstInv = std::max(worstInv, (cov.R1inv - pgtest::dense_R_inverse(h)).cwiseAbs().maxCoeff());
  }
  chk.require(worstId <= 1e-8, "Eq.5fEq.4 relative deviation " + fmt(worstId));
  chk.require(worstInv <= 1e-8, "Woodbury vs dense deviation " + fmt(worstInv));
  detail = "max Eq.5/Eq.4 rel dev " + fmt(worstId) + ", max inverse dev " + fmt(worstInv);
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 3. Figure 1 reproduction
bool criterion3(std::string& detail) {
  ExperimentConfig cfg = default_config(ExperimentKind::Example1);
  cfg.reps = 100;
  cfg.n = 1000;
  cfg.baseSeed = kSeed;
  cfg.estimators = {"OLS", "GLS-known"};
  const McSummary s = run_experiment(cfg, gThreads);
  const auto ols = cells_for(s, "OLS");
  const auto mixed = cells_for(s, "GLS-known");

  Check chk;
  std::ostringstream os;
  for (int scen : {2, 4}) {
    const std::string key = std::to_string(scen);
    const double m3 = mixed.at({key, 3}).value;
    const double m20 = mixed.at({key, 20}).value;
    const double o20 = ols.at({key, 20}).value;
    os << "s" << scen << ": mixed T3=" << fmt(m3) << " T20=" << fmt(m20) << " ols T20="
       << fmt(o20) << "  ";
    chk.require(m20 < 0.25 * m3, "scenario " + key + ": T20 not < 25% of T3");
    chk.require(m20 < 0.25 * o20, "scenario " + key + ": mixed not < 25% of OLS at T20");
  }
  for (int scen : {1, 3}) {
    const std::string key = std::to_string(scen);
    for (int T : cfg.Tgrid) {
      const McCell& m = mixed.at({key, T});
      const McCell& o = ols.at({key, T});
      const double tol = 2.0 * std::sqrt(m.stderr_ * m.stderr_ + o.stderr_ * o.stderr_);
      chk.require(std::abs(m.value - o.value) <= tol,
                  "scenario " + key + " T=" + std::to_string(T) + ": |mixed-ols| " +
                      fmt(std::abs(m.value - o.value)) + " > 2se " + fmt(tol));
    }
    os << "s" << scen << ": mixed~ols ok  ";
  }
  detail = os.str();
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 4. Figure 2 reproduction
bool criterion4(std::string& detail) {
  ExperimentConfig cfg = default_config(ExperimentKind::Example2);
  cfg.Tgrid = {2, 3, 5, 10, 15, 20};
  cfg.reps = 100;
  cfg.n = 1000;
  cfg.baseSeed = kSeed + 1;
  cfg.estimators = {"OLS", "GLS-known", "GLS-feasible"};
  const McSummary s = run_experiment(cfg, gThreads);
  const auto known = cells_for(s, "GLS-known");
  const auto feas = cells_for(s, "GLS-feasible");

  Check chk;
  double worstGap = 0.0;
  for (int scen : {1, 2, 3}) {
    const std::string key = std::to_string(scen);
    for (int T : cfg.Tgrid) {
      const double gap = std::abs(feas.at({key, T}).value - known.at({key, T}).value);
      worstGap = std::max(worstGap, gap);
      chk.require(gap <= 0.02, "scenario " + key + " T=" + std::to_string(T) +
                                   ": feasible-known gap " + fmt(gap));
    }
  }
  for (int T : {10, 15, 20})
    chk.require(known.at({"1", T}).value < 0.02,
                "scenario 1 T=" + std::to_string(T) + ": known-R bias " +
                    fmt(known.at({"1", T}).value) + " >= 0.02");
  for (int T : cfg.Tgrid)
    chk.require(known.at({"3", T}).value < 0.03,
                "scenario 3 T=" + std::to_string(T) + ": known-R bias " +
                    fmt(known.at({"3", T}).value) + " >= 0.03");
  detail = "known s1@T10/15/20 = " + fmt(known.at({"1", 10}).value) + "/" +
           fmt(known.at({"1", 15}).value) + "/" + fmt(known.at({"1", 20}).value) +
           ", max feasible gap " + fmt(worstGap);
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 5. Figure 3 reproduction (smoke grid: S = 2, alpha in {0, 1})
bool criterion5(std::string& detail) {
  Check chk;
  const double printed[5] = {1.500, 1.825, 2.500, 3.525, 4.900};
  TeacherSimConfig probe;
  for (int g = 0; g < 5; ++g)
    chk.require(std::abs(probe.marginalVariance(g) - printed[g]) <= 1e-12,
                "analytic variance grade " + std::to_string(g + 1));

  TeacherSimConfig big;
  big.n = 10000;
  big.S = 1;
  big.seed = kSeed + 2;
  big.buildDesign = false;
  const GeneratedDataset ds = gen_teacher_scores(big);
  for (int g = 0; g < big.G; ++g) {
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < big.n; ++i) mean += ds.y(static_cast<Eigen::Index>(i) * big.G + g);
    mean /= big.n;
    for (int i = 0; i < big.n; ++i) {
      const double v = ds.y(static_cast<Eigen::Index>(i) * big.G + g) - mean;
      m2 += v * v;
    }
    chk.require(std::abs(m2 / (big.n - 1) - printed[g]) < 0.1,
                "empirical variance grade " + std::to_string(g + 1));
  }

  ExperimentConfig cfg = default_config(ExperimentKind::Example3);
  cfg.subjects = {2};
  cfg.alphas = {0.0, 1.0};
  cfg.reps = 100;
  cfg.n = 1000;
  cfg.baseSeed = kSeed + 3;
  cfg.estimators = {"class-means", "OLS", "GLS-known"};
  const McSummary s = run_experiment(cfg, gThreads);
  const auto mixed = cells_for(s, "GLS-known");
  const auto means = cells_for(s, "class-means");

  std::ostringstream os;
  double worst0 = 0.0;
  for (int g = 1; g <= 5; ++g) {
    const double frac = mixed.at({"S2/a0", g}).value;
    worst0 = std::max(worst0, frac);
    chk.require(frac < 0.01,
                "alpha=0 grade " + std::to_string(g) + " mixed fraction " + fmt(frac));
  }
  os << "alpha=0 mixed max " << fmt(worst0);

  const double g1 = mixed.at({"S2/a1", 1}).value;
  double laterMax = 0.0;
  for (int g = 2; g <= 5; ++g) laterMax = std::max(laterMax, mixed.at({"S2/a1", g}).value);
  chk.require(g1 > 3.0 * laterMax, "alpha=1: grade-1 " + fmt(g1) + " not > 3x later max " +
                                       fmt(laterMax));
  os << "; alpha=1 mixed g1 " << fmt(g1) << " vs later max " << fmt(laterMax);

  for (int g = 1; g < 5; ++g) {
    const McCell& lo = means.at({"S2/a0", g});
    const McCell& hi = means.at({"S2/a0", g + 1});
    const double tol = 2.0 * std::sqrt(lo.stderr_ * lo.stderr_ + hi.stderr_ * hi.stderr_);
    chk.require(hi.value >= lo.value - tol,
                "class-mean fraction not increasing at grade " + std::to_string(g));
  }
  os << "; class-mean fractions " << fmt(means.at({"S2/a0", 1}).value) << "->"
     << fmt(means.at({"S2/a0", 5}).value);
  detail = os.str();
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 6. Theorem diagnostics
bool criterion6(std::string& detail) {
  Check chk;
  const double nu = 1.3, sigma = 0.9;
  auto standard = [&](int T) {
    HeterogeneityModel h;
    h.d = 1;
    h.A1 = nu * Eigen::VectorXd::Ones(T);
    h.S1 = Eigen::MatrixXd::Identity(1, 1);
    h.Psi1 = sigma * sigma * Eigen::MatrixXd::Identity(T, T);
    return h;
  };
  const std::vector<int> grid = {3, 5, 10, 15, 20};
  const TheoremProfile p = theorem_condition_profile(standard, grid);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const int T = grid[g];
    chk.require(std::abs(p.compressionMax(g) - nu / (sigma * sigma + T * nu * nu)) <= 1e-10,
                "compressionMax at T=" + std::to_string(T));
    chk.require(std::abs(p.lambdaMin(g) - nu * nu / (sigma * sigma) * T) <=
                    1e-12 * p.lambdaMin(g),
                "lambdaMin at T=" + std::to_string(T));
  }

  auto ramp = [](int T) {
    HeterogeneityModel h;
    h.d = 2;
    h.A1.resize(T, 2);
    for (int t = 0; t < T; ++t) {
      h.A1(t, 0) = double(T - 1 - t) / (T - 1);
      h.A1(t, 1) = double(t) / (T - 1);
    }
    h.S1.resize(2, 2);
    h.S1 << 1.0, 0.5, 0.5, 1.0;
    h.Psi1 = Eigen::MatrixXd::Identity(T, T);
    return h;
  };
  const TheoremProfile pr = theorem_condition_profile(ramp, {200});
  const double ratio = pr.lambdaMin(0) / 200.0 / (1.0 / 6.0);
  chk.require(std::abs(ratio - 1.0) <= 0.05, "ramp lambdaMin/T vs 1/6 off by " + fmt(ratio - 1.0));

  auto growth = [](int T) {
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
  };
  const std::vector<int> ggrid = {10, 25, 50, 100, 200};
  const TheoremProfile pg = theorem_condition_profile(growth, ggrid);
  double minRatio = 1e300;
  for (std::size_t g = 0; g < ggrid.size(); ++g)
    minRatio = std::min(minRatio, pg.lambdaMin(g) / ggrid[g]);
  chk.require(minRatio > 0.2, "linear-growth lambdaMin/T min " + fmt(minRatio));

  detail = "ramp (lambdaMin/T)/(1/6) = " + fmt(ratio) + ", growth min lambdaMin/T = " +
           fmt(minRatio);
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 7. Lemma property suite
bool criterion7(std::string& detail) {
  Check chk;
  pgtest::Rng rng(kSeed + 4);
  int held = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 6);
    const Eigen::MatrixXd B = pgtest::random_spd(rng, d, 0.05);
    const Eigen::MatrixXd G = pgtest::random_matrix(rng, d, d);
    const Lemma1Result res = lemma1_check(B, G * G.transpose(), 1e-9);
    if (res.lowerHolds && res.upperHolds) ++held;
  }
  chk.require(held == 1000, std::to_string(1000 - held) + " of 1000 pairs violated a bound");
  detail = std::to_string(held) + "/1000 random (B, M) pairs satisfy both inequalities";
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 8. Row-sum diagnostic contrast
bool criterion8(std::string& detail) {
  Check chk;
  auto diag_at = [&](int scenario, int T) {
    Example1Config cfg;
    cfg.scenario = scenario;
    cfg.T = T;
    cfg.n = 1000;
    cfg.seed = kSeed + 5;
    const GeneratedDataset ds = gen_example1(cfg);
    PanelDesign d = ds.design;
    d.Z = Eigen::MatrixXd(ds.design.Z.col(1));  // treatment column
    return rowsum_condition(d, assemble_block_covariance(ds.truth));
  };
  const std::vector<int> grid = {3, 5, 10, 15, 20};
  std::vector<double> s1, s2;
  for (int T : grid) {
    s1.push_back(diag_at(1, T));
    s2.push_back(diag_at(2, T));
  }
  for (std::size_t g = 1; g < grid.size(); ++g)
    chk.require(s1[g] > s1[g - 1], "scenario 1 not increasing at T=" + std::to_string(grid[g]));
  chk.require(s2.back() <= 1.5 * s2.front(),
              "scenario 2 grew: first " + fmt(s2.front()) + " last " + fmt(s2.back()));
  detail = "scenario1 " + fmt(s1.front()) + "->" + fmt(s1.back()) + " increasing; scenario2 " +
           fmt(s2.front()) + "->" + fmt(s2.back());
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

// ---------------------------------------------------------------------------
// 9. Missing-data extension
bool criterion9(std::string& detail) {
  Check chk;
  const int reps = 100;

  ExperimentConfig cfg = default_config(ExperimentKind::Example2);
  cfg.scenarios = {1};
  cfg.Tgrid = {15};
  cfg.reps = reps;
  cfg.n = 1000;
  cfg.baseSeed = kSeed + 6;
  cfg.estimators = {"GLS-known"};
  const McSummary s = run_experiment(cfg, gThreads);
  const double complete15 = s.cells.at(0).value;

  double sum = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    Example2Config gc;
    gc.scenario = 1;
    gc.T = 20;
    gc.n = 1000;
    gc.seed = replication_seed(kSeed + 7, 0, rep);
    const GeneratedDataset ds = gen_example2(gc);
    auto [masked, mask] = apply_mar_mask(ds, 0.5, mix_seed(gc.seed, 0x4D41534BULL));
    const EstimateResult fit =
        gls_known_R(masked.design, masked.y, assemble_block_covariance(ds.truth), &mask);

    std::vector<double> last;
    for (Eigen::Index r = 0; r < masked.design.rows(); ++r)
      if (masked.design.timeOf[r] == gc.T - 1) last.push_back(masked.y(r));
    double mean = 0.0;
    for (double v : last) mean += v;
    mean /= double(last.size());
    double var = 0.0;
    for (double v : last) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (double(last.size()) - 1.0));
    sum += std::abs(fit.theta(gc.T)) / sd;  // treatment coefficient, truth 0
  }
  const double masked20 = sum / reps;
  chk.require(std::abs(masked20 - complete15) <= 0.02,
              "masked T=20 " + fmt(masked20) + " vs complete T=15 " + fmt(complete15));
  detail = "masked T=20 rate 0.5 bias " + fmt(masked20) + ", complete T=15 bias " +
           fmt(complete15);
  if (!chk.ok) detail += " [" + chk.detail + "]";
  return chk.ok;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc) only = std::atoi(argv[++a]);
    if (std::strcmp(argv[a], "--threads") == 0 && a + 1 < argc) gThreads = std::atoi(argv[++a]);
  }

  struct Entry {
    int id;
    const char* name;
    bool (*run)(std::string&);
  };
  const std::vector<Entry> entries = {
      {1, "gammaT band (Eq. 6)", criterion1},
      {2, "estimator identity and Woodbury inverse", criterion2},
      {3, "figure 1 reproduction (example 1)", criterion3},
      {4, "figure 2 reproduction (example 2)", criterion4},
      {5, "figure 3 reproduction (example 3)", criterion5},
      {6, "theorem condition diagnostics", criterion6},
      {7, "lemma inequality property suite", criterion7},
      {8, "row-sum diagnostic contrast", criterion8},
      {9, "missing-data extension", criterion9},
  };

  bool allOk = true;
  for (const Entry& e : entries) {
    if (only != 0 && e.id != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = e.run(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", e.id, e.name,
                detail.c_str());
    std::fflush(stdout);
    allOk = allOk && ok;
  }
  return allOk ? 0 : 1;
}
