#include "panelgls/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "panelgls/rng.hpp"

namespace panelgls {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> even_spacing(double from, double to, int T) {
  std::vector<double> v(T);
  for (int t = 0; t < T; ++t)
    v[t] = T == 1 ? from : from + (to - from) * t / double(T - 1);
  return v;
}

void balanced_layout(PanelDesign& design, int n, int T) {
  design.n = n;
  design.T = T;
  design.studentOf.resize(static_cast<std::size_t>(n) * T);
  design.timeOf.resize(static_cast<std::size_t>(n) * T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      design.studentOf[static_cast<std::size_t>(i) * T + t] = i;
      design.timeOf[static_cast<std::size_t>(i) * T + t] = t;
    }
}

}  // namespace

std::vector<double> Example1Config::loading_values() const {
  return loadings.empty() ? even_spacing(aStart, aEnd, T) : loadings;
}

void Example1Config::validate() const {
  if (scenario < 1 || scenario > 4) throw ValidationError("example1: scenario must be in 1..4");
  if (T < 1 || n < 1) throw ValidationError("example1: T and n must be >= 1");
  const std::vector<double> a = loading_values();
  if (static_cast<int>(a.size()) != T) throw ValidationError("example1: loadings must have length T");
  for (double at : a)
    if (at <= 0.0 || at >= 1.0)
      throw ValidationError("example1: loadings must lie in (0,1) so residual variances stay positive");
}

void Example2Config::validate() const {
  if (scenario < 1 || scenario > 3) throw ValidationError("example2: scenario must be in 1..3");
  if (T < 2 || n < 1) throw ValidationError("example2: T must be >= 2 and n >= 1");
  if (std::abs(factorCorr) >= 1.0) throw ValidationError("example2: |factor correlation| must be < 1");
  if (residVar <= 0.0) throw ValidationError("example2: residual variance must be > 0");
}

double TeacherSimConfig::marginalVariance(int g) const {
  return (sigmaDelta2 + nuDelta2) + double(g) * g * (sigmaLambda2 + nuLambda2) +
         2.0 * g * r * std::sqrt(sigmaDelta2 * sigmaLambda2) + sigmaEps2;
}

void TeacherSimConfig::validate() const {
  if (n < 1 || classSize < 1 || G < 1 || S < 1) throw ValidationError("example3: bad dimensions");
  if (n % classSize != 0)
    throw ValidationError("example3: n must be divisible by classSize");
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("example3: alpha must lie in [0,1]");
  if (sigmaDelta2 < 0 || sigmaLambda2 < 0 || nuDelta2 < 0 || nuLambda2 < 0 || sigmaEps2 <= 0)
    throw ValidationError("example3: variance components must be nonnegative, sigmaEps2 > 0");
  if (std::abs(r) >= 1.0) throw ValidationError("example3: |r| must be < 1");
  for (int g = 0; g < G; ++g)
    if (marginalVariance(g) <= 0.0)
      throw ValidationError("example3: nonpositive marginal variance at grade " + std::to_string(g));
}

GeneratedDataset gen_example1(const Example1Config& cfg) {
  cfg.validate();
  const int n = cfg.n, T = cfg.T;
  const std::vector<double> a = cfg.loading_values();
  const bool perPeriodTreatment = cfg.scenario == 2 || cfg.scenario == 4;
  const bool perPeriodEffects = cfg.scenario >= 3;
  const int k = perPeriodEffects ? 2 * T : 2;

  GeneratedDataset ds;
  balanced_layout(ds.design, n, T);
  ds.design.Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * T, k);
  ds.y.resize(static_cast<Eigen::Index>(n) * T);
  ds.delta.resize(n, 1);
  ds.treatment = Eigen::MatrixXi::Zero(n, T);
  ds.trueTheta = Eigen::VectorXd::Zero(k);

  Rng root(cfg.seed);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.substream(static_cast<std::uint64_t>(i));
    const double delta = rng.normal();
    ds.delta(i, 0) = delta;
    const double pTreat = logistic(delta);
    if (perPeriodTreatment) {
      for (int t = 0; t < T; ++t) ds.treatment(i, t) = rng.bernoulli(pTreat) ? 1 : 0;
    } else {
      const int z = rng.bernoulli(pTreat) ? 1 : 0;
      for (int t = 0; t < T; ++t) ds.treatment(i, t) = z;
    }
    for (int t = 0; t < T; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * T + t;
      const double eps = rng.normal() * std::sqrt(1.0 - a[t] * a[t]);
      ds.y(row) = a[t] * delta + eps;  // trueTheta = 0
      if (perPeriodEffects) {
        ds.design.Z(row, t) = 1.0;
        ds.design.Z(row, T + t) = ds.treatment(i, t);
      } else {
        ds.design.Z(row, 0) = 1.0;
        ds.design.Z(row, 1) = ds.treatment(i, t);
      }
    }
  }

  ds.truth.d = 1;
  ds.truth.A1 = Eigen::Map<const Eigen::VectorXd>(a.data(), T);
  ds.truth.S1 = Eigen::MatrixXd::Identity(1, 1);
  ds.truth.Psi1 = Eigen::MatrixXd::Zero(T, T);
  for (int t = 0; t < T; ++t) ds.truth.Psi1(t, t) = 1.0 - a[t] * a[t];
  return ds;
}

GeneratedDataset gen_example2(const Example2Config& cfg) {
  cfg.validate();
  const int n = cfg.n, T = cfg.T;
  const std::vector<double> a1 = even_spacing(cfg.a1Start, cfg.a1End, T);
  const std::vector<double> a2 = even_spacing(cfg.a2Start, cfg.a2End, T);
  const double c = cfg.factorCorr;
  const double cResid = std::sqrt(1.0 - c * c);
  const int k = T + 1;

  GeneratedDataset ds;
  balanced_layout(ds.design, n, T);
  ds.design.Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * T, k);
  ds.y.resize(static_cast<Eigen::Index>(n) * T);
  ds.delta.resize(n, 2);
  ds.treatment = Eigen::MatrixXi::Zero(n, T);
  ds.trueTheta = Eigen::VectorXd::Zero(k);

  Rng root(cfg.seed);
  const double sdEps = std::sqrt(cfg.residVar);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.substream(static_cast<std::uint64_t>(i));
    const double n1 = rng.normal();
    const double n2 = rng.normal();
    const double d1 = n1;
    const double d2 = c * n1 + cResid * n2;
    ds.delta(i, 0) = d1;
    ds.delta(i, 1) = d2;
    double logOdds = 0.0;
    switch (cfg.scenario) {
      case 1: logOdds = 0.4 * d1 + 0.4 * d2; break;
      case 2: logOdds = 0.4 * d1; break;
      case 3: logOdds = 0.4 * d2; break;
    }
    const int z = rng.bernoulli(logistic(logOdds)) ? 1 : 0;
    ds.treatment(i, T - 1) = z;
    for (int t = 0; t < T; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * T + t;
      ds.y(row) = a1[t] * d1 + a2[t] * d2 + sdEps * rng.normal();  // mu_t = 0, beta = 0
      ds.design.Z(row, t) = 1.0;
      if (t == T - 1) ds.design.Z(row, T) = z;
    }
  }

  ds.truth.d = 2;
  ds.truth.A1.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    ds.truth.A1(t, 0) = a1[t];
    ds.truth.A1(t, 1) = a2[t];
  }
  ds.truth.S1.resize(2, 2);
  ds.truth.S1 << 1.0, c, c, 1.0;
  ds.truth.Psi1 = cfg.residVar * Eigen::MatrixXd::Identity(T, T);
  return ds;
}

GeneratedDataset gen_teacher_scores(const TeacherSimConfig& cfg) {
  cfg.validate();
  const int n = cfg.n, G = cfg.G, S = cfg.S;
  const int T = G * S;
  // minimal factor representation (rank(A1) = d): per-subject intercepts
  // u_is = delta_i + delta_is and slopes v_is = lambda_i + lambda_is
  const int d = 2 * S;
  const double sdDelta = std::sqrt(cfg.sigmaDelta2);
  const double sdLambda = std::sqrt(cfg.sigmaLambda2);

  GeneratedDataset ds;
  ds.G = G;
  ds.S = S;
  ds.delta.resize(n, d);
  ds.classOf.resize(n, G);
  ds.y.resize(static_cast<Eigen::Index>(n) * T);
  ds.gradeOf.resize(static_cast<std::size_t>(n) * T);
  ds.subjectOf.resize(static_cast<std::size_t>(n) * T);

  // draw order per student: (delta_i, lambda_i), delta_is (S), lambda_is (S),
  // xi_ig (G), eps_isg (G*S); stored latents are u_is and v_is
  ds.eta.resize(n, G);
  Eigen::MatrixXd& eta = ds.eta;
  Rng root(cfg.seed);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.substream(static_cast<std::uint64_t>(i));
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double di = sdDelta * z1;
    const double li = sdLambda * (cfg.r * z1 + std::sqrt(1.0 - cfg.r * cfg.r) * z2);
    for (int s = 0; s < S; ++s) ds.delta(i, s) = di + std::sqrt(cfg.nuDelta2) * rng.normal();
    for (int s = 0; s < S; ++s) ds.delta(i, S + s) = li + std::sqrt(cfg.nuLambda2) * rng.normal();
    for (int g = 0; g < G; ++g)
      eta(i, g) = cfg.wIntercept * (di / sdDelta) + cfg.wSlope * (li / sdLambda) +
                  cfg.wNoise * rng.normal();
    for (int g = 0; g < G; ++g) {
      for (int s = 0; s < S; ++s) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * T + g * S + s;
        ds.y(row) = ds.delta(i, s) + ds.delta(i, S + s) * g +
                    std::sqrt(cfg.sigmaEps2) * rng.normal();
        ds.gradeOf[row] = g;
        ds.subjectOf[row] = s;
      }
    }
  }

  // Sorted class fill per grade: smallest classSize etas to class 0, and so
  // on; ties broken by student id.
  std::vector<int> order(n);
  for (int g = 0; g < G; ++g) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (eta(a, g) != eta(b, g)) return eta(a, g) < eta(b, g);
      return a < b;
    });
    for (int pos = 0; pos < n; ++pos) ds.classOf(order[pos], g) = pos / cfg.classSize;
  }

  if (cfg.buildDesign) {
    ds.design = build_persistence_design(ds.classOf, cfg.alpha, G, S);
  } else {
    balanced_layout(ds.design, n, T);
    ds.design.Z.resize(static_cast<Eigen::Index>(n) * T, 0);
  }
  ds.trueTheta = Eigen::VectorXd::Zero(ds.design.k());

  ds.truth.d = d;
  ds.truth.A1 = Eigen::MatrixXd::Zero(T, d);
  for (int g = 0; g < G; ++g)
    for (int s = 0; s < S; ++s) {
      const int t = g * S + s;
      ds.truth.A1(t, s) = 1.0;
      ds.truth.A1(t, S + s) = g;
    }
  // V(u) = sigma_d^2 J + nu_d^2 I, V(v) = sigma_l^2 J + nu_l^2 I,
  // Cov(u_s, v_s') = r sigma_d sigma_l for every pair
  ds.truth.S1 = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < S; ++s)
    for (int s2 = 0; s2 < S; ++s2) {
      ds.truth.S1(s, s2) = cfg.sigmaDelta2 + (s == s2 ? cfg.nuDelta2 : 0.0);
      ds.truth.S1(S + s, S + s2) = cfg.sigmaLambda2 + (s == s2 ? cfg.nuLambda2 : 0.0);
      ds.truth.S1(s, S + s2) = ds.truth.S1(S + s2, s) = cfg.r * sdDelta * sdLambda;
    }
  ds.truth.Psi1 = cfg.sigmaEps2 * Eigen::MatrixXd::Identity(T, T);
  return ds;
}

PanelDesign build_persistence_design(const Eigen::MatrixXi& classOf, double alpha, int G, int S) {
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("build_persistence_design: alpha must lie in [0,1]");
  const int n = static_cast<int>(classOf.rows());
  if (classOf.cols() != G || n < 1) throw ValidationError("build_persistence_design: assignments must be n x G");
  const int nClasses = classOf.maxCoeff() + 1;
  const int T = G * S;
  const int k = nClasses * G * S;

  PanelDesign design;
  balanced_layout(design, n, T);
  design.Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * T, k);
  for (int i = 0; i < n; ++i)
    for (int g2 = 0; g2 < G; ++g2)
      for (int s = 0; s < S; ++s) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * T + g2 * S + s;
        for (int g1 = 0; g1 <= g2; ++g1) {
          const int col = (g1 * nClasses + classOf(i, g1)) * S + s;
          design.Z(row, col) = g1 == g2 ? 1.0 : std::pow(alpha, g2 - g1);
        }
      }
  return design;
}

std::vector<TeacherColumn> teacher_columns(int G, int S, int nClasses) {
  std::vector<TeacherColumn> cols;
  cols.reserve(static_cast<std::size_t>(G) * S * nClasses);
  for (int g = 0; g < G; ++g)
    for (int c = 0; c < nClasses; ++c)
      for (int s = 0; s < S; ++s) cols.push_back({g, c, s});
  return cols;
}

std::pair<GeneratedDataset, ObservationMask> apply_mar_mask(const GeneratedDataset& ds,
                                                            double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("apply_mar_mask: rate must lie in [0,1)");
  const int n = ds.design.n, T = ds.design.T;
  if (!ds.design.balanced()) throw ValidationError("apply_mar_mask: dataset must be balanced");

  ObservationMask mask = ObservationMask::all_present(n, T);
  Rng root(seed);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.substream(static_cast<std::uint64_t>(i));
    for (;;) {
      bool any = false;
      for (int t = 0; t < T; ++t) {
        const bool present = !(rng.u01() < rate);
        mask.set(i, t, present);
        any = any || present;
      }
      if (any) break;  // redraw students left with no observed score
    }
  }

  GeneratedDataset out;
  out.trueTheta = ds.trueTheta;
  out.delta = ds.delta;
  out.truth = ds.truth;
  out.treatment = ds.treatment;
  out.classOf = ds.classOf;
  out.eta = ds.eta;
  out.G = ds.G;
  out.S = ds.S;

  std::vector<int> keep;
  keep.reserve(ds.design.rows());
  for (Eigen::Index r = 0; r < ds.design.rows(); ++r)
    if (mask.at(ds.design.studentOf[r], ds.design.timeOf[r])) keep.push_back(static_cast<int>(r));

  out.design.n = n;
  out.design.T = T;
  out.design.Z.resize(static_cast<Eigen::Index>(keep.size()), ds.design.k());
  out.y.resize(static_cast<Eigen::Index>(keep.size()));
  out.design.studentOf.resize(keep.size());
  out.design.timeOf.resize(keep.size());
  if (!ds.gradeOf.empty()) {
    out.gradeOf.resize(keep.size());
    out.subjectOf.resize(keep.size());
  }
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const int r = keep[a];
    out.design.Z.row(static_cast<Eigen::Index>(a)) = ds.design.Z.row(r);
    out.y(static_cast<Eigen::Index>(a)) = ds.y(r);
    out.design.studentOf[a] = ds.design.studentOf[r];
    out.design.timeOf[a] = ds.design.timeOf[r];
    if (!ds.gradeOf.empty()) {
      out.gradeOf[a] = ds.gradeOf[r];
      out.subjectOf[a] = ds.subjectOf[r];
    }
  }
  return {std::move(out), std::move(mask)};
}

void write_scores_csv(const GeneratedDataset& ds, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ValidationError("write_scores_csv: cannot open " + path);
  std::fputs("student,t,subject,y\n", f);
  for (Eigen::Index r = 0; r < ds.y.size(); ++r) {
    const int subject = ds.subjectOf.empty() ? 1 : ds.subjectOf[r] + 1;
    std::fprintf(f, "%d,%d,%d,%.17g\n", ds.design.studentOf[r] + 1, ds.design.timeOf[r] + 1,
                 subject, ds.y(r));
  }
  std::fclose(f);
}

void write_design_csv(const GeneratedDataset& ds, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ValidationError("write_design_csv: cannot open " + path);
  std::fputs("row,column,value\n", f);
  for (Eigen::Index r = 0; r < ds.design.rows(); ++r)
    for (Eigen::Index c = 0; c < ds.design.k(); ++c)
      if (ds.design.Z(r, c) != 0.0)
        std::fprintf(f, "%lld,%lld,%.17g\n", static_cast<long long>(r), static_cast<long long>(c),
                     ds.design.Z(r, c));
  std::fclose(f);
}

}  // namespace panelgls
