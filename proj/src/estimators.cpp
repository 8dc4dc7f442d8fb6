#include "panelgls/estimators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>

namespace panelgls {

std::string to_string(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::OLS: return "OLS";
    case EstimatorTag::FE: return "FE";
    case EstimatorTag::REQuasi: return "RE-quasi";
    case EstimatorTag::GLSKnown: return "GLS-known";
    case EstimatorTag::GLSFeasible: return "GLS-feasible";
    case EstimatorTag::ClassMeans: return "class-means";
  }
  return "?";
}

namespace {

// Solves N theta = b for symmetric PD N; also returns N^{-1}. Near-zero
// pivots are treated as a singular normal matrix.
struct NormalSolve {
  Eigen::VectorXd theta;
  Eigen::MatrixXd cov;
};

NormalSolve solve_normal(const Eigen::MatrixXd& N, const Eigen::VectorXd& b, const char* ctx) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
  const Eigen::VectorXd D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 || D.minCoeff() <= 1e-12 * dmax)
    throw NumericalError(std::string(ctx) + ": singular normal matrix");
  NormalSolve out;
  out.theta = ldlt.solve(b);
  out.cov = ldlt.solve(Eigen::MatrixXd::Identity(N.rows(), N.cols()));
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());
  return out;
}

// Columns of M with any nonzero entry in the given rows. Keeps per-student
// normal-equation accumulation cheap when Z is wide and sparse (teacher
// designs), exact either way.
std::vector<int> active_columns(const Eigen::MatrixXd& M, const std::vector<int>& rows) {
  std::vector<int> cols;
  for (int j = 0; j < M.cols(); ++j) {
    for (int r : rows) {
      if (M(r, j) != 0.0) {
        cols.push_back(j);
        break;
      }
    }
  }
  return cols;
}

void check_rank_or_throw(const PanelDesign& design, bool demeaned, const char* ctx) {
  RankReport report = validate_design(design, demeaned);
  if (!report.dependentColumns.empty())
    throw ValidationError(std::string(ctx) + ": design is rank deficient; dependent columns: " +
                          format_column_list(report.dependentColumns));
}

}  // namespace

EstimateResult ols(const PanelDesign& design, const Eigen::VectorXd& y) {
  design.validate();
  if (y.size() != design.rows()) throw ValidationError("ols: y length does not match design");
  const Eigen::Index k = design.k();
  Eigen::MatrixXd N;
  Eigen::VectorXd b;
  if (k <= 64) {
    N = design.Z.transpose() * design.Z;
    b = design.Z.transpose() * y;
  } else {
    // wide designs (teacher indicators) are sparse per student; accumulate
    // over active columns instead of one huge dense product
    N = Eigen::MatrixXd::Zero(k, k);
    b = Eigen::VectorXd::Zero(k);
    const std::vector<std::vector<int>> groups = rows_by_student(design.studentOf, design.n);
    for (const auto& rws : groups) {
      const std::vector<int> cols = active_columns(design.Z, rws);
      const int m = static_cast<int>(cols.size());
      if (m == 0) continue;
      Eigen::MatrixXd Zi(rws.size(), m);
      Eigen::VectorXd yi(rws.size());
      for (std::size_t a = 0; a < rws.size(); ++a) {
        yi(static_cast<Eigen::Index>(a)) = y(rws[a]);
        for (int c = 0; c < m; ++c) Zi(static_cast<Eigen::Index>(a), c) = design.Z(rws[a], cols[c]);
      }
      const Eigen::MatrixXd Ui = Zi.transpose() * Zi;
      const Eigen::VectorXd vi = Zi.transpose() * yi;
      for (int c = 0; c < m; ++c) {
        b(cols[c]) += vi(c);
        for (int cc = 0; cc < m; ++cc) N(cols[c], cols[cc]) += Ui(c, cc);
      }
    }
  }
  EstimateResult res;
  try {
    NormalSolve s = solve_normal(N, b, "ols");
    res.theta = std::move(s.theta);
    res.paramCov = std::move(s.cov);
  } catch (const NumericalError&) {
    check_rank_or_throw(design, false, "ols");
    throw;
  }
  res.tag = EstimatorTag::OLS;
  return res;
}

EstimateResult fixed_effects(const PanelDesign& design, const Eigen::VectorXd& y) {
  design.validate();
  if (y.size() != design.rows()) throw ValidationError("fixed_effects: y length does not match design");
  const Eigen::MatrixXd Zd = within_projection(design.Z, design.studentOf);
  const Eigen::VectorXd yd = within_projection(y, design.studentOf);

  // A regressor constant within every student is absorbed by the student
  // effects and its coefficient is not identified.
  std::vector<Eigen::Index> invariant;
  for (Eigen::Index j = 0; j < design.k(); ++j) {
    const double ref = std::max(design.Z.col(j).norm(), 1.0);
    if (Zd.col(j).norm() <= 1e-10 * ref) invariant.push_back(j);
  }
  if (!invariant.empty())
    throw ValidationError("fixed_effects: time-invariant regressor(s) not identified; columns: " +
                          format_column_list(invariant));

  const Eigen::MatrixXd N = Zd.transpose() * Zd;
  const Eigen::VectorXd b = Zd.transpose() * yd;
  EstimateResult res;
  try {
    NormalSolve s = solve_normal(N, b, "fixed_effects");
    res.theta = std::move(s.theta);
    res.paramCov = std::move(s.cov);
  } catch (const NumericalError&) {
    check_rank_or_throw(design, true, "fixed_effects");
    throw;
  }
  res.tag = EstimatorTag::FE;
  return res;
}

GammaResult gamma(const ScalarVarianceComponents& vc, int T) {
  vc.validate();
  if (T < 1) throw ValidationError("gamma: T must be >= 1");
  GammaResult g;
  g.gamma = vc.rho() / (1.0 + vc.rho() * (T - 1));
  g.gammaT = g.gamma * T;
  return g;
}

EstimateResult re_quasi_demeaned(const PanelDesign& design, const Eigen::VectorXd& y,
                                 const ScalarVarianceComponents& vc) {
  design.validate();
  if (!design.balanced())
    throw ValidationError("re_quasi_demeaned: unbalanced panel; use gls_known_R with a mask instead");
  if (y.size() != design.rows()) throw ValidationError("re_quasi_demeaned: y length does not match design");

  const double gT = gamma(vc, design.T).gammaT;
  // I - gT H_D is not idempotent, so keep the middle factor explicit:
  // Z'(I - gT H_D)Z = Z'Z - gT (H_D Z)'Z and likewise for Y.
  const Eigen::MatrixXd M = design.Z - within_projection(design.Z, design.studentOf);  // H_D Z
  const Eigen::MatrixXd N = design.Z.transpose() * design.Z - gT * M.transpose() * design.Z;
  const Eigen::VectorXd b = design.Z.transpose() * y - gT * M.transpose() * y;
  NormalSolve s = solve_normal(0.5 * (N + N.transpose().eval()), b, "re_quasi_demeaned");
  EstimateResult res;
  res.theta = std::move(s.theta);
  res.paramCov = std::move(s.cov);
  res.tag = EstimatorTag::REQuasi;
  return res;
}

EstimateResult gls_known_R(const PanelDesign& design, const Eigen::VectorXd& y,
                           const BlockCovariance& cov, const ObservationMask* mask) {
  design.validate();
  if (y.size() != design.rows()) throw ValidationError("gls_known_R: y length does not match design");
  if (cov.T() != design.T) throw ValidationError("gls_known_R: covariance block size does not match design T");

  const StudentRows sr = grouped_rows(design);
  if (mask) {
    mask->validate();
    if (mask->n != design.n || mask->T != design.T)
      throw ValidationError("gls_known_R: mask dimensions do not match design");
    for (int i = 0; i < design.n; ++i)
      if (mask->observed_indices(i) != sr.times[i])
        throw ValidationError("gls_known_R: mask disagrees with design rows for student " + std::to_string(i));
  }

  const Eigen::Index k = design.k();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  BlockInverseProvider inv(cov);

  for (int i = 0; i < design.n; ++i) {
    const auto& rws = sr.rows[i];
    const int Ti = static_cast<int>(rws.size());
    const Eigen::MatrixXd& Rinv = inv.for_times(sr.times[i]);

    const std::vector<int> cols = active_columns(design.Z, rws);
    const int m = static_cast<int>(cols.size());
    if (m == 0) continue;
    Eigen::MatrixXd Zi(Ti, m);
    Eigen::VectorXd yi(Ti);
    for (int a = 0; a < Ti; ++a) {
      yi(a) = y(rws[a]);
      for (int c = 0; c < m; ++c) Zi(a, c) = design.Z(rws[a], cols[c]);
    }
    const Eigen::MatrixXd C = Rinv * Zi;
    const Eigen::MatrixXd Ui = Zi.transpose() * C;
    const Eigen::VectorXd vi = C.transpose() * yi;
    for (int c = 0; c < m; ++c) {
      b(cols[c]) += vi(c);
      for (int cc = 0; cc < m; ++cc) N(cols[c], cols[cc]) += Ui(c, cc);
    }
  }

  NormalSolve s = solve_normal(0.5 * (N + N.transpose().eval()), b, "gls_known_R");
  EstimateResult res;
  res.theta = std::move(s.theta);
  res.paramCov = std::move(s.cov);
  res.tag = EstimatorTag::GLSKnown;
  return res;
}

BlockCovariance block_covariance_from_dense(const Eigen::MatrixXd& R) {
  if (R.rows() != R.cols()) throw ValidationError("block_covariance_from_dense: R must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (R + R.transpose().eval()));
  if (es.info() != Eigen::Success) throw NumericalError("block_covariance_from_dense: eigendecomposition failed");
  if (es.eigenvalues()(0) < 2.0 * kPdEigenFloor)
    throw ValidationError("block_covariance_from_dense: R is not positive definite");
  const int T = static_cast<int>(R.rows());
  HeterogeneityModel h;
  h.d = T;
  h.A1 = es.eigenvectors() * (es.eigenvalues().array() / 2.0).sqrt().matrix().asDiagonal();
  h.S1 = Eigen::MatrixXd::Identity(T, T);
  h.Psi1 = 0.5 * (R + R.transpose().eval()) / 2.0;
  return assemble_block_covariance(h);
}

Eigen::MatrixXd estimate_R_mom(const PanelDesign& design, const Eigen::VectorXd& y,
                               int maxIter, double tol) {
  design.validate();
  if (!design.balanced()) throw ValidationError("estimate_R_mom: balanced panel required");
  if (design.n <= design.T)
    throw ValidationError("estimate_R_mom: need more students than measurements (n > T)");
  if (maxIter < 1) throw ValidationError("estimate_R_mom: maxIter must be >= 1");

  const StudentRows sr = grouped_rows(design);
  const int T = design.T;

  auto residual_cov = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd e = y - design.Z * theta;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(T, T);
    Eigen::VectorXd ei(T);
    for (int i = 0; i < design.n; ++i) {
      for (int a = 0; a < T; ++a) ei(a) = e(sr.rows[i][a]);
      R.noalias() += ei * ei.transpose();
    }
    return Eigen::MatrixXd(R / design.n);
  };

  auto make_pd = [&](Eigen::MatrixXd R) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R, Eigen::EigenvaluesOnly);
    double base = R.trace() / T;
    if (!(base > 0.0)) base = 1.0;
    double ridge = 1e-8 * base;
    // escalate until the assembly PD floor is cleared with margin; base can
    // be arbitrarily small when residuals are (near) zero
    const double target = std::max(4.0 * kPdEigenFloor, 1e-10 * base);
    for (int tries = 0; tries < 64 && es.eigenvalues()(0) < target; ++tries) {
      R += ridge * Eigen::MatrixXd::Identity(T, T);
      es.compute(R, Eigen::EigenvaluesOnly);
      ridge *= 10.0;
    }
    return R;
  };

  Eigen::MatrixXd Rhat = make_pd(residual_cov(ols(design, y).theta));
  for (int iter = 0; iter < maxIter; ++iter) {
    const EstimateResult fit = gls_known_R(design, y, block_covariance_from_dense(Rhat));
    const Eigen::MatrixXd Rnext = make_pd(residual_cov(fit.theta));
    const double delta = (Rnext - Rhat).cwiseAbs().maxCoeff();
    Rhat = Rnext;
    if (delta < tol) break;
  }
  return Rhat;
}

EstimateResult feasible_gls(const PanelDesign& design, const Eigen::VectorXd& y,
                            int maxIter, double tol) {
  const Eigen::MatrixXd Rhat = estimate_R_mom(design, y, maxIter, tol);
  EstimateResult res = gls_known_R(design, y, block_covariance_from_dense(Rhat));
  res.tag = EstimatorTag::GLSFeasible;
  res.rHat = Rhat;
  return res;
}

Eigen::VectorXd class_means(const Eigen::VectorXd& y, const std::vector<int>& studentOf,
                            const std::vector<int>& gradeOf, const std::vector<int>& subjectOf,
                            const Eigen::MatrixXi& classOf, int S) {
  const std::size_t rows = studentOf.size();
  if (gradeOf.size() != rows || subjectOf.size() != rows ||
      y.size() != static_cast<Eigen::Index>(rows))
    throw ValidationError("class_means: row label arrays must match y");
  const int G = static_cast<int>(classOf.cols());
  const int nClasses = classOf.maxCoeff() + 1;
  if (S < 1 || G < 1 || nClasses < 1) throw ValidationError("class_means: bad dimensions");

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nClasses) * G * S);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(sum.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const int g = gradeOf[r];
    const int s = subjectOf[r];
    const int c = classOf(studentOf[r], g);
    const Eigen::Index idx = (static_cast<Eigen::Index>(g) * nClasses + c) * S + s;
    sum(idx) += y(static_cast<Eigen::Index>(r));
    cnt(idx) += 1.0;
  }
  for (Eigen::Index i = 0; i < cnt.size(); ++i)
    if (cnt(i) == 0.0) throw ValidationError("class_means: empty class cell at column " + std::to_string(i));
  return sum.cwiseQuotient(cnt);
}

}  // namespace panelgls
