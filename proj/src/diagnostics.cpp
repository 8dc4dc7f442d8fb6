#include "panelgls/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "panelgls/estimators.hpp"
#include "panelgls/rng.hpp"

namespace panelgls {

CompressionResult bias_compression_matrix(const BlockCovariance& cov) {
  const Eigen::VectorXd lamStar =
      cov.lambda.array().sqrt() / (1.0 + cov.lambda.array());
  CompressionResult res;
  res.matrix = cov.psiInvSqrt * cov.U * lamStar.asDiagonal() * cov.V.transpose() * cov.sInvSqrt;
  res.maxAbs = res.matrix.cwiseAbs().maxCoeff();
  return res;
}

CompressionResult bias_compression_matrix(const HeterogeneityModel& h) {
  return bias_compression_matrix(assemble_block_covariance(h));
}

TheoremProfile theorem_condition_profile(const std::function<HeterogeneityModel(int)>& family,
                                         const std::vector<int>& Tgrid) {
  TheoremProfile p;
  p.Tgrid = Tgrid;
  const int m = static_cast<int>(Tgrid.size());
  p.lambdaMin.resize(m);
  p.rowSumMax.resize(m);
  p.compressionMax.resize(m);
  for (int g = 0; g < m; ++g) {
    const HeterogeneityModel h = family(Tgrid[g]);
    const BlockCovariance cov = assemble_block_covariance(h);
    const Eigen::MatrixXd psiInv = cov.psiInvSqrt * cov.psiInvSqrt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.A1.transpose() * psiInv * h.A1,
                                                      Eigen::EigenvaluesOnly);
    p.lambdaMin(g) = es.eigenvalues()(0);
    p.rowSumMax(g) = cov.psiInvSqrt.cwiseAbs().rowwise().sum().maxCoeff();
    p.compressionMax(g) = bias_compression_matrix(cov).maxAbs;
  }
  return p;
}

DirichletCheck dirichlet_limit_check(const Eigen::VectorXd& omega, int T, double sigma2,
                                     std::uint64_t seed, int nMC) {
  const int d = static_cast<int>(omega.size());
  if (d < 1) throw ValidationError("dirichlet_limit_check: omega must be non-empty");
  for (int j = 0; j < d; ++j)
    if (omega(j) <= 0.0) throw ValidationError("dirichlet_limit_check: omega entries must be > 0");
  if (T < 1 || nMC < 1) throw ValidationError("dirichlet_limit_check: T and nMC must be >= 1");
  if (sigma2 <= 0.0) throw ValidationError("dirichlet_limit_check: sigma2 must be > 0");

  Rng root(seed);
  Eigen::VectorXd x(d);
  auto draw_dirichlet = [&](Rng& rng) {
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      x(j) = rng.gamma(omega(j));
      sum += x(j);
    }
    x /= sum;
  };

  DirichletCheck chk;
  Rng rowRng = root.substream(1);
  Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(d, d);
  for (int t = 0; t < T; ++t) {
    draw_dirichlet(rowRng);
    AtA.noalias() += x * x.transpose();
  }
  chk.sampleMoment = AtA / (sigma2 * T);

  Rng mcRng = root.substream(2);
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < nMC; ++s) {
    draw_dirichlet(mcRng);
    moment.noalias() += x * x.transpose();
  }
  chk.mcMoment = moment / (sigma2 * nMC);

  const double w0 = omega.sum();
  const double denom = w0 * w0 * (w0 + 1.0);
  const double c = (w0 * (w0 + 1.0) - 1.0) / denom;
  Eigen::MatrixXd stated = c * omega * omega.transpose();
  for (int j = 0; j < d; ++j) stated(j, j) += w0 * omega(j) / denom;
  chk.statedLimit = stated / sigma2;

  chk.devFromMc = (chk.sampleMoment - chk.mcMoment).cwiseAbs().maxCoeff();
  chk.devFromStated = (chk.sampleMoment - chk.statedLimit).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(chk.sampleMoment, Eigen::EigenvaluesOnly);
  chk.lambdaMinSample = es.eigenvalues()(0);
  return chk;
}

namespace {

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& N, const Eigen::VectorXd& v, const char* ctx) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (N + N.transpose().eval()));
  const Eigen::VectorXd D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 || D.minCoeff() <= 1e-12 * dmax)
    throw NumericalError(std::string(ctx) + ": singular normal matrix");
  return ldlt.solve(v);
}

}  // namespace

Eigen::VectorXd expected_gls_bias(const PanelDesign& design, const HeterogeneityModel& h,
                                  const SelectionSpec& sel) {
  design.validate();
  if (h.T() != design.T) throw ValidationError("expected_gls_bias: model T does not match design");
  if (sel.condMean.size() != static_cast<Eigen::Index>(design.n) * h.d)
    throw ValidationError("expected_gls_bias: condMean must have length n*d");

  const BlockCovariance cov = assemble_block_covariance(h);
  BlockInverseProvider inv(cov);
  const StudentRows sr = grouped_rows(design);

  const Eigen::Index k = design.k();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < design.n; ++i) {
    const auto& rws = sr.rows[i];
    const int Ti = static_cast<int>(rws.size());
    Eigen::MatrixXd Zi(Ti, k);
    Eigen::MatrixXd Ai(Ti, h.d);
    for (int a = 0; a < Ti; ++a) {
      Zi.row(a) = design.Z.row(rws[a]);
      Ai.row(a) = h.A1.row(design.timeOf[rws[a]]);
    }
    const Eigen::MatrixXd& Rinv = inv.for_times(sr.times[i]);
    const Eigen::MatrixXd ZtRinv = Zi.transpose() * Rinv;
    N.noalias() += ZtRinv * Zi;
    v.noalias() += ZtRinv * Ai * sel.condMean.segment(static_cast<Eigen::Index>(i) * h.d, h.d);
  }
  return solve_spd(N, v, "expected_gls_bias");
}

Eigen::VectorXd expected_gls_bias(const PanelDesign& design, const ScalarVarianceComponents& vc,
                                  const SelectionSpec& sel) {
  design.validate();
  if (!design.balanced())
    throw ValidationError("expected_gls_bias: scalar-components form assumes a balanced panel");
  if (sel.condMean.size() != design.n)
    throw ValidationError("expected_gls_bias: condMean must have length n");

  const double gT = gamma(vc, design.T).gammaT;
  const Eigen::MatrixXd M = design.Z - within_projection(design.Z, design.studentOf);  // H_D Z
  const Eigen::MatrixXd N = design.Z.transpose() * design.Z - gT * M.transpose() * design.Z;

  Eigen::VectorXd v = Eigen::VectorXd::Zero(design.k());
  const StudentRows sr = grouped_rows(design);
  for (int i = 0; i < design.n; ++i) {
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(design.k());
    for (int r : sr.rows[i]) colsum += design.Z.row(r).transpose();
    v += colsum * sel.condMean(i);
  }
  return (1.0 - gT) * solve_spd(N, v, "expected_gls_bias");
}

double rowsum_condition(const PanelDesign& design, const BlockCovariance& cov) {
  design.validate();
  if (cov.T() != design.T) throw ValidationError("rowsum_condition: covariance block size does not match design T");
  BlockInverseProvider inv(cov);
  const StudentRows sr = grouped_rows(design);

  const Eigen::Index k = design.k();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < design.n; ++i) {
    const auto& rws = sr.rows[i];
    const int Ti = static_cast<int>(rws.size());
    Eigen::MatrixXd Zi(Ti, k);
    for (int a = 0; a < Ti; ++a) Zi.row(a) = design.Z.row(rws[a]);
    N.noalias() += Zi.transpose() * inv.for_times(sr.times[i]) * Zi;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (N + N.transpose().eval()));
  const Eigen::VectorXd D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 || D.minCoeff() <= 1e-12 * dmax)
    throw NumericalError("rowsum_condition: singular normal matrix");

  // Row abs-sums of N^{-1} Z', accumulated student block by student block.
  Eigen::VectorXd rowsums = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < design.n; ++i) {
    for (int r : sr.rows[i])
      rowsums += ldlt.solve(design.Z.row(r).transpose()).cwiseAbs();
  }
  return rowsums.maxCoeff();
}

Lemma1Result lemma1_check(const Eigen::MatrixXd& B, const Eigen::MatrixXd& M, double tol) {
  if (B.rows() != B.cols() || M.rows() != M.cols() || B.rows() != M.rows())
    throw ValidationError("lemma1_check: B and M must be square of equal size");
  if (!M.isApprox(M.transpose(), 1e-10)) throw ValidationError("lemma1_check: M is not symmetric");
  const Eigen::MatrixXd Broot = sym_sqrt(B, "B");  // rejects non-PD B

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esB(B, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esM(0.5 * (M + M.transpose().eval()),
                                                     Eigen::EigenvaluesOnly);
  const Eigen::MatrixXd Q = Broot * M * Broot;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esQ(0.5 * (Q + Q.transpose().eval()),
                                                     Eigen::EigenvaluesOnly);
  Lemma1Result res;
  res.psiMin = esB.eigenvalues()(0);
  res.psiMax = esB.eigenvalues()(B.rows() - 1);
  res.lambdaMin = esM.eigenvalues()(0);
  res.omegaMin = esQ.eigenvalues()(0);
  const double scale = std::max({1.0, std::abs(res.lambdaMin), std::abs(res.omegaMin)});
  res.lowerHolds = res.omegaMin >= res.psiMin * res.lambdaMin - tol * scale;
  res.upperHolds = res.lambdaMin >= res.omegaMin / res.psiMax - tol * scale;
  return res;
}

}  // namespace panelgls
