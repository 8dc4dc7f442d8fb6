#include "panelgls/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <sstream>

namespace panelgls {

void PanelDesign::validate() const {
  if (n <= 0 || T <= 0) throw ValidationError("PanelDesign: n and T must be positive");
  if (studentOf.size() != static_cast<std::size_t>(Z.rows()) ||
      timeOf.size() != static_cast<std::size_t>(Z.rows()))
    throw ValidationError("PanelDesign: studentOf/timeOf must have one entry per row of Z");
  std::vector<int> count(n, 0);
  for (std::size_t r = 0; r < studentOf.size(); ++r) {
    const int i = studentOf[r];
    const int t = timeOf[r];
    if (i < 0 || i >= n) throw ValidationError("PanelDesign: student id out of range");
    if (t < 0 || t >= T) throw ValidationError("PanelDesign: measurement index out of range");
    ++count[i];
  }
  for (int i = 0; i < n; ++i) {
    if (count[i] == 0) throw ValidationError("PanelDesign: student " + std::to_string(i) + " has no rows");
    if (count[i] > T) throw ValidationError("PanelDesign: student " + std::to_string(i) + " has more than T rows");
  }
}

std::vector<std::vector<int>> rows_by_student(const std::vector<int>& studentOf, int n) {
  std::vector<std::vector<int>> groups(n);
  for (std::size_t r = 0; r < studentOf.size(); ++r) {
    const int i = studentOf[r];
    if (i < 0 || i >= n) throw ValidationError("studentOf: id out of range");
    groups[i].push_back(static_cast<int>(r));
  }
  for (int i = 0; i < n; ++i)
    if (groups[i].empty()) throw ValidationError("studentOf: student " + std::to_string(i) + " has no rows");
  return groups;
}

void HeterogeneityModel::validate() const {
  if (d <= 0) throw ValidationError("HeterogeneityModel: d must be positive");
  if (A1.cols() != d) throw ValidationError("HeterogeneityModel: A1 must have d columns");
  if (S1.rows() != d || S1.cols() != d) throw ValidationError("HeterogeneityModel: S1 must be d x d");
  if (Psi1.rows() != A1.rows() || Psi1.cols() != A1.rows())
    throw ValidationError("HeterogeneityModel: Psi1 must be T x T");
  // PD checks happen in sym_sqrt/sym_inv_sqrt; rank(A1) = d is checked here.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A1);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= kRankTol * sv(0))
    throw ValidationError("HeterogeneityModel: A1 is rank deficient (rank(A1) must equal d)");
}

void ObservationMask::validate() const {
  if (present.size() != static_cast<std::size_t>(n) * T)
    throw ValidationError("ObservationMask: size mismatch");
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int t = 0; t < T; ++t) any = any || at(i, t);
    if (!any) throw ValidationError("ObservationMask: student " + std::to_string(i) + " has no observed score");
  }
}

void ScalarVarianceComponents::validate() const {
  if (nu2 < 0.0) throw ValidationError("ScalarVarianceComponents: nu2 must be >= 0");
  if (sigma2 <= 0.0) throw ValidationError("ScalarVarianceComponents: sigma2 must be > 0");
}

namespace {

// Eigendecomposition with the PD floor; returns pair (vectors, values).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> pd_eigen(const Eigen::MatrixXd& M, const std::string& label) {
  if (M.rows() != M.cols()) throw ValidationError(label + " is not square");
  if (!M.isApprox(M.transpose(), 1e-10)) throw ValidationError(label + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of " + label + " failed");
  const Eigen::VectorXd vals = es.eigenvalues();
  if (vals(0) < kPdEigenFloor)
    throw ValidationError(label + " is not positive definite (min eigenvalue " + std::to_string(vals(0)) + ")");
  return {es.eigenvectors(), vals};
}

}  // namespace

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M, const std::string& label) {
  auto [vecs, vals] = pd_eigen(M, label);
  return vecs * vals.array().sqrt().matrix().asDiagonal() * vecs.transpose();
}

Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& M, const std::string& label) {
  auto [vecs, vals] = pd_eigen(M, label);
  return vecs * vals.array().rsqrt().matrix().asDiagonal() * vecs.transpose();
}

BlockCovariance assemble_block_covariance(const HeterogeneityModel& h) {
  h.validate();
  BlockCovariance cov;
  cov.source = h;
  cov.R1 = h.A1 * h.S1 * h.A1.transpose() + h.Psi1;

  cov.psiInvSqrt = sym_inv_sqrt(h.Psi1, "Psi1");
  cov.sSqrt = sym_sqrt(h.S1, "S1");
  cov.sInvSqrt = sym_inv_sqrt(h.S1, "S1");

  const Eigen::MatrixXd X = cov.psiInvSqrt * h.A1 * cov.sSqrt;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  cov.U = svd.matrixU();
  cov.V = svd.matrixV();
  cov.lambda = svd.singularValues().array().square();

  // R1^{-1} = Psi^{-1/2} (I - U diag(lambda/(1+lambda)) U') Psi^{-1/2}
  const Eigen::VectorXd shrink = cov.lambda.array() / (1.0 + cov.lambda.array());
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(h.T(), h.T());
  inner.noalias() -= cov.U * shrink.asDiagonal() * cov.U.transpose();
  cov.R1inv = cov.psiInvSqrt * inner * cov.psiInvSqrt;
  return cov;
}

Eigen::MatrixXd within_projection(const Eigen::MatrixXd& values, const std::vector<int>& studentOf) {
  if (values.rows() != static_cast<Eigen::Index>(studentOf.size()))
    throw ValidationError("within_projection: row count does not match studentOf");
  int n = 0;
  for (int i : studentOf) n = std::max(n, i + 1);
  if (n == 0) throw ValidationError("within_projection: empty input");

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, values.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    sums.row(studentOf[r]) += values.row(r);
    counts(studentOf[r]) += 1.0;
  }
  for (int i = 0; i < n; ++i)
    if (counts(i) == 0.0) throw ValidationError("within_projection: student " + std::to_string(i) + " has no rows");

  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    out.row(r) = values.row(r) - sums.row(studentOf[r]) / counts(studentOf[r]);
  return out;
}

Eigen::VectorXd within_projection(const Eigen::VectorXd& values, const std::vector<int>& studentOf) {
  return within_projection(Eigen::MatrixXd(values), studentOf).col(0);
}

SubsetCovariance subset_block(const BlockCovariance& cov, const std::vector<bool>& present) {
  const int T = cov.T();
  if (present.size() != static_cast<std::size_t>(T))
    throw ValidationError("subset_block: mask length must equal T");
  SubsetCovariance sub;
  for (int t = 0; t < T; ++t)
    if (present[t]) sub.indices.push_back(t);
  const int m = static_cast<int>(sub.indices.size());
  if (m == 0) throw ValidationError("subset_block: student has no observed score");
  if (m == T) {
    sub.R = cov.R1;
    sub.Rinv = cov.R1inv;
    return sub;
  }

  const HeterogeneityModel& h = cov.source;
  HeterogeneityModel hs;
  hs.d = h.d;
  hs.A1.resize(m, h.d);
  hs.Psi1.resize(m, m);
  hs.S1 = h.S1;
  for (int a = 0; a < m; ++a) {
    hs.A1.row(a) = h.A1.row(sub.indices[a]);
    for (int b = 0; b < m; ++b) hs.Psi1(a, b) = h.Psi1(sub.indices[a], sub.indices[b]);
  }

  // Subsetted A1 may lose full column rank (fewer rows than d, or a
  // degenerate pattern); fall back to folding the factor part into Psi.
  sub.R = hs.A1 * hs.S1 * hs.A1.transpose() + hs.Psi1;
  bool fullRank = m >= h.d;
  if (fullRank) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hs.A1);
    const Eigen::VectorXd sv = svd.singularValues();
    fullRank = sv(sv.size() - 1) > kRankTol * sv(0);
  }
  if (fullRank) {
    sub.Rinv = assemble_block_covariance(hs).R1inv;
  } else {
    const Eigen::MatrixXd psiInvSqrt = sym_inv_sqrt(hs.Psi1, "Psi1 (subset)");
    const Eigen::MatrixXd X = psiInvSqrt * hs.A1 * sym_sqrt(hs.S1, "S1");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
    const Eigen::VectorXd lambda = svd.singularValues().array().square();
    const Eigen::VectorXd shrink = lambda.array() / (1.0 + lambda.array());
    Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(m, m);
    inner.noalias() -= svd.matrixU() * shrink.asDiagonal() * svd.matrixU().transpose();
    sub.Rinv = psiInvSqrt * inner * psiInvSqrt;
  }
  return sub;
}

StudentRows grouped_rows(const PanelDesign& design) {
  StudentRows sr;
  sr.rows = rows_by_student(design.studentOf, design.n);
  sr.times.resize(design.n);
  for (int i = 0; i < design.n; ++i) {
    auto& rws = sr.rows[i];
    std::sort(rws.begin(), rws.end(),
              [&](int a, int b) { return design.timeOf[a] < design.timeOf[b]; });
    for (std::size_t a = 1; a < rws.size(); ++a)
      if (design.timeOf[rws[a]] == design.timeOf[rws[a - 1]])
        throw ValidationError("design: duplicate measurement slot for student " + std::to_string(i));
    for (int r : rws) sr.times[i].push_back(design.timeOf[r]);
  }
  return sr;
}

const Eigen::MatrixXd& BlockInverseProvider::for_times(const std::vector<int>& times) {
  const int T = cov_.T();
  if (static_cast<int>(times.size()) == T) return cov_.R1inv;
  std::uint64_t key;
  if (T <= 64) {
    key = 0;
    for (int t : times) key |= (std::uint64_t{1} << t);
  } else {
    key = fallbackKey_++;  // no pattern sharing beyond 64 slots
  }
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    std::vector<bool> present(T, false);
    for (int t : times) present[t] = true;
    it = cache_.emplace(key, subset_block(cov_, present)).first;
  }
  return it->second.Rinv;
}

RankReport validate_design(const PanelDesign& design, bool with_student_indicators) {
  design.validate();
  Eigen::MatrixXd M = with_student_indicators ? within_projection(design.Z, design.studentOf) : design.Z;

  RankReport report;
  report.cols = design.k() + (with_student_indicators ? design.n : 0);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  report.singularValues = svd.singularValues();
  const double smax = report.singularValues.size() ? report.singularValues(0) : 0.0;
  Eigen::Index rankZ = 0;
  for (Eigen::Index i = 0; i < report.singularValues.size(); ++i)
    if (report.singularValues(i) > kRankTol * smax) ++rankZ;
  // D always has full column rank n (every student has a row), and demeaning
  // Z removes exactly its projection onto D, so rank([Z|D]) = n + rank((I-H_D)Z).
  report.rank = rankZ + (with_student_indicators ? design.n : 0);
  report.fullRank = report.rank == report.cols;

  if (rankZ < design.k()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    qr.setThreshold(kRankTol);
    const Eigen::Index r = qr.rank();
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = r; j < design.k(); ++j) report.dependentColumns.push_back(perm(j));
    std::sort(report.dependentColumns.begin(), report.dependentColumns.end());
  }
  return report;
}

std::string format_column_list(const std::vector<Eigen::Index>& cols) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) os << ", ";
    os << cols[i];
  }
  return os.str();
}

}  // namespace panelgls
