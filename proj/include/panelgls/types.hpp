#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace panelgls {

// Bad inputs (dimensions, rank, invalid configs). CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures arising during computation (singular solves, non-PD factorizations).
// CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Stacked regression design for one experiment: n students, up to T scores
// each, k effect columns. Rows of Z are score records; studentOf/timeOf map
// each row to its student id (0-based) and measurement index t (0-based).
struct PanelDesign {
  int n = 0;
  int T = 0;
  Eigen::MatrixXd Z;
  std::vector<int> studentOf;
  std::vector<int> timeOf;

  Eigen::Index rows() const { return Z.rows(); }
  Eigen::Index k() const { return Z.cols(); }
  bool balanced() const { return rows() == static_cast<Eigen::Index>(n) * T; }

  void validate() const;
};

// Groups row indices by student; throws if a student id in 0..n-1 has no rows.
std::vector<std::vector<int>> rows_by_student(const std::vector<int>& studentOf, int n);

// Per-student factor heterogeneity: loadings A1 (T x d), factor covariance
// S1 (d x d), residual covariance Psi1 (T x T).
struct HeterogeneityModel {
  int d = 0;
  Eigen::MatrixXd A1;
  Eigen::MatrixXd S1;
  Eigen::MatrixXd Psi1;

  int T() const { return static_cast<int>(A1.rows()); }
  void validate() const;
};

// R1 = A1 S1 A1' + Psi1 together with its inverse and the factorization
// intermediates (X = Psi1^{-1/2} A1 S1^{1/2} and its SVD) that the
// diagnostics reuse.
struct BlockCovariance {
  Eigen::MatrixXd R1;
  Eigen::MatrixXd R1inv;
  HeterogeneityModel source;

  // X = psiInvSqrt * A1 * sSqrt, thin SVD X = U diag(sqrt(lambda)) V'.
  Eigen::MatrixXd psiInvSqrt;  // Psi1^{-1/2}, symmetric
  Eigen::MatrixXd sSqrt;       // S1^{1/2}, symmetric
  Eigen::MatrixXd sInvSqrt;    // S1^{-1/2}, symmetric
  Eigen::MatrixXd U;           // T x d, orthonormal columns
  Eigen::MatrixXd V;           // d x d, orthogonal
  Eigen::VectorXd lambda;      // eigenvalues of X'X, descending

  int T() const { return static_cast<int>(R1.rows()); }
  int d() const { return source.d; }
};

// Per-student presence indicator over the T measurement slots.
struct ObservationMask {
  int n = 0;
  int T = 0;
  std::vector<std::uint8_t> present;  // n*T, row-major by student

  bool at(int student, int t) const { return present[static_cast<std::size_t>(student) * T + t] != 0; }
  void set(int student, int t, bool value) {
    present[static_cast<std::size_t>(student) * T + t] = value ? 1 : 0;
  }
  static ObservationMask all_present(int n, int T) {
    ObservationMask m;
    m.n = n;
    m.T = T;
    m.present.assign(static_cast<std::size_t>(n) * T, 1);
    return m;
  }
  std::vector<int> observed_indices(int student) const {
    std::vector<int> idx;
    for (int t = 0; t < T; ++t)
      if (at(student, t)) idx.push_back(t);
    return idx;
  }
  void validate() const;
};

// Standard-model variance components: student effect variance nu2 and
// residual variance sigma2.
struct ScalarVarianceComponents {
  double nu2 = 0.0;
  double sigma2 = 1.0;

  double rho() const { return nu2 / (nu2 + sigma2); }
  void validate() const;
};

}  // namespace panelgls
