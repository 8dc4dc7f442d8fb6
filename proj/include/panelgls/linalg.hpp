#pragma once

#include <cstdint>
#include <unordered_map>

#include "panelgls/types.hpp"

namespace panelgls {

// Eigenvalues below this are treated as non-PD in symmetric square roots.
inline constexpr double kPdEigenFloor = 1e-12;

// Relative singular-value tolerance for numerical rank decisions.
inline constexpr double kRankTol = 1e-8;

// Symmetric square root of a symmetric PD matrix via eigendecomposition.
// Throws ValidationError naming `label` if an eigenvalue falls below the floor.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M, const std::string& label);

// Symmetric inverse square root, same PD policy.
Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& M, const std::string& label);

// Builds R1 = A1 S1 A1' + Psi1 and its inverse through the Schur-complement
// factorization X = Psi1^{-1/2} A1 S1^{1/2}, X = U diag(sqrt(lambda)) V':
//   R1^{-1} = Psi1^{-1/2} (I - U diag(lambda/(1+lambda)) U') Psi1^{-1/2}
// R1 is never inverted densely.
BlockCovariance assemble_block_covariance(const HeterogeneityModel& h);

// Subtracts within-student means from each column: (I - H_D) * values.
Eigen::MatrixXd within_projection(const Eigen::MatrixXd& values, const std::vector<int>& studentOf);
Eigen::VectorXd within_projection(const Eigen::VectorXd& values, const std::vector<int>& studentOf);

// Principal submatrix of R1 on the observed measurement slots of one student,
// with its inverse recomputed from the subsetted loadings and residual
// covariance (not by subsetting R1inv).
struct SubsetCovariance {
  std::vector<int> indices;  // observed t slots, ascending
  Eigen::MatrixXd R;
  Eigen::MatrixXd Rinv;
};
SubsetCovariance subset_block(const BlockCovariance& cov, const std::vector<bool>& present);

// Row indices per student, sorted by measurement index; duplicate slots for a
// student are rejected.
struct StudentRows {
  std::vector<std::vector<int>> rows;
  std::vector<std::vector<int>> times;
};
StudentRows grouped_rows(const PanelDesign& design);

// Hands out R1^{-1} restricted to a student's observed slots, caching subset
// inverses by observation pattern (patterns repeat heavily under masking).
class BlockInverseProvider {
 public:
  explicit BlockInverseProvider(const BlockCovariance& cov) : cov_(cov) {}
  const Eigen::MatrixXd& for_times(const std::vector<int>& times);

 private:
  const BlockCovariance& cov_;
  std::unordered_map<std::uint64_t, SubsetCovariance> cache_;
  std::uint64_t fallbackKey_ = 0;
};

// Numerical-rank report for Z, or for [Z|D] when student indicators are
// included (computed as n + rank of the within-demeaned Z).
struct RankReport {
  Eigen::Index rank = 0;
  Eigen::Index cols = 0;  // columns of the analyzed matrix ([Z|D] adds n)
  bool fullRank = false;
  std::vector<Eigen::Index> dependentColumns;  // indices into Z
  Eigen::VectorXd singularValues;              // of Z resp. demeaned Z
};
RankReport validate_design(const PanelDesign& design, bool with_student_indicators);

std::string format_column_list(const std::vector<Eigen::Index>& cols);

}  // namespace panelgls
