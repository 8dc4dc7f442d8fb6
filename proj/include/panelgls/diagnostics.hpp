#pragma once

#include <cstdint>
#include <functional>

#include "panelgls/linalg.hpp"
#include "panelgls/types.hpp"

namespace panelgls {

// Conditional means E(delta_i | Z_i), stacked student-major: length n*d.
struct SelectionSpec {
  Eigen::VectorXd condMean;
};

// R1^{-1} A1 and its largest absolute element, computed through the
// Schur-complement factorization
//   R^{-1}A = Psi^{-1/2} U diag(sqrt(l)/(1+l)) V' S^{-1/2}
// reusing the SVD already held by the block covariance.
struct CompressionResult {
  Eigen::MatrixXd matrix;  // T x d
  double maxAbs = 0.0;
};
CompressionResult bias_compression_matrix(const BlockCovariance& cov);
CompressionResult bias_compression_matrix(const HeterogeneityModel& h);

// Theorem-condition quantities over a grid of T values for a model family:
// smallest eigenvalue of A1' Psi1^{-1} A1, the largest absolute row sum of
// Psi1^{-1/2}, and the largest element of |R1^{-1} A1|.
struct TheoremProfile {
  std::vector<int> Tgrid;
  Eigen::VectorXd lambdaMin;
  Eigen::VectorXd rowSumMax;
  Eigen::VectorXd compressionMax;
};
TheoremProfile theorem_condition_profile(const std::function<HeterogeneityModel(int)>& family,
                                         const std::vector<int>& Tgrid);

// Samples T Dirichlet(omega) rows for A1 with Psi1 = sigma2 I and compares
// (1/T) A1' Psi1^{-1} A1 against a Monte Carlo estimate of (1/sigma2) E[xx']
// (the ground-truth oracle) and against the stated limit
// (1/sigma2)(Omega + c ww'). Both deviations are reported; the stated
// constants are not asserted anywhere.
struct DirichletCheck {
  Eigen::MatrixXd sampleMoment;
  Eigen::MatrixXd mcMoment;
  Eigen::MatrixXd statedLimit;
  double devFromMc = 0.0;
  double devFromStated = 0.0;
  double lambdaMinSample = 0.0;  // smallest eigenvalue of sampleMoment
};
DirichletCheck dirichlet_limit_check(const Eigen::VectorXd& omega, int T, double sigma2,
                                     std::uint64_t seed, int nMC);

// Predicted conditional bias of the GLS estimator:
//   (Z'R^{-1}Z)^{-1} Z'R^{-1} A E(delta|Z)
// and its standard-model reduction
//   (1 - gammaT) (Z'(I - gammaT H_D)Z)^{-1} Z'D E(delta|Z).
Eigen::VectorXd expected_gls_bias(const PanelDesign& design, const HeterogeneityModel& h,
                                  const SelectionSpec& sel);
Eigen::VectorXd expected_gls_bias(const PanelDesign& design, const ScalarVarianceComponents& vc,
                                  const SelectionSpec& sel);

// Largest absolute row sum of (Z'R^{-1}Z)^{-1} Z'.
double rowsum_condition(const PanelDesign& design, const BlockCovariance& cov);

// Checks both inequalities from the eigenvalue lemma: with lambda the
// smallest eigenvalue of M and omega the smallest eigenvalue of
// B^{1/2} M B^{1/2}, omega >= psiMin * lambda and lambda >= omega / psiMax.
struct Lemma1Result {
  double lambdaMin = 0.0;
  double omegaMin = 0.0;
  double psiMin = 0.0;
  double psiMax = 0.0;
  bool lowerHolds = false;  // omega >= psiMin * lambda
  bool upperHolds = false;  // lambda >= omega / psiMax
};
Lemma1Result lemma1_check(const Eigen::MatrixXd& B, const Eigen::MatrixXd& M, double tol = 1e-9);

}  // namespace panelgls
