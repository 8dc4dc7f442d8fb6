#pragma once

#include <optional>

#include "panelgls/linalg.hpp"
#include "panelgls/types.hpp"

namespace panelgls {

enum class EstimatorTag { OLS, FE, REQuasi, GLSKnown, GLSFeasible, ClassMeans };
std::string to_string(EstimatorTag tag);

struct EstimateResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd paramCov;  // (Z'R^{-1}Z)^{-1} for GLS, the OLS/FE analogue otherwise
  EstimatorTag tag = EstimatorTag::OLS;
  std::optional<Eigen::MatrixXd> rHat;  // feasible GLS only
};

struct GammaResult {
  double gamma = 0.0;
  double gammaT = 0.0;
};

// theta = (Z'Z)^{-1} Z'Y. Rank deficiency raises ValidationError naming the
// dependent columns.
EstimateResult ols(const PanelDesign& design, const Eigen::VectorXd& y);

// Within estimator: OLS after removing per-student means from Z and Y.
// Time-invariant regressors (columns demeaned to zero) are not identified.
EstimateResult fixed_effects(const PanelDesign& design, const Eigen::VectorXd& y);

// gamma = rho / (1 + rho (T-1)); gammaT = gamma * T.
GammaResult gamma(const ScalarVarianceComponents& vc, int T);

// Quasi-demeaned random effects for the balanced standard model:
// theta = (Z'(I - gammaT H_D)Z)^{-1} Z'(I - gammaT H_D)Y.
EstimateResult re_quasi_demeaned(const PanelDesign& design, const Eigen::VectorXd& y,
                                 const ScalarVarianceComponents& vc);

// GLS with known block covariance, accumulated student by student; never
// materializes the nT x nT matrix R. Works on unbalanced designs (missing
// measurement slots) by Woodbury-subsetting R1 per student. The optional mask
// is cross-checked against the design's rows when supplied.
EstimateResult gls_known_R(const PanelDesign& design, const Eigen::VectorXd& y,
                           const BlockCovariance& cov,
                           const ObservationMask* mask = nullptr);

// Iterated residual method of moments for an unstructured T x T covariance:
// OLS fit, Rhat = (1/n) sum of per-student residual outer products, GLS refit
// with Rhat, repeat until the max-abs change in Rhat drops below tol.
Eigen::MatrixXd estimate_R_mom(const PanelDesign& design, const Eigen::VectorXd& y,
                               int maxIter = 50, double tol = 1e-8);

// estimate_R_mom composed with gls_known_R; rHat is populated in the result.
EstimateResult feasible_gls(const PanelDesign& design, const Eigen::VectorXd& y,
                            int maxIter = 50, double tol = 1e-8);

// Wraps an externally estimated dense PD covariance so it can drive
// gls_known_R / subset_block. Exact: R = A S A' + Psi with A = Q sqrt(L/2),
// S = I, Psi = R/2.
BlockCovariance block_covariance_from_dense(const Eigen::MatrixXd& R);

// Unadjusted per-class score means, one entry per (grade, class, subject)
// in column order (g * nClasses + c) * S + s — the same layout the teacher
// persistence design uses. classOf is n x G.
Eigen::VectorXd class_means(const Eigen::VectorXd& y, const std::vector<int>& studentOf,
                            const std::vector<int>& gradeOf, const std::vector<int>& subjectOf,
                            const Eigen::MatrixXi& classOf, int S);

}  // namespace panelgls
