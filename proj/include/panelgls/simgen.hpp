#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "panelgls/types.hpp"

namespace panelgls {

// Single factor weighted differently per measurement; dichotomous treatment
// whose log odds equal the student factor.
//   scenario 1: constant assignment, single effect
//   scenario 2: per-period assignment, single effect
//   scenario 3: constant assignment, per-period means and effects
//   scenario 4: per-period assignment, per-period means and effects
struct Example1Config {
  int scenario = 1;
  int T = 5;
  int n = 1000;
  std::uint64_t seed = 0;
  double aStart = 0.7;
  double aEnd = 0.9;
  std::vector<double> loadings;  // optional explicit a_t, overrides aStart/aEnd

  std::vector<double> loading_values() const;
  void validate() const;
};

// Two correlated factors with weights shifting from one to the other;
// treatment only in the final period.
//   scenario 1: log odds .4 d1 + .4 d2
//   scenario 2: log odds .4 d1
//   scenario 3: log odds .4 d2
struct Example2Config {
  int scenario = 1;
  int T = 10;
  int n = 1000;
  std::uint64_t seed = 0;
  double factorCorr = 0.5;
  double residVar = 0.2;
  double a1Start = 0.1, a1End = 0.9;
  double a2Start = 0.9, a2End = 0.1;

  void validate() const;
};

// Random linear growth with correlated intercepts/slopes, S subjects per
// grade, nonrandom class assignment on intercepts and slopes, and no true
// teacher effects.
struct TeacherSimConfig {
  int n = 1000;
  int classSize = 25;
  int G = 5;
  int S = 1;
  double alpha = 0.0;
  double sigmaDelta2 = 0.5;
  double sigmaLambda2 = 0.125;
  double r = 0.3;
  double nuDelta2 = 0.2;
  double nuLambda2 = 0.05;
  double sigmaEps2 = 0.8;
  double wIntercept = 0.3, wSlope = 0.3, wNoise = 0.4;
  std::uint64_t seed = 0;
  bool buildDesign = true;  // skip for score-only uses; Z then has no columns

  int classesPerGrade() const { return n / classSize; }
  // (sigma_d^2 + nu_d^2) + g^2 (sigma_l^2 + nu_l^2) + 2 g r sigma_d sigma_l + sigma_e^2
  double marginalVariance(int g) const;
  void validate() const;
};

// Output of a generator: deterministic function of (config, seed).
struct GeneratedDataset {
  Eigen::VectorXd y;
  PanelDesign design;
  Eigen::VectorXd trueTheta;  // all zero
  Eigen::MatrixXd delta;      // n x d latent factors
  HeterogeneityModel truth;   // implied (A1, S1, Psi1)

  Eigen::MatrixXi treatment;  // n x T indicators (examples 1 and 2)
  Eigen::MatrixXi classOf;    // n x G class assignments (example 3)
  Eigen::MatrixXd eta;        // n x G class-assignment index (example 3)
  std::vector<int> gradeOf;   // per row (example 3)
  std::vector<int> subjectOf; // per row (example 3)
  int G = 0;
  int S = 1;
};

GeneratedDataset gen_example1(const Example1Config& cfg);
GeneratedDataset gen_example2(const Example2Config& cfg);
GeneratedDataset gen_teacher_scores(const TeacherSimConfig& cfg);

// Teacher-by-subject effect columns with geometric persistence alpha: the
// column of the grade-g1 teacher of student i, subject s, carries weight
// alpha^(g2-g1) on (i, s, g2) for g2 >= g1 (0^0 = 1). Column order is
// (g * nClasses + c) * S + s. No intercept or grade-mean columns.
PanelDesign build_persistence_design(const Eigen::MatrixXi& classOf, double alpha, int G, int S);

struct TeacherColumn {
  int grade = 0;
  int classIdx = 0;
  int subject = 0;
};
std::vector<TeacherColumn> teacher_columns(int G, int S, int nClasses);

// Masks each score independently with the given probability; students losing
// every score are redrawn until at least one remains. Rows of y and the
// design are dropped in lockstep.
std::pair<GeneratedDataset, ObservationMask> apply_mar_mask(const GeneratedDataset& ds,
                                                            double rate, std::uint64_t seed);

// Long-format scores (student, t, subject, y) and coordinate-triplet design
// (row, column, value); indices 1-based for scores, 0-based for the design
// triplets, documented in the README.
void write_scores_csv(const GeneratedDataset& ds, const std::string& path);
void write_design_csv(const GeneratedDataset& ds, const std::string& path);

}  // namespace panelgls
