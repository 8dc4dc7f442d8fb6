#pragma once

// Test-only utilities: random instances, dense oracles kept independent of
// the library's factorized code paths, and a small standard-model generator.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "panelgls/rng.hpp"
#include "panelgls/types.hpp"

namespace pgtest {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using panelgls::HeterogeneityModel;
using panelgls::PanelDesign;
using panelgls::Rng;

inline PanelDesign balanced_design(int n, int T, MatrixXd Z) {
  PanelDesign d;
  d.n = n;
  d.T = T;
  d.Z = std::move(Z);
  d.studentOf.resize(static_cast<std::size_t>(n) * T);
  d.timeOf.resize(static_cast<std::size_t>(n) * T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      d.studentOf[static_cast<std::size_t>(i) * T + t] = i;
      d.timeOf[static_cast<std::size_t>(i) * T + t] = t;
    }
  return d;
}

inline MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = rng.normal();
  return M;
}

inline MatrixXd random_spd(Rng& rng, int d, double ridge = 0.5) {
  const MatrixXd G = random_matrix(rng, d, d);
  return G * G.transpose() + ridge * MatrixXd::Identity(d, d);
}

inline HeterogeneityModel random_model(Rng& rng, int T, int d) {
  HeterogeneityModel h;
  h.d = d;
  h.A1 = random_matrix(rng, T, d);
  h.S1 = random_spd(rng, d);
  h.Psi1 = random_spd(rng, T);
  return h;
}

// Dense oracle: direct product-sum and dense inversion, no Woodbury.
inline MatrixXd dense_R(const HeterogeneityModel& h) {
  return h.A1 * h.S1 * h.A1.transpose() + h.Psi1;
}
inline MatrixXd dense_R_inverse(const HeterogeneityModel& h) { return dense_R(h).inverse(); }

// Standard unobserved-effects data Y = Z theta + D delta + eps with optional
// nonrandom treatment assignment.
enum class Selection {
  None,           // delta independent of Z
  SignConstant,   // treatment = 1{delta > 0}, constant over t (plus intercept)
  LogisticPeriod  // per-period Bernoulli(logistic(delta)) treatment, no intercept
};

struct StandardData {
  PanelDesign design;
  VectorXd y;
  VectorXd theta;
  VectorXd delta;
};

inline StandardData gen_standard(Rng& rng, int n, int T, double nu2, double sigma2,
                                 Selection sel, const VectorXd& theta) {
  const int k = static_cast<int>(theta.size());
  MatrixXd Z(static_cast<Eigen::Index>(n) * T, k);
  VectorXd y(static_cast<Eigen::Index>(n) * T);
  VectorXd delta(n);
  for (int i = 0; i < n; ++i) {
    delta(i) = std::sqrt(nu2) * rng.normal();
    for (int t = 0; t < T; ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * T + t;
      switch (sel) {
        case Selection::None:
          for (int j = 0; j < k; ++j) Z(r, j) = rng.normal();
          break;
        case Selection::SignConstant:
          Z(r, 0) = 1.0;
          Z(r, 1) = delta(i) > 0.0 ? 1.0 : 0.0;
          break;
        case Selection::LogisticPeriod:
          Z(r, 0) = rng.u01() < 1.0 / (1.0 + std::exp(-delta(i))) ? 1.0 : 0.0;
          break;
      }
      y(r) = Z.row(r).dot(theta) + delta(i) + std::sqrt(sigma2) * rng.normal();
    }
  }
  StandardData data;
  data.design = balanced_design(n, T, std::move(Z));
  data.y = std::move(y);
  data.theta = theta;
  data.delta = std::move(delta);
  return data;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
}

// Posterior mean E[delta | m treatments out of T] when the per-period log
// odds of treatment equal delta and delta ~ N(0,1): Simpson quadrature on
// [-10, 10], the Monte Carlo oracle for example-1 scenario 2 selection.
inline double posterior_mean_delta(int m, int T) {
  const int steps = 4000;
  const double lo = -10.0, hi = 10.0;
  const double hstep = (hi - lo) / steps;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + i * hstep;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double p = 1.0 / (1.0 + std::exp(-x));
    const double like = std::exp(-0.5 * x * x) * std::pow(p, m) * std::pow(1.0 - p, T - m);
    num += w * x * like;
    den += w * like;
  }
  return num / den;
}

}  // namespace pgtest
