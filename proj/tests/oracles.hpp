#pragma once

// Test-only oracles, kept independent of the library code paths they check:
// finite differences for derivatives, SVD-based pseudoinverses for the
// low-rank model formulas, and explicit brute-force loops for means.

#include <Eigen/Dense>

#include <functional>
#include <random>

#include "vropt/glm.hpp"

namespace oracles {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
  return v;
}

// dense random dataset with a few structural zeros, labels +-1 or real
inline std::shared_ptr<const vropt::Dataset> random_dataset(std::mt19937_64& rng, std::int64_t n,
                                                            std::int32_t d,
                                                            bool classification) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> idx;
  std::vector<double> val;
  std::vector<double> labels;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int32_t j = 0; j < d; ++j) {
      if (unif(rng) < 0.2) continue;
      idx.push_back(j);
      val.push_back(gauss(rng));
    }
    row_ptr.push_back(static_cast<std::int64_t>(idx.size()));
    labels.push_back(classification ? (unif(rng) < 0.5 ? -1.0 : 1.0) : gauss(rng));
  }
  return std::make_shared<vropt::Dataset>(std::move(row_ptr), std::move(idx), std::move(val),
                                          std::move(labels), d);
}

// central finite difference of a scalar function
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double eps = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + eps;
    const double fp = f(xp);
    xp[j] = x[j] - eps;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// central finite difference of a vector field along direction v
inline Eigen::VectorXd fd_directional(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& x,
    const Eigen::VectorXd& v, double eps = 1e-6) {
  return (g(x + eps * v) - g(x - eps * v)) / (2.0 * eps);
}

inline Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& m, double rel_tol = 1e-12) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = sv.size() > 0 ? rel_tol * sv.maxCoeff() : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > cut) inv[j] = 1.0 / sv[j];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// the curvature-matching model written out literally:
// H S (S^T H S)^+ S^T H_i S (S^T H S)^+ S^T H
inline Eigen::MatrixXd dense_cm_model(const Eigen::MatrixXd& mean_h, const Eigen::MatrixXd& hi,
                                      const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd pinv = svd_pinv(s.transpose() * mean_h * s);
  const Eigen::MatrixXd hs = mean_h * s;
  return hs * pinv * (s.transpose() * hi * s) * pinv * hs.transpose();
}

// the action-matching model written out literally:
// H S M^+ S^T H_i (I - S M^+ S^T H) + H_i S M^+ S^T H, M = S^T H S
inline Eigen::MatrixXd dense_am_model(const Eigen::MatrixXd& mean_h, const Eigen::MatrixXd& hi,
                                      const Eigen::MatrixXd& s) {
  const Eigen::Index d = mean_h.rows();
  const Eigen::MatrixXd pinv = svd_pinv(s.transpose() * mean_h * s);
  const Eigen::MatrixXd left = mean_h * s * pinv * s.transpose();
  return left * hi * (Eigen::MatrixXd::Identity(d, d) - left.transpose()) +
         hi * left.transpose();
}

inline Eigen::MatrixXd materialize(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, Eigen::Index d) {
  Eigen::MatrixXd m(d, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    e[j] = 1.0;
    m.col(j) = op(e);
    e[j] = 0.0;
  }
  return m;
}

inline int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv.maxCoeff() <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > rel_tol * sv.maxCoeff()) ++r;
  return r;
}

}  // namespace oracles
