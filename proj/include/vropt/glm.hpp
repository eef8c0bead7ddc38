#pragma once

#include <Eigen/Dense>

#include <memory>

#include "vropt/dataset.hpp"

namespace vropt {

enum class LinkKind { logistic, squared };

/// Curvature bounds of phi'' and |phi'''| for a link, after the scaling that
/// puts sup phi'' at 1 for the squared loss and 1/4 for the logistic loss.
struct LinkInfo {
  double curvature_sup;   // sup phi''
  double curvature_inf;   // inf phi'' over the whole line
  double third_bound;     // sup |phi'''|
};
LinkInfo link_info(LinkKind link);

const char* link_name(LinkKind link);
LinkKind link_from_name(std::string_view name);

struct SmoothnessConstants {
  double l_smooth;   // largest eigenvalue of the mean Hessian (at theta = 0)
  double mu_lower;   // lower bound on strong convexity
};

/// Finite-sum GLM objective
///   F(theta) = (1/N) sum_i phi_i(x_i . theta) + (lambda/2) ||theta||^2
/// with phi folded over the label: logistic phi(z) = log(1 + exp(-y z)),
/// squared phi(z) = (z - y)^2 / 2. The regularizer is folded into every
/// per-sample f_i, so each per-sample Hessian carries + lambda I.
/// All oracles are pure; the objective is immutable and shareable.
class GlmObjective {
 public:
  GlmObjective(std::shared_ptr<const Dataset> data, LinkKind link, double lambda,
               std::int32_t dense_cap = 5000);

  std::int32_t dim() const { return data_->n_features(); }
  std::int64_t n_samples() const { return data_->n_samples(); }
  double lambda() const { return lambda_; }
  LinkKind link() const { return link_; }
  const Dataset& data() const { return *data_; }
  std::int32_t dense_cap() const { return dense_cap_; }

  double value(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd grad_sample(std::int64_t i, const Eigen::VectorXd& theta) const;
  void grad_sample_into(std::int64_t i, const Eigen::VectorXd& theta,
                        Eigen::VectorXd& out) const;
  Eigen::VectorXd grad_full(const Eigen::VectorXd& theta) const;

  /// H_i(theta_bar) v = phi''_i(x_i . theta_bar) (x_i . v) x_i + lambda v.
  Eigen::VectorXd hess_vec_sample(std::int64_t i, const Eigen::VectorXd& theta_bar,
                                  const Eigen::VectorXd& v) const;
  void hess_vec_sample_into(std::int64_t i, const Eigen::VectorXd& theta_bar,
                            const Eigen::VectorXd& v, Eigen::VectorXd& out) const;

  Eigen::VectorXd hess_diag_sample(std::int64_t i, const Eigen::VectorXd& theta_bar) const;

  /// Column c of the result is hess_vec_sample(i, theta_bar, S.col(c)).
  Eigen::MatrixXd hess_action_sample(std::int64_t i, const Eigen::VectorXd& theta_bar,
                                     const Eigen::MatrixXd& s) const;
  /// Exact mean of hess_action_sample over all samples; one datapass.
  Eigen::MatrixXd hess_action_full(const Eigen::VectorXd& theta_bar,
                                   const Eigen::MatrixXd& s) const;

  Eigen::MatrixXd hess_dense_sample(std::int64_t i, const Eigen::VectorXd& theta_bar) const;
  /// Mean Hessian as a dense d x d matrix; refuses when d exceeds the cap.
  Eigen::MatrixXd hess_dense_full(const Eigen::VectorXd& theta_bar) const;

  /// L from the mean Hessian at theta = 0 (dense eigendecomposition when
  /// d <= cap, else power iteration to 1e-8); mu_lower is lambda for the
  /// logistic link and lambda + lambda_min of the data term for the squared
  /// link on the dense path.
  SmoothnessConstants smoothness_constants() const;

  // scalar link derivatives at margin z for label y
  double phi(double z, double y) const;
  double dphi(double z, double y) const;
  double d2phi(double z, double y) const;

  double margin(std::int64_t i, const Eigen::VectorXd& theta) const;
  double row_dot(std::int64_t i, const Eigen::VectorXd& v) const;
  void add_scaled_row(std::int64_t i, double c, Eigen::VectorXd& out) const;

  /// phi'_i(x_i . theta), the scalar gradient coefficient of sample i.
  double grad_coef(std::int64_t i, const Eigen::VectorXd& theta) const;

 private:
  void check_dim(const Eigen::VectorXd& v) const;
  void check_index(std::int64_t i) const;

  std::shared_ptr<const Dataset> data_;
  LinkKind link_;
  double lambda_;
  std::vector<double> y_;  // labels, sign-mapped for the logistic link
  std::int32_t dense_cap_;
};

}  // namespace vropt
