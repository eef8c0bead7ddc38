#include "vropt/glm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vropt {

namespace {

// sigmoid with clamped exponent, stable for |t| > 700
double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-std::min(t, 745.0)));
  }
  const double e = std::exp(std::max(t, -745.0));
  return e / (1.0 + e);
}

double log1p_exp(double t) {  // log(1 + exp(t))
  if (t > 0.0) return t + std::log1p(std::exp(-std::min(t, 745.0)));
  return std::log1p(std::exp(std::max(t, -745.0)));
}

}  // namespace

LinkInfo link_info(LinkKind link) {
  switch (link) {
    case LinkKind::logistic:
      return {0.25, 0.0, 1.0 / (6.0 * std::sqrt(3.0))};
    case LinkKind::squared:
      return {1.0, 1.0, 0.0};
  }
  throw std::logic_error("link_info: bad link");
}

const char* link_name(LinkKind link) {
  return link == LinkKind::logistic ? "logistic" : "squared";
}

LinkKind link_from_name(std::string_view name) {
  if (name == "logistic") return LinkKind::logistic;
  if (name == "squared") return LinkKind::squared;
  throw std::invalid_argument("unknown link '" + std::string(name) + "'");
}

GlmObjective::GlmObjective(std::shared_ptr<const Dataset> data, LinkKind link, double lambda,
                           std::int32_t dense_cap)
    : data_(std::move(data)), link_(link), lambda_(lambda), dense_cap_(dense_cap) {
  if (!data_) throw std::invalid_argument("GlmObjective: null dataset");
  if (lambda_ < 0.0) throw std::invalid_argument("GlmObjective: lambda must be >= 0");
  y_ = data_->labels();
  if (link_ == LinkKind::logistic) {
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (y_[i] == 0.0)
        throw std::invalid_argument("GlmObjective: zero label at sample " + std::to_string(i) +
                                    " cannot be sign-mapped for the logistic link");
      y_[i] = y_[i] > 0.0 ? 1.0 : -1.0;
    }
  }
}

void GlmObjective::check_dim(const Eigen::VectorXd& v) const {
  if (v.size() != dim())
    throw std::invalid_argument("GlmObjective: vector has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(dim()));
}

void GlmObjective::check_index(std::int64_t i) const {
  if (i < 0 || i >= n_samples())
    throw std::out_of_range("GlmObjective: sample index " + std::to_string(i) + " out of range");
}

double GlmObjective::phi(double z, double y) const {
  if (link_ == LinkKind::logistic) return log1p_exp(-y * z);
  const double r = z - y;
  return 0.5 * r * r;
}

double GlmObjective::dphi(double z, double y) const {
  if (link_ == LinkKind::logistic) return -y * sigmoid(-y * z);
  return z - y;
}

double GlmObjective::d2phi(double z, double y) const {
  if (link_ == LinkKind::logistic) {
    const double s = sigmoid(y * z);
    return s * (1.0 - s);
  }
  return 1.0;
}

double GlmObjective::margin(std::int64_t i, const Eigen::VectorXd& theta) const {
  const auto r = data_->row(i);
  double s = 0.0;
  for (std::size_t p = 0; p < r.nnz(); ++p) s += r.values[p] * theta[r.indices[p]];
  return s;
}

double GlmObjective::row_dot(std::int64_t i, const Eigen::VectorXd& v) const {
  return margin(i, v);
}

void GlmObjective::add_scaled_row(std::int64_t i, double c, Eigen::VectorXd& out) const {
  const auto r = data_->row(i);
  for (std::size_t p = 0; p < r.nnz(); ++p) out[r.indices[p]] += c * r.values[p];
}

double GlmObjective::grad_coef(std::int64_t i, const Eigen::VectorXd& theta) const {
  return dphi(margin(i, theta), y_[i]);
}

double GlmObjective::value(const Eigen::VectorXd& theta) const {
  check_dim(theta);
  double acc = 0.0;
  for (std::int64_t i = 0; i < n_samples(); ++i) acc += phi(margin(i, theta), y_[i]);
  return acc / static_cast<double>(n_samples()) + 0.5 * lambda_ * theta.squaredNorm();
}

void GlmObjective::grad_sample_into(std::int64_t i, const Eigen::VectorXd& theta,
                                    Eigen::VectorXd& out) const {
  out = lambda_ * theta;
  add_scaled_row(i, dphi(margin(i, theta), y_[i]), out);
}

Eigen::VectorXd GlmObjective::grad_sample(std::int64_t i, const Eigen::VectorXd& theta) const {
  check_index(i);
  check_dim(theta);
  Eigen::VectorXd out(dim());
  grad_sample_into(i, theta, out);
  return out;
}

Eigen::VectorXd GlmObjective::grad_full(const Eigen::VectorXd& theta) const {
  check_dim(theta);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
  const double inv_n = 1.0 / static_cast<double>(n_samples());
  for (std::int64_t i = 0; i < n_samples(); ++i)
    add_scaled_row(i, inv_n * dphi(margin(i, theta), y_[i]), acc);
  acc += lambda_ * theta;
  return acc;
}

void GlmObjective::hess_vec_sample_into(std::int64_t i, const Eigen::VectorXd& theta_bar,
                                        const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  const double w = d2phi(margin(i, theta_bar), y_[i]);
  out = lambda_ * v;
  add_scaled_row(i, w * row_dot(i, v), out);
}

Eigen::VectorXd GlmObjective::hess_vec_sample(std::int64_t i, const Eigen::VectorXd& theta_bar,
                                              const Eigen::VectorXd& v) const {
  check_index(i);
  check_dim(theta_bar);
  check_dim(v);
  Eigen::VectorXd out(dim());
  hess_vec_sample_into(i, theta_bar, v, out);
  return out;
}

Eigen::VectorXd GlmObjective::hess_diag_sample(std::int64_t i,
                                               const Eigen::VectorXd& theta_bar) const {
  check_index(i);
  check_dim(theta_bar);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(dim(), lambda_);
  const double w = d2phi(margin(i, theta_bar), y_[i]);
  const auto r = data_->row(i);
  for (std::size_t p = 0; p < r.nnz(); ++p)
    out[r.indices[p]] += w * r.values[p] * r.values[p];
  return out;
}

Eigen::MatrixXd GlmObjective::hess_action_sample(std::int64_t i, const Eigen::VectorXd& theta_bar,
                                                 const Eigen::MatrixXd& s) const {
  check_index(i);
  check_dim(theta_bar);
  if (s.rows() != dim()) throw std::invalid_argument("hess_action_sample: S has wrong row count");
  const double w = d2phi(margin(i, theta_bar), y_[i]);
  Eigen::MatrixXd out = lambda_ * s;
  const auto r = data_->row(i);
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    double dot = 0.0;
    for (std::size_t p = 0; p < r.nnz(); ++p) dot += r.values[p] * s(r.indices[p], c);
    const double coeff = w * dot;
    for (std::size_t p = 0; p < r.nnz(); ++p) out(r.indices[p], c) += coeff * r.values[p];
  }
  return out;
}

Eigen::MatrixXd GlmObjective::hess_action_full(const Eigen::VectorXd& theta_bar,
                                               const Eigen::MatrixXd& s) const {
  check_dim(theta_bar);
  if (s.rows() != dim()) throw std::invalid_argument("hess_action_full: S has wrong row count");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim(), s.cols());
  const double inv_n = 1.0 / static_cast<double>(n_samples());
  for (std::int64_t i = 0; i < n_samples(); ++i) {
    const double w = inv_n * d2phi(margin(i, theta_bar), y_[i]);
    const auto r = data_->row(i);
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      double dot = 0.0;
      for (std::size_t p = 0; p < r.nnz(); ++p) dot += r.values[p] * s(r.indices[p], c);
      const double coeff = w * dot;
      for (std::size_t p = 0; p < r.nnz(); ++p) acc(r.indices[p], c) += coeff * r.values[p];
    }
  }
  acc += lambda_ * s;
  return acc;
}

Eigen::MatrixXd GlmObjective::hess_dense_sample(std::int64_t i,
                                                const Eigen::VectorXd& theta_bar) const {
  check_index(i);
  check_dim(theta_bar);
  if (dim() > dense_cap_)
    throw std::runtime_error("hess_dense_sample: d exceeds the dense cap");
  Eigen::MatrixXd h = lambda_ * Eigen::MatrixXd::Identity(dim(), dim());
  const double w = d2phi(margin(i, theta_bar), y_[i]);
  const auto r = data_->row(i);
  for (std::size_t a = 0; a < r.nnz(); ++a)
    for (std::size_t b = 0; b < r.nnz(); ++b)
      h(r.indices[a], r.indices[b]) += w * r.values[a] * r.values[b];
  return h;
}

Eigen::MatrixXd GlmObjective::hess_dense_full(const Eigen::VectorXd& theta_bar) const {
  check_dim(theta_bar);
  if (dim() > dense_cap_)
    throw std::runtime_error("hess_dense_full: d = " + std::to_string(dim()) +
                             " exceeds the dense cap " + std::to_string(dense_cap_));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
  const double inv_n = 1.0 / static_cast<double>(n_samples());
  for (std::int64_t i = 0; i < n_samples(); ++i) {
    const double w = inv_n * d2phi(margin(i, theta_bar), y_[i]);
    const auto r = data_->row(i);
    for (std::size_t a = 0; a < r.nnz(); ++a)
      for (std::size_t b = 0; b < r.nnz(); ++b)
        h(r.indices[a], r.indices[b]) += w * r.values[a] * r.values[b];
  }
  h += lambda_ * Eigen::MatrixXd::Identity(dim(), dim());
  return h;
}

SmoothnessConstants GlmObjective::smoothness_constants() const {
  const Eigen::VectorXd at_zero = Eigen::VectorXd::Zero(dim());
  if (dim() <= dense_cap_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess_dense_full(at_zero));
    const double l = es.eigenvalues().maxCoeff();
    double mu = lambda_;
    if (link_ == LinkKind::squared) mu = es.eigenvalues().minCoeff();
    return {l, mu};
  }
  // power iteration on v -> mean Hessian-vector product at theta = 0
  std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim());
  for (std::int32_t j = 0; j < dim(); ++j) v[j] = gauss(rng);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd hv = hess_action_full(at_zero, v);
    const double next = v.dot(hv);
    const double nrm = hv.norm();
    if (nrm == 0.0) return {lambda_, lambda_};
    v = hv / nrm;
    if (std::abs(next - lam) <= 1e-8 * std::max(std::abs(next), 1.0)) return {next, lambda_};
    lam = next;
  }
  throw std::runtime_error("smoothness_constants: power iteration did not converge");
}

}  // namespace vropt
