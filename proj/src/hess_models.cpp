#include "vropt/hess_models.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vropt {

PinvSqrtResult pinv_sqrt(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("pinv_sqrt: matrix must be square");
  if (!m.allFinite()) throw std::invalid_argument("pinv_sqrt: non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lam_max = ev.size() > 0 ? ev.maxCoeff() : 0.0;
  const double cut = rel_tol * std::max(lam_max, 0.0);
  Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(ev.size());
  int rank = 0;
  for (Eigen::Index j = 0; j < ev.size(); ++j) {
    if (ev[j] > cut && ev[j] > 0.0) {
      inv_sqrt[j] = 1.0 / std::sqrt(ev[j]);
      ++rank;
    }
  }
  PinvSqrtResult out;
  out.c = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  out.effective_rank = rank;
  return out;
}

EmbeddingBasis gaussian_basis(std::int32_t d, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("gaussian_basis: k must be >= 1");
  if (k > d) throw std::invalid_argument("gaussian_basis: k must be <= d");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  EmbeddingBasis b;
  b.s.resize(d, k);
  for (std::int32_t i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) b.s(i, j) = gauss(rng);
  b.source = BasisSource::gaussian;
  return b;
}

EmbeddingBasis prev_direction_basis(const std::vector<Eigen::VectorXd>& directions, int k) {
  const auto t = static_cast<std::int64_t>(directions.size());
  if (k < 1) throw std::invalid_argument("prev_direction_basis: k must be >= 1");
  if (t < k)
    throw std::invalid_argument(
        "prev_direction_basis: fewer directions than k; fall back to a gaussian basis");
  const auto d = directions.front().size();
  for (const auto& v : directions)
    if (v.size() != d || !v.allFinite())
      throw std::invalid_argument("prev_direction_basis: inconsistent or non-finite directions");

  EmbeddingBasis b;
  b.s.resize(d, k);
  const std::int64_t base = t / k, rem = t % k;
  std::int64_t pos = 0;
  for (int j = 0; j < k; ++j) {
    const std::int64_t len = base + (j < rem ? 1 : 0);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::int64_t p = 0; p < len; ++p) mean += directions[pos + p];
    b.s.col(j) = mean / static_cast<double>(len);
    pos += len;
  }
  b.source = BasisSource::prev_directions;
  return b;
}

NormalizedBasis normalize_basis(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s,
                                double rel_tol) {
  if (a.rows() != s.rows() || a.cols() != s.cols())
    throw std::invalid_argument("normalize_basis: A and S must have matching shapes");
  PinvSqrtResult p = pinv_sqrt(s.transpose() * a, rel_tol);
  NormalizedBasis nb;
  nb.c = std::move(p.c);
  nb.s_bar = s * nb.c;
  nb.a_bar = a * nb.c;
  nb.effective_rank = p.effective_rank;
  return nb;
}

Eigen::VectorXd cm_correct(const GlmObjective& obj, std::int64_t i,
                           const Eigen::VectorXd& theta_bar, const NormalizedBasis& nb,
                           const Eigen::VectorXd& v) {
  if (v.size() != nb.a_bar.rows()) throw std::invalid_argument("cm_correct: dimension mismatch");
  const Eigen::VectorXd w = nb.a_bar.transpose() * v;            // k
  const Eigen::VectorXd hv = obj.hess_vec_sample(i, theta_bar, nb.s_bar * w);
  return nb.a_bar * (nb.s_bar.transpose() * hv);
}

Eigen::VectorXd cm_mean_correct(const NormalizedBasis& nb, const Eigen::VectorXd& v) {
  if (v.size() != nb.a_bar.rows())
    throw std::invalid_argument("cm_mean_correct: dimension mismatch");
  return nb.a_bar * (nb.a_bar.transpose() * v);
}

Eigen::VectorXd am_correct(const GlmObjective& obj, std::int64_t i,
                           const Eigen::VectorXd& theta_bar, const NormalizedBasis& nb,
                           const Eigen::VectorXd& v) {
  if (v.size() != nb.a_bar.rows()) throw std::invalid_argument("am_correct: dimension mismatch");
  const Eigen::VectorXd w = nb.a_bar.transpose() * v;            // k
  const Eigen::VectorXd sw = nb.s_bar * w;                       // S_bar A_bar^T v
  const Eigen::VectorXd h_res = obj.hess_vec_sample(i, theta_bar, v - sw);
  const Eigen::VectorXd h_sw = obj.hess_vec_sample(i, theta_bar, sw);
  return nb.a_bar * (nb.s_bar.transpose() * h_res) + h_sw;
}

Eigen::VectorXd am_mean_correct(const NormalizedBasis& nb, const Eigen::VectorXd& v) {
  return cm_mean_correct(nb, v);
}

Eigen::VectorXd robust_secant_diag(const Eigen::VectorXd& direction,
                                   const Eigen::VectorXd& delta_g,
                                   const Eigen::VectorXd& diag_h, double sigma_sq) {
  if (sigma_sq <= 0.0) throw std::invalid_argument("robust_secant_diag: sigma^2 must be > 0");
  return (direction.array() * delta_g.array() + sigma_sq * diag_h.array()) /
         (direction.array().square() + sigma_sq);
}

Eigen::VectorXd secant_diag_sample(const GlmObjective& obj, std::int64_t i,
                                   const Eigen::VectorXd& theta_bar,
                                   const SecantDiagModel& model) {
  const Eigen::VectorXd delta_g =
      obj.grad_sample(i, theta_bar) - obj.grad_sample(i, model.prev_point);
  return robust_secant_diag(model.direction, delta_g, obj.hess_diag_sample(i, theta_bar),
                            model.sigma_sq);
}

Eigen::VectorXd diag_mean(const GlmObjective& obj, const Eigen::VectorXd& theta_bar) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(obj.dim());
  const double inv_n = 1.0 / static_cast<double>(obj.n_samples());
  for (std::int64_t i = 0; i < obj.n_samples(); ++i)
    acc += inv_n * obj.hess_diag_sample(i, theta_bar);
  return acc;
}

DiagModel make_diag_model(const GlmObjective& obj, const Eigen::VectorXd& theta_bar) {
  return {diag_mean(obj, theta_bar)};
}

SecantDiagModel make_secant_diag_model(const GlmObjective& obj, const Eigen::VectorXd& theta_bar,
                                       const Eigen::VectorXd& prev_point, double sigma_sq) {
  if (sigma_sq <= 0.0) throw std::invalid_argument("make_secant_diag_model: sigma^2 must be > 0");
  SecantDiagModel m;
  m.direction = theta_bar - prev_point;
  m.prev_point = prev_point;
  m.sigma_sq = sigma_sq;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(obj.dim());
  const double inv_n = 1.0 / static_cast<double>(obj.n_samples());
  for (std::int64_t i = 0; i < obj.n_samples(); ++i)
    acc += inv_n * secant_diag_sample(obj, i, theta_bar, m);
  m.per_mean = std::move(acc);
  return m;
}

double measure_eta(const GlmObjective& obj, const Eigen::VectorXd& theta_bar,
                   const std::vector<Eigen::MatrixXd>& approximations) {
  const auto n = obj.n_samples();
  if (static_cast<std::int64_t>(approximations.size()) != n)
    throw std::invalid_argument("measure_eta: need one approximation per sample");
  const auto d = obj.dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd err_sq = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd mean_h = Eigen::MatrixXd::Zero(d, d);
  for (std::int64_t i = 0; i < n; ++i) {
    const Eigen::MatrixXd hi = obj.hess_dense_sample(i, theta_bar);
    const Eigen::MatrixXd e = hi - approximations[i];
    err_sq += inv_n * e * e.transpose();
    mean_h += inv_n * hi;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean_h);
  const double lam_max = es.eigenvalues().maxCoeff();
  if (!(lam_max > 0.0) || lam_max < 1e-300)
    throw std::runtime_error("measure_eta: mean Hessian is numerically zero");
  const double cut = 1e-10 * lam_max;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
    if (es.eigenvalues()[j] > cut) kept.push_back(j);
  Eigen::MatrixXd basis(d, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c)
    basis.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(kept[c]) / std::sqrt(es.eigenvalues()[kept[c]]);
  // eta = lambda_max(B^T E B) / R^2 with B = V_r Lambda_r^{-1/2}
  const Eigen::MatrixXd reduced = basis.transpose() * err_sq * basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(0.5 * (reduced + reduced.transpose()));
  const double top = std::max(es2.eigenvalues().maxCoeff(), 0.0);
  const double r2 = dataset_stats(obj.data(), 0.0).radius_sq;
  if (r2 <= 0.0) throw std::runtime_error("measure_eta: zero data radius");
  return top / r2;
}

}  // namespace vropt
