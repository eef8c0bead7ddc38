#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "vropt/glm.hpp"

namespace vropt {

struct PinvSqrtResult {
  Eigen::MatrixXd c;   // symmetric PSD, M^{+/2} on the retained spectrum
  int effective_rank;
};

/// Symmetrizes M, eigendecomposes, zeroes eigenvalues <= rel_tol * lambda_max
/// (or <= 0), and returns V diag(lambda^{-1/2}) V^T on the retained spectrum.
PinvSqrtResult pinv_sqrt(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

enum class BasisSource { gaussian, prev_directions };

struct EmbeddingBasis {
  Eigen::MatrixXd s;  // d x k
  BasisSource source = BasisSource::gaussian;
  int rank() const { return static_cast<int>(s.cols()); }
};

/// d x k matrix of i.i.d. standard normals from a seeded generator.
EmbeddingBasis gaussian_basis(std::int32_t d, int k, std::uint64_t seed);

/// Columns are means of k contiguous blocks of the given directions; when k
/// does not divide T the first T mod k blocks take one extra element.
EmbeddingBasis prev_direction_basis(const std::vector<Eigen::VectorXd>& directions, int k);

/// The normalization triple from the low-rank snapshot construction:
/// C = (S^T A)^{+/2}, S_bar = S C, A_bar = A C, with A the mean Hessian
/// action on S. A_bar^T S_bar is then an orthogonal projector onto the
/// retained subspace and A_bar A_bar^T = A (S^T A)^+ A^T.
struct NormalizedBasis {
  Eigen::MatrixXd c;      // k x k
  Eigen::MatrixXd s_bar;  // d x k
  Eigen::MatrixXd a_bar;  // d x k
  int effective_rank = 0;
  int rank() const { return static_cast<int>(s_bar.cols()); }
};

NormalizedBasis normalize_basis(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s,
                                double rel_tol = 1e-10);

/// Curvature-matching correction: Hhat_i v for the rank-k model
/// Hhat_i = A_bar S_bar^T H_i S_bar A_bar^T, applied right-to-left with a
/// single Hessian-vector product. Cost O(nnz + d k).
Eigen::VectorXd cm_correct(const GlmObjective& obj, std::int64_t i,
                           const Eigen::VectorXd& theta_bar, const NormalizedBasis& nb,
                           const Eigen::VectorXd& v);

/// Mean of cm_correct over all samples: A_bar (A_bar^T v).
Eigen::VectorXd cm_mean_correct(const NormalizedBasis& nb, const Eigen::VectorXd& v);

/// Action-matching correction: Hhat_i v for the rank-2k model
/// Hhat_i = A_bar S_bar^T H_i (I - S_bar A_bar^T) + H_i S_bar A_bar^T,
/// two Hessian-vector products per application.
Eigen::VectorXd am_correct(const GlmObjective& obj, std::int64_t i,
                           const Eigen::VectorXd& theta_bar, const NormalizedBasis& nb,
                           const Eigen::VectorXd& v);

/// Mean of am_correct over all samples; the same operator as cm_mean_correct.
Eigen::VectorXd am_mean_correct(const NormalizedBasis& nb, const Eigen::VectorXd& v);

struct DiagModel {
  Eigen::VectorXd per_mean;  // diagonal of the mean Hessian at theta_bar
};

struct SecantDiagModel {
  Eigen::VectorXd direction;   // theta_bar - prev snapshot, fixed at snapshot time
  Eigen::VectorXd prev_point;  // previous snapshot
  double sigma_sq = 0.1;
  Eigen::VectorXd per_mean;    // exact mean of the per-sample robust secant diagonals
};

/// Elementwise robust secant diagonal
///   [dir (.) delta_g + sigma^2 diag_h] / [dir (.) dir + sigma^2];
/// sigma^2 -> inf recovers diag_h, sigma^2 -> 0 the secant quotient.
Eigen::VectorXd robust_secant_diag(const Eigen::VectorXd& direction,
                                   const Eigen::VectorXd& delta_g,
                                   const Eigen::VectorXd& diag_h, double sigma_sq);

Eigen::VectorXd secant_diag_sample(const GlmObjective& obj, std::int64_t i,
                                   const Eigen::VectorXd& theta_bar,
                                   const SecantDiagModel& model);

/// Exact mean of hess_diag_sample over all samples; one datapass.
Eigen::VectorXd diag_mean(const GlmObjective& obj, const Eigen::VectorXd& theta_bar);

DiagModel make_diag_model(const GlmObjective& obj, const Eigen::VectorXd& theta_bar);
/// Builds the model and its exact mean in one datapass. Requires sigma_sq > 0.
SecantDiagModel make_secant_diag_model(const GlmObjective& obj,
                                       const Eigen::VectorXd& theta_bar,
                                       const Eigen::VectorXd& prev_point, double sigma_sq);

/// Smallest eta with (1/N) sum (H_i - Hhat_i)^2 <= R^2 eta (1/N) sum H_i in
/// the semidefinite order, computed as the largest generalized eigenvalue on
/// the range of the mean Hessian. Small-d diagnostic; errors when the mean
/// Hessian is numerically zero.
double measure_eta(const GlmObjective& obj, const Eigen::VectorXd& theta_bar,
                   const std::vector<Eigen::MatrixXd>& approximations);

}  // namespace vropt
