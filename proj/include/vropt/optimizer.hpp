#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>

#include "vropt/glm.hpp"
#include "vropt/hess_models.hpp"
#include "vropt/trace.hpp"

namespace vropt {

enum class MethodFamily { svrg, svrg2, diag, diag_secant, curvature_match, action_match };

struct MethodPlan {
  MethodFamily family = MethodFamily::svrg;
  BasisSource basis_source = BasisSource::gaussian;  // CM/AM only
  int rank = 10;                                     // CM/AM only
  double sigma_sq = 0.1;                             // diag_secant only
};

/// One of: svrg, svrg2, 2d, 2dsec, cmgauss, cmprev, amgauss, amprev.
MethodPlan plan_from_name(std::string_view name);
std::string plan_name(const MethodPlan& plan);

enum class SnapshotRule { last_iterate, epoch_average };

struct BallProjection {
  Eigen::VectorXd center;
  double radius;
};

struct RunConfig {
  double gamma = 0.0;
  std::int64_t inner_steps = 0;  // T; 0 means T = N
  int epochs = 1;                // K
  std::uint64_t seed = 0;
  SnapshotRule snapshot_rule = SnapshotRule::last_iterate;
  std::optional<BallProjection> projection;  // off by default; theory checks enable it
  Eigen::VectorXd theta0;                    // empty -> zeros
  std::optional<double> f_star;              // computed via reference_solution when absent
  double divergence_factor = 1e3;
};

/// Per-epoch frozen state: the point, its full gradient, and the method's
/// Hessian model. Read-only after construction.
struct Snapshot {
  Eigen::VectorXd theta_bar;
  Eigen::VectorXd g_bar;
  std::variant<std::monostate,    // svrg
               Eigen::MatrixXd,   // svrg2: dense mean Hessian
               DiagModel, SecantDiagModel, NormalizedBasis>
      model;
  std::optional<Eigen::VectorXd> prev_theta_bar;
  double datapass_charge = 0.0;
  std::string fallback_note;  // non-empty when a documented fallback was taken
};

/// Carry-over from the previous epoch: the previous snapshot point (for the
/// secant model) and a basis built from the previous inner-loop directions
/// (for the prev-direction CM/AM variants).
struct SnapshotContext {
  std::optional<Eigen::VectorXd> prev_theta_bar;
  std::optional<EmbeddingBasis> prev_basis;
};

Snapshot make_snapshot(const MethodPlan& plan, const GlmObjective& obj,
                       const Eigen::VectorXd& theta_bar, const SnapshotContext& ctx = {},
                       std::uint64_t basis_seed = 0);

/// z_i(theta_t) = g_i(theta_bar) + Hhat_i (theta_t - theta_bar), with Hhat_i
/// chosen by the plan family (zero for svrg).
Eigen::VectorXd control_variate(const MethodPlan& plan, const GlmObjective& obj,
                                const Snapshot& snap, std::int64_t i,
                                const Eigen::VectorXd& theta_t);
/// (1/N) sum_j z_j(theta_t) = g_bar + (mean operator)(theta_t - theta_bar).
Eigen::VectorXd control_variate_mean(const MethodPlan& plan, const GlmObjective& obj,
                                     const Snapshot& snap, const Eigen::VectorXd& theta_t);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, Eigen::VectorXd iterate)
      : std::runtime_error(what), iterate(std::move(iterate)) {}
  Eigen::VectorXd iterate;
};

/// theta_{t+1} = Pi( theta_t - gamma [g_i(theta_t) - z_i + mean] ); throws
/// DivergenceError carrying the iterate when the update is non-finite.
Eigen::VectorXd inner_step(const MethodPlan& plan, const GlmObjective& obj, const Snapshot& snap,
                           const Eigen::VectorXd& theta_t, std::int64_t i, double gamma,
                           const std::optional<BallProjection>& projection = {});

struct RunOutcome {
  Trace trace;
  bool diverged = false;
  int diverged_epoch = -1;
  std::string note;
  Eigen::VectorXd final_theta;
};

/// K epochs of snapshot + T uniformly sampled inner steps; deterministic per
/// seed. Divergence is reported in the outcome together with the partial
/// trace.
RunOutcome run(const MethodPlan& plan, const GlmObjective& obj, const RunConfig& config);

struct Reference {
  Eigen::VectorXd theta_star;
  double f_star;
  double grad_norm;
  std::int64_t passes;
};

/// Full-batch gradient descent with halving backtracking (sufficient
/// decrease 1e-4) until ||grad|| <= tol; errors past max_passes.
Reference reference_solution(const GlmObjective& obj, double tol = 1e-10,
                             std::int64_t max_passes = 1000000);

enum class ContractionRegime { svrg2_prop, svrg_appendix, stability };

struct ContractionReport {
  ContractionRegime regime;
  double gamma;
  std::int64_t inner_steps;
  std::vector<double> ratios;  // per seed
  double mean_ratio;
  double bound = 0.75;
  bool assumptions_checked;
  std::string note;
};

/// Runs one projected epoch per seed with the epoch-average rule, stepsize
/// and T fixed by the regime's rate formulas, and reports the mean ratio
/// [F(theta_bar_1) - F*] / [F(theta_bar_0) - F*] against the 3/4 bound.
ContractionReport epoch_contraction_check(const GlmObjective& obj, ContractionRegime regime,
                                          int seeds, std::uint64_t base_seed = 0);

/// Datapass accounting in gradient-evaluation equivalents (see README).
double snapshot_datapass_charge(const MethodPlan& plan, bool first_epoch);
double inner_step_datapass_charge(const MethodPlan& plan);  // sample touches per step

}  // namespace vropt
