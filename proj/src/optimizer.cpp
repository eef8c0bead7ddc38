#include "vropt/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace vropt {

namespace {

constexpr double kSuboptFloor = 1e-16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void project_into(const std::optional<BallProjection>& projection, Eigen::VectorXd& theta) {
  if (!projection) return;
  const Eigen::VectorXd offset = theta - projection->center;
  const double dist = offset.norm();
  if (dist > projection->radius)
    theta = projection->center + (projection->radius / dist) * offset;
}

struct StepWorkspace {
  Eigen::VectorXd delta, dir, tmp, tmp2;
  Eigen::VectorXd k_a, k_b;

  void resize(Eigen::Index d, Eigen::Index k) {
    delta.resize(d);
    dir.resize(d);
    tmp.resize(d);
    tmp2.resize(d);
    k_a.resize(k);
    k_b.resize(k);
  }
};

// dir += (mean operator - Hhat_i)(delta), the per-family tracking difference.
void add_correction_diff(const MethodPlan& plan, const GlmObjective& obj, const Snapshot& snap,
                         std::int64_t i, const Eigen::VectorXd& delta, StepWorkspace& ws,
                         Eigen::VectorXd& dir) {
  switch (plan.family) {
    case MethodFamily::svrg:
      return;
    case MethodFamily::svrg2: {
      const auto& h = std::get<Eigen::MatrixXd>(snap.model);
      dir.noalias() += h * delta;
      obj.hess_vec_sample_into(i, snap.theta_bar, delta, ws.tmp);
      dir -= ws.tmp;
      return;
    }
    case MethodFamily::diag: {
      const auto& m = std::get<DiagModel>(snap.model);
      dir.array() += m.per_mean.array() * delta.array();
      ws.tmp = obj.hess_diag_sample(i, snap.theta_bar);
      dir.array() -= ws.tmp.array() * delta.array();
      return;
    }
    case MethodFamily::diag_secant: {
      if (std::holds_alternative<DiagModel>(snap.model)) {  // epoch-0 fallback
        const auto& m = std::get<DiagModel>(snap.model);
        dir.array() += m.per_mean.array() * delta.array();
        ws.tmp = obj.hess_diag_sample(i, snap.theta_bar);
        dir.array() -= ws.tmp.array() * delta.array();
        return;
      }
      const auto& m = std::get<SecantDiagModel>(snap.model);
      dir.array() += m.per_mean.array() * delta.array();
      ws.tmp = secant_diag_sample(obj, i, snap.theta_bar, m);
      dir.array() -= ws.tmp.array() * delta.array();
      return;
    }
    case MethodFamily::curvature_match: {
      const auto& nb = std::get<NormalizedBasis>(snap.model);
      ws.k_a.noalias() = nb.a_bar.transpose() * delta;
      dir.noalias() += nb.a_bar * ws.k_a;  // mean: A_bar A_bar^T delta
      ws.tmp.noalias() = nb.s_bar * ws.k_a;
      obj.hess_vec_sample_into(i, snap.theta_bar, ws.tmp, ws.tmp2);
      ws.k_b.noalias() = nb.s_bar.transpose() * ws.tmp2;
      dir.noalias() -= nb.a_bar * ws.k_b;
      return;
    }
    case MethodFamily::action_match: {
      const auto& nb = std::get<NormalizedBasis>(snap.model);
      ws.k_a.noalias() = nb.a_bar.transpose() * delta;
      dir.noalias() += nb.a_bar * ws.k_a;  // mean
      ws.tmp.noalias() = nb.s_bar * ws.k_a;                    // S_bar A_bar^T delta
      obj.hess_vec_sample_into(i, snap.theta_bar, ws.tmp, ws.tmp2);
      dir -= ws.tmp2;                                          // - H_i S_bar A_bar^T delta
      ws.tmp = delta - ws.tmp;                                 // (I - S_bar A_bar^T) delta
      obj.hess_vec_sample_into(i, snap.theta_bar, ws.tmp, ws.tmp2);
      ws.k_b.noalias() = nb.s_bar.transpose() * ws.tmp2;
      dir.noalias() -= nb.a_bar * ws.k_b;
      return;
    }
  }
  throw std::logic_error("add_correction_diff: bad family");
}

// dir = g_i(theta_t) - z_i(theta_t) + mean(theta_t), allocation-free given a
// workspace. Equals g_bar + (dphi_t - dphi_bar) x_i + lambda delta + the
// tracking difference.
void inner_direction(const MethodPlan& plan, const GlmObjective& obj, const Snapshot& snap,
                     const Eigen::VectorXd& theta_t, std::int64_t i, StepWorkspace& ws,
                     Eigen::VectorXd& dir) {
  ws.delta = theta_t - snap.theta_bar;
  dir = snap.g_bar;
  obj.add_scaled_row(i, obj.grad_coef(i, theta_t) - obj.grad_coef(i, snap.theta_bar), dir);
  dir += obj.lambda() * ws.delta;
  add_correction_diff(plan, obj, snap, i, ws.delta, ws, dir);
}

void check_model_matches(const MethodPlan& plan, const Snapshot& snap) {
  const bool ok = [&] {
    switch (plan.family) {
      case MethodFamily::svrg: return std::holds_alternative<std::monostate>(snap.model);
      case MethodFamily::svrg2: return std::holds_alternative<Eigen::MatrixXd>(snap.model);
      case MethodFamily::diag: return std::holds_alternative<DiagModel>(snap.model);
      case MethodFamily::diag_secant:
        return std::holds_alternative<SecantDiagModel>(snap.model) ||
               std::holds_alternative<DiagModel>(snap.model);
      case MethodFamily::curvature_match:
      case MethodFamily::action_match:
        return std::holds_alternative<NormalizedBasis>(snap.model);
    }
    return false;
  }();
  if (!ok) throw std::logic_error("snapshot model does not match the plan family");
}

}  // namespace

MethodPlan plan_from_name(std::string_view name) {
  MethodPlan p;
  if (name == "svrg") {
    p.family = MethodFamily::svrg;
  } else if (name == "svrg2") {
    p.family = MethodFamily::svrg2;
  } else if (name == "2d") {
    p.family = MethodFamily::diag;
  } else if (name == "2dsec") {
    p.family = MethodFamily::diag_secant;
  } else if (name == "cmgauss") {
    p.family = MethodFamily::curvature_match;
    p.basis_source = BasisSource::gaussian;
  } else if (name == "cmprev") {
    p.family = MethodFamily::curvature_match;
    p.basis_source = BasisSource::prev_directions;
  } else if (name == "amgauss") {
    p.family = MethodFamily::action_match;
    p.basis_source = BasisSource::gaussian;
  } else if (name == "amprev") {
    p.family = MethodFamily::action_match;
    p.basis_source = BasisSource::prev_directions;
  } else {
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
  }
  return p;
}

std::string plan_name(const MethodPlan& plan) {
  switch (plan.family) {
    case MethodFamily::svrg: return "svrg";
    case MethodFamily::svrg2: return "svrg2";
    case MethodFamily::diag: return "2d";
    case MethodFamily::diag_secant: return "2dsec";
    case MethodFamily::curvature_match:
      return plan.basis_source == BasisSource::gaussian ? "cmgauss" : "cmprev";
    case MethodFamily::action_match:
      return plan.basis_source == BasisSource::gaussian ? "amgauss" : "amprev";
  }
  throw std::logic_error("plan_name: bad family");
}

double snapshot_datapass_charge(const MethodPlan& plan, bool first_epoch) {
  switch (plan.family) {
    case MethodFamily::svrg: return 1.0;
    case MethodFamily::svrg2: return 2.0;
    case MethodFamily::diag: return 2.0;
    case MethodFamily::diag_secant: return 2.0;  // the secant mean is one extra pass
    case MethodFamily::curvature_match:
    case MethodFamily::action_match: return 1.0 + static_cast<double>(plan.rank);
  }
  throw std::logic_error("snapshot_datapass_charge: bad family");
}

double inner_step_datapass_charge(const MethodPlan& plan) {
  switch (plan.family) {
    case MethodFamily::svrg: return 2.0;
    case MethodFamily::svrg2: return 3.0;
    case MethodFamily::diag: return 3.0;
    case MethodFamily::diag_secant: return 4.0;
    case MethodFamily::curvature_match: return 3.0;
    case MethodFamily::action_match: return 4.0;
  }
  throw std::logic_error("inner_step_datapass_charge: bad family");
}

Snapshot make_snapshot(const MethodPlan& plan, const GlmObjective& obj,
                       const Eigen::VectorXd& theta_bar, const SnapshotContext& ctx,
                       std::uint64_t basis_seed) {
  Snapshot snap;
  snap.theta_bar = theta_bar;
  snap.g_bar = obj.grad_full(theta_bar);
  snap.prev_theta_bar = ctx.prev_theta_bar;
  double charge = 1.0;  // the g_bar pass

  switch (plan.family) {
    case MethodFamily::svrg:
      snap.model = std::monostate{};
      break;
    case MethodFamily::svrg2:
      snap.model = obj.hess_dense_full(theta_bar);
      charge += 1.0;
      break;
    case MethodFamily::diag:
      snap.model = make_diag_model(obj, theta_bar);
      charge += 1.0;
      break;
    case MethodFamily::diag_secant:
      if (ctx.prev_theta_bar) {
        snap.model = make_secant_diag_model(obj, theta_bar, *ctx.prev_theta_bar, plan.sigma_sq);
      } else {
        snap.model = make_diag_model(obj, theta_bar);
        snap.fallback_note = "2dsec: no previous snapshot, using the plain Hessian diagonal";
      }
      charge += 1.0;
      break;
    case MethodFamily::curvature_match:
    case MethodFamily::action_match: {
      EmbeddingBasis basis;
      if (plan.basis_source == BasisSource::prev_directions && ctx.prev_basis) {
        basis = *ctx.prev_basis;
      } else {
        basis = gaussian_basis(obj.dim(), plan.rank, basis_seed);
        if (plan.basis_source == BasisSource::prev_directions)
          snap.fallback_note = "prev-direction basis unavailable, using a gaussian basis";
      }
      const Eigen::MatrixXd a = obj.hess_action_full(theta_bar, basis.s);
      snap.model = normalize_basis(a, basis.s);
      charge += static_cast<double>(plan.rank);
      break;
    }
  }
  snap.datapass_charge = charge;
  return snap;
}

Eigen::VectorXd control_variate(const MethodPlan& plan, const GlmObjective& obj,
                                const Snapshot& snap, std::int64_t i,
                                const Eigen::VectorXd& theta_t) {
  check_model_matches(plan, snap);
  Eigen::VectorXd z = obj.grad_sample(i, snap.theta_bar);
  const Eigen::VectorXd delta = theta_t - snap.theta_bar;
  switch (plan.family) {
    case MethodFamily::svrg:
      break;
    case MethodFamily::svrg2:
      z += obj.hess_vec_sample(i, snap.theta_bar, delta);
      break;
    case MethodFamily::diag:
      z.array() += obj.hess_diag_sample(i, snap.theta_bar).array() * delta.array();
      break;
    case MethodFamily::diag_secant:
      if (std::holds_alternative<DiagModel>(snap.model))
        z.array() += obj.hess_diag_sample(i, snap.theta_bar).array() * delta.array();
      else
        z.array() +=
            secant_diag_sample(obj, i, snap.theta_bar, std::get<SecantDiagModel>(snap.model))
                .array() *
            delta.array();
      break;
    case MethodFamily::curvature_match:
      z += cm_correct(obj, i, snap.theta_bar, std::get<NormalizedBasis>(snap.model), delta);
      break;
    case MethodFamily::action_match:
      z += am_correct(obj, i, snap.theta_bar, std::get<NormalizedBasis>(snap.model), delta);
      break;
  }
  return z;
}

Eigen::VectorXd control_variate_mean(const MethodPlan& plan, const GlmObjective& obj,
                                     const Snapshot& snap, const Eigen::VectorXd& theta_t) {
  check_model_matches(plan, snap);
  Eigen::VectorXd mean = snap.g_bar;
  const Eigen::VectorXd delta = theta_t - snap.theta_bar;
  switch (plan.family) {
    case MethodFamily::svrg:
      break;
    case MethodFamily::svrg2:
      mean.noalias() += std::get<Eigen::MatrixXd>(snap.model) * delta;
      break;
    case MethodFamily::diag:
      mean.array() += std::get<DiagModel>(snap.model).per_mean.array() * delta.array();
      break;
    case MethodFamily::diag_secant:
      if (std::holds_alternative<DiagModel>(snap.model))
        mean.array() += std::get<DiagModel>(snap.model).per_mean.array() * delta.array();
      else
        mean.array() += std::get<SecantDiagModel>(snap.model).per_mean.array() * delta.array();
      break;
    case MethodFamily::curvature_match:
    case MethodFamily::action_match:
      mean += cm_mean_correct(std::get<NormalizedBasis>(snap.model), delta);
      break;
  }
  return mean;
}

Eigen::VectorXd inner_step(const MethodPlan& plan, const GlmObjective& obj, const Snapshot& snap,
                           const Eigen::VectorXd& theta_t, std::int64_t i, double gamma,
                           const std::optional<BallProjection>& projection) {
  check_model_matches(plan, snap);
  StepWorkspace ws;
  const int k = std::holds_alternative<NormalizedBasis>(snap.model)
                    ? std::get<NormalizedBasis>(snap.model).rank()
                    : 1;
  ws.resize(obj.dim(), k);
  Eigen::VectorXd dir(obj.dim());
  inner_direction(plan, obj, snap, theta_t, i, ws, dir);
  Eigen::VectorXd next = theta_t - gamma * dir;
  project_into(projection, next);
  if (!std::isfinite(next.squaredNorm()))
    throw DivergenceError("inner_step: non-finite update", std::move(next));
  return next;
}

namespace {

// Streaming accumulator for the block means of the inner-loop directions,
// equivalent to prev_direction_basis on the full list but O(kd) memory.
class BlockMeanAccumulator {
 public:
  BlockMeanAccumulator(Eigen::Index d, std::int64_t total, int k) : k_(k), total_(total) {
    if (total_ >= k_ && k_ >= 1) {
      active_ = true;
      sums_ = Eigen::MatrixXd::Zero(d, k_);
      const std::int64_t base = total_ / k_, rem = total_ % k_;
      lens_.resize(k_);
      for (int j = 0; j < k_; ++j) lens_[j] = base + (j < rem ? 1 : 0);
    }
  }

  void add(const Eigen::VectorXd& direction) {
    if (!active_) return;
    sums_.col(block_) += direction;
    if (++in_block_ == lens_[block_]) {
      ++block_;
      in_block_ = 0;
    }
  }

  std::optional<EmbeddingBasis> finish() const {
    if (!active_) return std::nullopt;
    EmbeddingBasis b;
    b.s = sums_;
    for (int j = 0; j < k_; ++j) b.s.col(j) /= static_cast<double>(lens_[j]);
    b.source = BasisSource::prev_directions;
    if (!b.s.allFinite()) return std::nullopt;
    return b;
  }

 private:
  int k_ = 0;
  std::int64_t total_ = 0;
  bool active_ = false;
  Eigen::MatrixXd sums_;
  std::vector<std::int64_t> lens_;
  int block_ = 0;
  std::int64_t in_block_ = 0;
};

}  // namespace

RunOutcome run(const MethodPlan& plan, const GlmObjective& obj, const RunConfig& config) {
  if (config.gamma < 0.0) throw std::invalid_argument("run: gamma must be >= 0");
  if (config.epochs < 1) throw std::invalid_argument("run: need K >= 1 epochs");
  const std::int64_t t_steps = config.inner_steps > 0 ? config.inner_steps : obj.n_samples();
  const Eigen::Index d = obj.dim();

  Eigen::VectorXd theta =
      config.theta0.size() > 0 ? config.theta0 : Eigen::VectorXd::Zero(d);
  if (theta.size() != d) throw std::invalid_argument("run: theta0 has the wrong dimension");

  const double f_star = config.f_star ? *config.f_star : reference_solution(obj).f_star;
  const double f0 = obj.value(theta);
  const double denom = std::max(f0 - f_star, kSuboptFloor);
  const double diverged_above =
      f0 > 0.0 ? config.divergence_factor * f0 : config.divergence_factor;

  RunOutcome out;
  const auto t_start = std::chrono::steady_clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
        .count();
  };
  double passes = 0.0;
  out.trace.records.push_back(
      {0, 0.0, wall_ms(), f0, std::max((f0 - f_star) / denom, kSuboptFloor)});

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::int64_t> pick(0, obj.n_samples() - 1);
  const bool wants_prev_basis = (plan.family == MethodFamily::curvature_match ||
                                 plan.family == MethodFamily::action_match) &&
                                plan.basis_source == BasisSource::prev_directions;

  StepWorkspace ws;
  ws.resize(d, std::max(plan.rank, 1));
  Eigen::VectorXd dir(d);
  SnapshotContext ctx;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t basis_seed = splitmix64(config.seed ^ (0x5851f42d4c957f2dull *
                                                               static_cast<std::uint64_t>(epoch + 1)));
    Snapshot snap = make_snapshot(plan, obj, theta, ctx, basis_seed);
    passes += snap.datapass_charge;

    BlockMeanAccumulator dirs(wants_prev_basis ? d : 0, wants_prev_basis ? t_steps : 0,
                              wants_prev_basis ? plan.rank : 0);
    Eigen::VectorXd avg =
        config.snapshot_rule == SnapshotRule::epoch_average ? Eigen::VectorXd::Zero(d) : Eigen::VectorXd();

    Eigen::VectorXd theta_t = snap.theta_bar;
    bool exploded = false;
    for (std::int64_t t = 0; t < t_steps; ++t) {
      const std::int64_t i = pick(rng);
      inner_direction(plan, obj, snap, theta_t, i, ws, dir);
      if (wants_prev_basis) dirs.add(dir);
      if (config.snapshot_rule == SnapshotRule::epoch_average) avg += theta_t;
      theta_t -= config.gamma * dir;
      project_into(config.projection, theta_t);
      if (!std::isfinite(theta_t.squaredNorm())) {
        exploded = true;
        break;
      }
    }
    passes += static_cast<double>(t_steps) / static_cast<double>(obj.n_samples()) *
              inner_step_datapass_charge(plan);

    if (exploded) {
      out.diverged = true;
      out.diverged_epoch = epoch;
      out.note = "non-finite iterate during epoch " + std::to_string(epoch);
      out.final_theta = std::move(theta);
      return out;
    }

    ctx.prev_theta_bar = snap.theta_bar;
    ctx.prev_basis = wants_prev_basis ? dirs.finish() : std::nullopt;

    theta = config.snapshot_rule == SnapshotRule::epoch_average
                ? Eigen::VectorXd(avg / static_cast<double>(t_steps))
                : theta_t;

    const double f = obj.value(theta);
    out.trace.records.push_back(
        {epoch + 1, passes, wall_ms(), f, std::max((f - f_star) / denom, kSuboptFloor)});
    if (!std::isfinite(f) || f > diverged_above) {
      out.diverged = true;
      out.diverged_epoch = epoch;
      out.note = "objective exceeded the divergence threshold after epoch " +
                 std::to_string(epoch);
      out.final_theta = std::move(theta);
      return out;
    }
  }
  out.final_theta = std::move(theta);
  return out;
}

Reference reference_solution(const GlmObjective& obj, double tol, std::int64_t max_passes) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(obj.dim());
  double f = obj.value(theta);
  Eigen::VectorXd g = obj.grad_full(theta);
  std::int64_t passes = 2;
  double step = 1.0;
  // The sufficient-decrease test gets machine-epsilon slack: close to the
  // optimum the required decrease 1e-4 t ||g||^2 falls below an ulp of F and
  // the raw Armijo test can never be met in double precision.
  const double f_slack = 4.0 * std::numeric_limits<double>::epsilon();
  while (g.norm() > tol) {
    const double gsq = g.squaredNorm();
    double t = step;
    Eigen::VectorXd cand;
    double fc;
    while (true) {
      cand = theta - t * g;
      fc = obj.value(cand);
      ++passes;
      if (fc <= f - 1e-4 * t * gsq + f_slack * std::abs(f)) break;
      t *= 0.5;
      if (passes > max_passes || t < 1e-300)
        throw std::runtime_error("reference_solution: line search stalled");
    }
    theta = std::move(cand);
    f = fc;
    g = obj.grad_full(theta);
    ++passes;
    step = 2.0 * t;
    if (passes > max_passes)
      throw std::runtime_error("reference_solution: pass budget exceeded before reaching tol");
  }
  return {std::move(theta), f, g.norm(), passes};
}

ContractionReport epoch_contraction_check(const GlmObjective& obj, ContractionRegime regime,
                                          int seeds, std::uint64_t base_seed) {
  const DatasetStats stats = dataset_stats(obj.data(), obj.lambda());
  const SmoothnessConstants sc = obj.smoothness_constants();
  const double mu = sc.mu_lower;
  if (!(mu > 0.0))
    throw std::invalid_argument("epoch_contraction_check: objective is not strongly convex");

  ContractionReport rep;
  rep.regime = regime;
  MethodPlan plan;
  const double r2 = stats.radius_sq;
  switch (regime) {
    case ContractionRegime::svrg2_prop:
      plan.family = MethodFamily::svrg2;
      rep.gamma = 1.0 / (4.0 * sc.l_smooth);
      rep.inner_steps = static_cast<std::int64_t>(std::ceil(16.0 * sc.l_smooth / mu));
      break;
    case ContractionRegime::svrg_appendix:
      plan.family = MethodFamily::svrg;
      rep.gamma = 1.0 / (4.0 * r2);
      rep.inner_steps = static_cast<std::int64_t>(std::ceil(32.0 * r2 / mu));
      break;
    case ContractionRegime::stability:
      plan.family = MethodFamily::svrg2;
      rep.gamma = 1.0 / (8.0 * r2);  // alpha = 1 for the squared link
      rep.inner_steps = static_cast<std::int64_t>(std::ceil(64.0 * r2 / mu));
      break;
  }
  rep.assumptions_checked = obj.link() == LinkKind::squared;
  rep.note = rep.assumptions_checked
                 ? "squared link: alpha = 1, beta = 0, so the radius and eta conditions hold"
                 : "assumption unchecked: alpha for the logistic link depends on the iterate set";

  const Reference ref = reference_solution(obj);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(splitmix64(base_seed + static_cast<std::uint64_t>(s)));
    Eigen::VectorXd u(obj.dim());
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = gauss(rng);
    u.normalize();
    const Eigen::VectorXd theta0 = ref.theta_star + u;

    const double f0 = obj.value(theta0);
    const double denom = f0 - ref.f_star;
    if (denom <= kSuboptFloor * std::max(1.0, std::abs(ref.f_star))) {
      rep.ratios.push_back(0.0);
      continue;
    }
    RunConfig cfg;
    cfg.gamma = rep.gamma;
    cfg.inner_steps = rep.inner_steps;
    cfg.epochs = 1;
    cfg.seed = splitmix64(base_seed ^ (0xda3e39cb94b95bdbull + static_cast<std::uint64_t>(s)));
    cfg.snapshot_rule = SnapshotRule::epoch_average;
    cfg.projection = BallProjection{ref.theta_star, (theta0 - ref.theta_star).norm()};
    cfg.theta0 = theta0;
    cfg.f_star = ref.f_star;
    const RunOutcome out = run(plan, obj, cfg);
    const double f1 = obj.value(out.final_theta);
    rep.ratios.push_back((f1 - ref.f_star) / denom);
  }
  double mean = 0.0;
  for (double r : rep.ratios) mean += r;
  rep.mean_ratio = rep.ratios.empty() ? 0.0 : mean / static_cast<double>(rep.ratios.size());
  return rep;
}

}  // namespace vropt
