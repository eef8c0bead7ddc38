#include "vropt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

namespace vropt::bench {

namespace {

// Small dense random instance; rows are dense with occasional zeros so the
// sparse storage path is still exercised.
std::shared_ptr<const Dataset> random_instance(std::mt19937_64& rng, std::int64_t n,
                                               std::int32_t d, bool classification) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> idx;
  std::vector<double> val;
  std::vector<double> labels;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int32_t j = 0; j < d; ++j) {
      if (unif(rng) < 0.15) continue;
      idx.push_back(j);
      val.push_back(gauss(rng));
    }
    row_ptr.push_back(static_cast<std::int64_t>(idx.size()));
    labels.push_back(classification ? (unif(rng) < 0.5 ? -1.0 : 1.0) : gauss(rng));
  }
  return std::make_shared<Dataset>(std::move(row_ptr), std::move(idx), std::move(val),
                                   std::move(labels), d);
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
  return v;
}

// Moore-Penrose pseudoinverse through the SVD; deliberately a different code
// path from pinv_sqrt so the model identities are checked independently.
Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& m, double rel_tol = 1e-12) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = sv.size() > 0 ? rel_tol * sv.maxCoeff() : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > cut) inv[j] = 1.0 / sv[j];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv.maxCoeff() <= 0.0) return 0;
  const double cut = rel_tol * sv.maxCoeff();
  int r = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > cut) ++r;
  return r;
}

Eigen::MatrixXd materialize(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                            Eigen::Index d) {
  Eigen::MatrixXd m(d, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    e[j] = 1.0;
    m.col(j) = op(e);
    e[j] = 0.0;
  }
  return m;
}

std::vector<MethodPlan> all_family_plans(int rank) {
  std::vector<MethodPlan> plans;
  for (const char* name : {"svrg", "svrg2", "2d", "2dsec", "cmgauss", "amgauss"}) {
    MethodPlan p = plan_from_name(name);
    p.rank = rank;
    plans.push_back(p);
  }
  return plans;
}

}  // namespace

CheckResult check_unbiasedness(int instances, std::uint64_t seed, bool corrupt_mean) {
  std::mt19937_64 rng(seed ^ 0xabcdef12345ull);
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    const std::int64_t n = 5 + static_cast<std::int64_t>(rng() % 46);  // <= 50
    const std::int32_t d = 3 + static_cast<std::int32_t>(rng() % 8);   // <= 10
    const LinkKind link = (inst % 2 == 0) ? LinkKind::logistic : LinkKind::squared;
    GlmObjective obj(random_instance(rng, n, d, link == LinkKind::logistic), link, 0.05);

    const Eigen::VectorXd theta_bar = random_vector(rng, d);
    const Eigen::VectorXd theta_prev = random_vector(rng, d);
    const Eigen::VectorXd theta_t = theta_bar + 0.5 * random_vector(rng, d);
    SnapshotContext ctx;
    ctx.prev_theta_bar = theta_prev;

    const Eigen::VectorXd g_full = obj.grad_full(theta_t);
    for (const MethodPlan& plan : all_family_plans(std::min(3, d))) {
      const Snapshot snap = make_snapshot(plan, obj, theta_bar, ctx, rng());
      Eigen::VectorXd mean_op = control_variate_mean(plan, obj, snap, theta_t);
      if (corrupt_mean) mean_op[0] += 1e-3;
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (std::int64_t i = 0; i < n; ++i) {
        acc += obj.grad_sample(i, theta_t) - control_variate(plan, obj, snap, i, theta_t);
      }
      acc /= static_cast<double>(n);
      acc += mean_op;
      const double rel = (acc - g_full).norm() / std::max(g_full.norm(), 1e-30);
      worst = std::max(worst, rel);
    }
  }
  return {"unbiasedness (all families, brute-force mean)", worst, 1e-10, worst <= 1e-10,
          std::to_string(instances) + " instances"};
}

CheckResult check_quadratic_exactness(int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x51ca7e11ull);
  auto data = std::make_shared<Dataset>(synth_problem(SynthKind::ridge, 40, 6, 20.0, seed + 7));
  GlmObjective obj(data, LinkKind::squared, 0.1);
  const SmoothnessConstants sc = obj.smoothness_constants();
  const double gamma = 1.0 / sc.l_smooth;

  MethodPlan plan = plan_from_name("svrg2");
  Eigen::VectorXd theta = random_vector(rng, obj.dim());
  Snapshot snap = make_snapshot(plan, obj, theta);
  std::uniform_int_distribution<std::int64_t> pick(0, obj.n_samples() - 1);
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd batch_next = theta - gamma * obj.grad_full(theta);
    const Eigen::VectorXd svrg2_next = inner_step(plan, obj, snap, theta, pick(rng), gamma);
    worst = std::max(worst, (batch_next - svrg2_next).lpNorm<Eigen::Infinity>());
    theta = svrg2_next;
  }
  return {"quadratic exactness (svrg2 = batch step on ridge)", worst, 1e-12, worst <= 1e-12,
          std::to_string(steps) + " steps"};
}

CheckResult check_matrix_model_constraints(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x3c6ef372ull);
  double worst = 0.0;
  bool ranks_ok = true;
  for (int trial = 0; trial < trials; ++trial) {
    const std::int32_t d = 4 + static_cast<std::int32_t>(rng() % 5);  // <= 8
    const std::int64_t n = 6 + static_cast<std::int64_t>(rng() % 10);
    const int k = 1 + static_cast<int>(rng() % 3);
    const LinkKind link = (trial % 2 == 0) ? LinkKind::logistic : LinkKind::squared;
    GlmObjective obj(random_instance(rng, n, d, link == LinkKind::logistic), link, 0.1);
    const Eigen::VectorXd theta_bar = random_vector(rng, d);

    const Eigen::MatrixXd s = gaussian_basis(d, k, rng()).s;
    const Eigen::MatrixXd a = obj.hess_action_full(theta_bar, s);
    const NormalizedBasis nb = normalize_basis(a, s);
    const std::int64_t i = static_cast<std::int64_t>(rng() % n);
    const Eigen::MatrixXd hi = obj.hess_dense_sample(i, theta_bar);
    const double scale = std::max(hi.norm(), 1.0);

    const Eigen::MatrixXd cm = materialize(
        [&](const Eigen::VectorXd& v) { return cm_correct(obj, i, theta_bar, nb, v); }, d);
    const Eigen::MatrixXd am = materialize(
        [&](const Eigen::VectorXd& v) { return am_correct(obj, i, theta_bar, nb, v); }, d);

    // curvature constraint S^T Hhat S = S^T H_i S, action constraint
    // Hhat S = H_i S, symmetry of the AM model
    worst = std::max(worst, (s.transpose() * cm * s - s.transpose() * hi * s).norm() / scale);
    worst = std::max(worst, (am * s - hi * s).norm() / scale);
    worst = std::max(worst, (am - am.transpose()).norm() / scale);

    // both brute-force means equal A (S^T A)^+ A^T
    const Eigen::MatrixXd mean_oracle = a * svd_pinv(s.transpose() * a) * a.transpose();
    Eigen::MatrixXd cm_mean = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd am_mean = Eigen::MatrixXd::Zero(d, d);
    for (std::int64_t j = 0; j < n; ++j) {
      cm_mean += materialize(
          [&](const Eigen::VectorXd& v) { return cm_correct(obj, j, theta_bar, nb, v); }, d);
      am_mean += materialize(
          [&](const Eigen::VectorXd& v) { return am_correct(obj, j, theta_bar, nb, v); }, d);
    }
    cm_mean /= static_cast<double>(n);
    am_mean /= static_cast<double>(n);
    worst = std::max(worst, (cm_mean - mean_oracle).norm() / scale);
    worst = std::max(worst, (am_mean - mean_oracle).norm() / scale);

    if (numerical_rank(cm) > nb.effective_rank) ranks_ok = false;
    if (numerical_rank(am) > 2 * nb.effective_rank) ranks_ok = false;
  }
  const bool pass = worst <= 1e-8 && ranks_ok;
  return {"matrix models (CM/AM constraints, means, ranks)", worst, 1e-8, pass,
          std::to_string(trials) + " trials" + (ranks_ok ? "" : ", rank bound violated")};
}

CheckResult check_full_rank_recovery(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x7f4a7c15ull);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::int32_t d = 3 + static_cast<std::int32_t>(rng() % 4);
    const std::int64_t n = d + 4;
    GlmObjective obj(random_instance(rng, n, d, false), LinkKind::squared, 0.2);
    const Eigen::VectorXd theta_bar = random_vector(rng, d);
    const Eigen::MatrixXd s = gaussian_basis(d, d, rng()).s;  // k = d, generic full rank
    const NormalizedBasis nb = normalize_basis(obj.hess_action_full(theta_bar, s), s);
    for (std::int64_t i = 0; i < n; ++i) {
      const Eigen::MatrixXd hi = obj.hess_dense_sample(i, theta_bar);
      const Eigen::MatrixXd cm = materialize(
          [&](const Eigen::VectorXd& v) { return cm_correct(obj, i, theta_bar, nb, v); }, d);
      const Eigen::MatrixXd am = materialize(
          [&](const Eigen::VectorXd& v) { return am_correct(obj, i, theta_bar, nb, v); }, d);
      worst = std::max(worst, (cm - hi).norm() / std::max(hi.norm(), 1.0));
      worst = std::max(worst, (am - hi).norm() / std::max(hi.norm(), 1.0));
    }
  }
  return {"full-rank recovery (k = d gives Hhat_i = H_i)", worst, 1e-8, worst <= 1e-8, ""};
}

CheckResult check_eta_endpoints(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x94d049bbull);
  double worst_exact = 0.0, worst_zero = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    const std::int32_t d = 3 + static_cast<std::int32_t>(rng() % 6);
    const std::int64_t n = d + 2 + static_cast<std::int64_t>(rng() % 20);
    const LinkKind link = (inst % 2 == 0) ? LinkKind::logistic : LinkKind::squared;
    // lambda = 0: the eta <= 1 endpoint for the zero model holds for the
    // unregularized per-sample Hessians phi'' x x^T.
    GlmObjective obj(random_instance(rng, n, d, link == LinkKind::logistic), link, 0.0);
    const Eigen::VectorXd theta_bar = 0.3 * random_vector(rng, d);

    std::vector<Eigen::MatrixXd> exact, zero;
    for (std::int64_t i = 0; i < n; ++i) {
      exact.push_back(obj.hess_dense_sample(i, theta_bar));
      zero.push_back(Eigen::MatrixXd::Zero(d, d));
    }
    worst_exact = std::max(worst_exact, measure_eta(obj, theta_bar, exact));
    worst_zero = std::max(worst_zero, measure_eta(obj, theta_bar, zero) - 1.0);
  }
  const double measured = std::max(worst_exact, worst_zero);
  return {"eta endpoints (0 for exact Hessians, <= 1 for zero)", measured, 1e-10,
          measured <= 1e-10,
          std::to_string(instances) + " instances, exact eta <= " + std::to_string(worst_exact)};
}

CheckResult check_secant_limits(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x2545f491ull);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::int32_t d = 4 + static_cast<std::int32_t>(rng() % 5);
    const std::int64_t n = 10;
    const LinkKind link = (trial % 2 == 0) ? LinkKind::logistic : LinkKind::squared;
    GlmObjective obj(random_instance(rng, n, d, link == LinkKind::logistic), link, 0.3);
    const Eigen::VectorXd theta_bar = random_vector(rng, d);
    // elementwise-nonzero direction, bounded away from zero
    Eigen::VectorXd dir(d);
    for (std::int32_t j = 0; j < d; ++j) {
      double u = 0.0;
      while (std::abs(u) < 0.3) u = std::normal_distribution<double>(0.0, 1.0)(rng);
      dir[j] = u;
    }
    const Eigen::VectorXd prev = theta_bar - dir;

    const SecantDiagModel big = make_secant_diag_model(obj, theta_bar, prev, 1e12);
    const SecantDiagModel small = make_secant_diag_model(obj, theta_bar, prev, 1e-12);
    for (std::int64_t i = 0; i < n; ++i) {
      const Eigen::VectorXd diag = obj.hess_diag_sample(i, theta_bar);
      const Eigen::VectorXd dg = obj.grad_sample(i, theta_bar) - obj.grad_sample(i, prev);
      const Eigen::VectorXd lim_big = secant_diag_sample(obj, i, theta_bar, big);
      const Eigen::VectorXd lim_small = secant_diag_sample(obj, i, theta_bar, small);
      for (std::int32_t j = 0; j < d; ++j) {
        worst = std::max(worst, std::abs(lim_big[j] - diag[j]) / std::max(std::abs(diag[j]), 1e-12));
        const double secant = dg[j] / dir[j];
        worst = std::max(worst,
                         std::abs(lim_small[j] - secant) / std::max(std::abs(secant), 1e-6));
      }
    }
  }
  return {"secant-diagonal limits (sigma^2 -> inf / -> 0)", worst, 1e-6, worst <= 1e-6, ""};
}

CheckResult check_mean_consistency(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x632be5abull);
  double worst_diag = 0.0, worst_lowrank = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    const std::int32_t d = 4 + static_cast<std::int32_t>(rng() % 4);
    const std::int64_t n = 8 + static_cast<std::int64_t>(rng() % 12);
    const LinkKind link = (inst % 2 == 0) ? LinkKind::logistic : LinkKind::squared;
    GlmObjective obj(random_instance(rng, n, d, link == LinkKind::logistic), link, 0.1);
    const Eigen::VectorXd theta_bar = random_vector(rng, d);
    const Eigen::VectorXd prev = theta_bar - random_vector(rng, d);
    const double inv_n = 1.0 / static_cast<double>(n);

    // diagonal models: brute-force means match per_mean
    const DiagModel dm = make_diag_model(obj, theta_bar);
    const SecantDiagModel sm = make_secant_diag_model(obj, theta_bar, prev, 0.1);
    Eigen::VectorXd acc_d = Eigen::VectorXd::Zero(d), acc_s = Eigen::VectorXd::Zero(d);
    for (std::int64_t i = 0; i < n; ++i) {
      acc_d += inv_n * obj.hess_diag_sample(i, theta_bar);
      acc_s += inv_n * secant_diag_sample(obj, i, theta_bar, sm);
    }
    worst_diag = std::max(worst_diag, (acc_d - dm.per_mean).lpNorm<Eigen::Infinity>());
    worst_diag = std::max(worst_diag, (acc_s - sm.per_mean).lpNorm<Eigen::Infinity>());

    // low-rank models: brute-force mean of corrections matches the operator
    const int k = 1 + static_cast<int>(rng() % 2);
    const Eigen::MatrixXd s = gaussian_basis(d, k, rng()).s;
    const NormalizedBasis nb = normalize_basis(obj.hess_action_full(theta_bar, s), s);
    const Eigen::VectorXd v = random_vector(rng, d);
    Eigen::VectorXd acc_cm = Eigen::VectorXd::Zero(d), acc_am = Eigen::VectorXd::Zero(d);
    for (std::int64_t i = 0; i < n; ++i) {
      acc_cm += inv_n * cm_correct(obj, i, theta_bar, nb, v);
      acc_am += inv_n * am_correct(obj, i, theta_bar, nb, v);
    }
    const double scale = std::max(v.norm(), 1.0);
    worst_lowrank = std::max(worst_lowrank, (acc_cm - cm_mean_correct(nb, v)).norm() / scale);
    worst_lowrank = std::max(worst_lowrank, (acc_am - am_mean_correct(nb, v)).norm() / scale);
  }
  const bool pass = worst_diag <= 1e-12 && worst_lowrank <= 1e-10;
  return {"mean consistency (diag 1e-12, low-rank 1e-10)", std::max(worst_diag, worst_lowrank),
          1e-10, pass, std::to_string(instances) + " instances"};
}

CheckResult check_contraction(ContractionRegime regime, int seeds, std::uint64_t seed) {
  auto data = std::make_shared<Dataset>(synth_problem(SynthKind::ridge, 300, 10, 10.0, seed + 3));
  GlmObjective obj(data, LinkKind::squared, 0.0);
  const ContractionReport rep = epoch_contraction_check(obj, regime, seeds, seed);
  const char* name = regime == ContractionRegime::svrg2_prop    ? "contraction svrg2 (gamma=1/4L)"
                     : regime == ContractionRegime::svrg_appendix ? "contraction svrg (gamma=1/4R^2)"
                                                                  : "contraction stability (gamma=1/8R^2)";
  return {name, rep.mean_ratio, 0.80, rep.mean_ratio <= 0.80,
          std::to_string(seeds) + " seeds, bound 0.75 + 0.05 slack; " + rep.note};
}

std::vector<CheckResult> run_verify_checks(const VerifyOptions& opts) {
  std::vector<CheckResult> results;
  results.push_back(check_unbiasedness(opts.full ? 20 : 8, opts.seed, opts.corrupt_mean_for_test));
  results.push_back(check_quadratic_exactness(opts.full ? 1000 : 300, opts.seed));
  results.push_back(check_matrix_model_constraints(opts.full ? 100 : 25, opts.seed));
  results.push_back(check_full_rank_recovery(opts.seed));
  results.push_back(check_eta_endpoints(opts.full ? 20 : 8, opts.seed));
  results.push_back(check_secant_limits(opts.seed));
  results.push_back(check_mean_consistency(opts.full ? 20 : 8, opts.seed));
  if (opts.full) {
    results.push_back(check_contraction(ContractionRegime::svrg2_prop, 20, opts.seed));
    results.push_back(check_contraction(ContractionRegime::svrg_appendix, 20, opts.seed));
    results.push_back(check_contraction(ContractionRegime::stability, 20, opts.seed));
  } else {
    results.push_back(check_contraction(ContractionRegime::svrg2_prop, 5, opts.seed));
  }
  return results;
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  const auto results = run_verify_checks(opts);
  bool all_pass = true;
  out << (opts.full ? "verify (full)\n" : "verify (fast)\n");
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    out << "  [" << (r.pass ? "PASS" : "FAIL") << "] " << std::left << std::setw(52) << r.name
        << " measured " << std::scientific << std::setprecision(3) << r.measured << " bound "
        << r.bound << std::defaultfloat;
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << '\n';
  }
  out << (all_pass ? "all checks passed\n" : "CHECKS FAILED\n");
  return all_pass ? 0 : 1;
}

}  // namespace vropt::bench
