#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vropt/optimizer.hpp"

namespace vropt::bench {

struct CheckResult {
  std::string name;
  double measured;  // worst observed value
  double bound;     // must satisfy measured <= bound
  bool pass;
  std::string detail;
};

struct VerifyOptions {
  bool full = false;  // full level adds 20-seed contraction runs on all regimes
  std::uint64_t seed = 0;
  bool corrupt_mean_for_test = false;  // fault-injection hook, test use only
};

/// Brute-force mean of the update direction over all samples equals the full
/// gradient, for every method family, on random small instances.
CheckResult check_unbiasedness(int instances, std::uint64_t seed, bool corrupt_mean = false);

/// On a ridge objective every SVRG2 inner step equals the batch gradient
/// step; reports the max deviation over the given number of steps.
CheckResult check_quadratic_exactness(int steps, std::uint64_t seed);

/// CM/AM constraint, symmetry, rank and mean identities on random dense
/// instances (d <= 8, k in {1,2,3}).
CheckResult check_matrix_model_constraints(int trials, std::uint64_t seed);

/// With k = d and a positive definite mean Hessian, the dense CM and AM
/// models reproduce each H_i.
CheckResult check_full_rank_recovery(std::uint64_t seed);

/// measure_eta endpoints: 0 for exact per-sample Hessians, <= 1 for the zero
/// approximation.
CheckResult check_eta_endpoints(int instances, std::uint64_t seed);

/// sigma^2 -> inf recovers the Hessian diagonal, sigma^2 -> 0 the secant
/// quotient, on instances with elementwise-nonzero directions.
CheckResult check_secant_limits(std::uint64_t seed);

/// Brute-force means of every model's per-sample corrections match the
/// stored/mean operators.
CheckResult check_mean_consistency(int instances, std::uint64_t seed);

/// One-epoch contraction ratio against the 3/4 bound (+0.05 sampling slack)
/// on a synthetic ridge problem.
CheckResult check_contraction(ContractionRegime regime, int seeds, std::uint64_t seed);

std::vector<CheckResult> run_verify_checks(const VerifyOptions& opts);

/// Prints one line per check and returns a nonzero exit code on any failure.
int cmd_verify(const VerifyOptions& opts, std::ostream& out);

}  // namespace vropt::bench
