#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vropt/optimizer.hpp"

namespace vropt::bench {

struct SynthSpec {
  std::string kind;  // ridge | logistic | onehot
  std::int64_t n = 0;
  std::int32_t d = 0;
  double param = 1.0;  // condition number, or group count for onehot
};

struct ExperimentConfig {
  std::string data_path;            // LIBSVM file; mutually exclusive with synth
  std::optional<SynthSpec> synth;
  LinkKind link = LinkKind::logistic;
  std::optional<double> lambda_explicit;  // absent -> R^2 / (4N)
  std::vector<std::string> methods;
  std::vector<int> exponents;       // stepsize gamma = 2^a / L_max
  int epochs = 0;                   // 0 -> derived from the datapass budget
  std::int64_t inner_steps = 0;     // 0 -> N
  int rank = 10;
  double sigma_sq = 0.1;
  std::vector<double> sigma_list = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::uint64_t seed = 0;
  bool deterministic = false;       // single-threaded grid/suite execution
  double budget = 30.0;             // datapasses per run
  std::string out_dir = "out";
  std::int32_t dense_cap = 5000;
  double ref_tol = 1e-10;
};

std::vector<int> default_exponents();  // 10, 9, ..., -9
std::vector<int> paper_exponents();    // the coarser published list

ExperimentConfig config_from_json_file(const std::string& path);

SynthSpec parse_synth_spec(const std::string& text);  // "kind,n,d,param"

struct Problem {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const GlmObjective> objective;
  DatasetStats stats;  // l_max computed with the applied lambda
  double lambda;
  std::string tag;
};

Problem load_problem(const ExperimentConfig& config);

/// Reference solution cached on disk under out_dir/ref_cache, keyed by the
/// dataset content hash, link, lambda and tolerance.
Reference cached_reference(const Problem& problem, const std::string& out_dir, double tol);

MethodPlan plan_for(const ExperimentConfig& config, const std::string& method);

/// Number of whole epochs fitting the datapass budget (at least one).
int epochs_for_budget(const MethodPlan& plan, std::int64_t inner_steps, std::int64_t n,
                      double budget);

struct GridCell {
  std::string method;
  int exponent;
  double final_subopt;  // +inf when diverged
  bool diverged;
  double datapasses;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::map<std::string, int> best_exponent;
};

/// Argmin of final suboptimality over a method's non-diverged cells, ties
/// broken toward the larger stepsize. Falls back to the smallest exponent
/// when every cell diverged.
int select_best_exponent(const std::vector<GridCell>& cells, const std::string& method);

GridResult run_grid(const ExperimentConfig& config, const Problem& problem,
                    const Reference& ref);

void write_grid_csv(const GridResult& grid, std::ostream& out);
GridResult read_grid_csv(std::istream& in);

RunOutcome run_method(const ExperimentConfig& config, const Problem& problem,
                      const Reference& ref, const MethodPlan& plan, int exponent,
                      int epochs_override = 0);

/// Atomically writes `content` (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

int cmd_stats(const ExperimentConfig& config, std::ostream& out);
int cmd_run(const ExperimentConfig& config, std::ostream& out);
int cmd_grid(const ExperimentConfig& config, std::ostream& out);
int cmd_suite(const ExperimentConfig& config, std::ostream& out);
int cmd_sigma_sweep(const ExperimentConfig& config, std::ostream& out);

/// Worker count for grid/suite pools: VROPT_WORKERS, clamped to hardware;
/// 1 when the config asks for deterministic execution.
int worker_count(const ExperimentConfig& config, std::size_t jobs);

}  // namespace vropt::bench
