#include <CLI11.hpp>

#include <iostream>

#include "vropt/bench.hpp"
#include "vropt/verify.hpp"

namespace {

struct CliState {
  vropt::bench::ExperimentConfig config;
  std::string config_path;
  std::string synth_spec;
  std::string link = "logistic";
  std::string lambda = "paper";
  std::vector<std::string> methods;
  std::vector<int> gamma_exps;
  bool use_paper_exponents = false;
};

void add_shared_flags(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_path, "JSON config file; flags override its values");
  cmd->add_option("--data", st.config.data_path, "LIBSVM data file");
  cmd->add_option("--synth", st.synth_spec,
                  "synthetic problem KIND,N,D,PARAM with KIND in {ridge,logistic,onehot}; "
                  "PARAM is the covariance condition number (ridge/logistic) or the "
                  "one-hot group count");
  cmd->add_option("--link", st.link, "loss link: logistic or squared")
      ->check(CLI::IsMember({"logistic", "squared"}));
  cmd->add_option("--lambda", st.lambda, "l2 weight: 'paper' (R^2/4N) or an explicit value");
  cmd->add_option("--method", st.methods,
                  "method name (repeatable): svrg svrg2 2d 2dsec cmgauss cmprev amgauss amprev");
  cmd->add_option("--gamma-exp", st.gamma_exps, "stepsize exponent a, gamma = 2^a / L_max");
  cmd->add_flag("--paper-exponents", st.use_paper_exponents,
                "use the coarse published exponent grid instead of 10..-9");
  cmd->add_option("--epochs", st.config.epochs, "outer epochs K (0 = fit the datapass budget)");
  cmd->add_option("--inner", st.config.inner_steps, "inner steps T per epoch (0 = N)");
  cmd->add_option("--rank", st.config.rank, "sketch rank k for cm*/am*")->capture_default_str();
  cmd->add_option("--sigma2", st.config.sigma_sq, "sigma^2 for 2dsec")->capture_default_str();
  cmd->add_option("--budget", st.config.budget, "datapass budget per run")
      ->capture_default_str();
  cmd->add_option("--seed", st.config.seed, "RNG seed")->capture_default_str();
  cmd->add_flag("--deterministic", st.config.deterministic,
                "single-threaded grid/suite execution");
  cmd->add_option("--out", st.config.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--dense-cap", st.config.dense_cap,
                  "max dimension for dense-Hessian methods")
      ->capture_default_str();
}

vropt::bench::ExperimentConfig resolve(const CliState& st) {
  vropt::bench::ExperimentConfig c =
      st.config_path.empty() ? vropt::bench::ExperimentConfig{}
                             : vropt::bench::config_from_json_file(st.config_path);
  // flags override config-file values when given
  if (!st.config.data_path.empty()) c.data_path = st.config.data_path;
  if (!st.synth_spec.empty()) c.synth = vropt::bench::parse_synth_spec(st.synth_spec);
  c.link = vropt::link_from_name(st.link);
  if (st.lambda != "paper") c.lambda_explicit = std::stod(st.lambda);
  if (!st.methods.empty()) c.methods = st.methods;
  if (!st.gamma_exps.empty()) c.exponents = st.gamma_exps;
  if (st.use_paper_exponents) c.exponents = vropt::bench::paper_exponents();
  if (st.config.epochs > 0) c.epochs = st.config.epochs;
  if (st.config.inner_steps > 0) c.inner_steps = st.config.inner_steps;
  c.rank = st.config.rank;
  c.sigma_sq = st.config.sigma_sq;
  c.budget = st.config.budget;
  c.seed = st.config.seed;
  c.deterministic = c.deterministic || st.config.deterministic;
  c.out_dir = st.config.out_dir;
  c.dense_cap = st.config.dense_cap;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-sum variance-reduced optimization benchmark"};
  app.require_subcommand(1);

  CliState st;
  st.config.out_dir = "out";

  auto* stats = app.add_subcommand("stats", "print dataset statistics as JSON");
  auto* run = app.add_subcommand("run", "single method at a single stepsize, trace CSV");
  auto* grid = app.add_subcommand("grid", "stepsize grid search per method");
  auto* suite = app.add_subcommand("suite", "all methods at their grid-best stepsizes");
  auto* sweep = app.add_subcommand("sigma-sweep", "2dsec across a list of sigma^2 values");
  for (auto* cmd : {stats, run, grid, suite, sweep}) add_shared_flags(cmd, st);

  std::vector<double> sigma_list;
  sweep->add_option("--sigma-list", sigma_list, "sigma^2 values (default 1e-3 .. 10)");

  auto* verify = app.add_subcommand("verify", "self-checks against the analysis bounds");
  std::string level = "fast";
  std::uint64_t verify_seed = 0;
  verify->add_option("level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--seed", verify_seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      vropt::bench::VerifyOptions opts;
      opts.full = level == "full";
      opts.seed = verify_seed;
      return vropt::bench::cmd_verify(opts, std::cout);
    }
    const vropt::bench::ExperimentConfig config = resolve(st);
    if (stats->parsed()) return vropt::bench::cmd_stats(config, std::cout);
    if (run->parsed()) return vropt::bench::cmd_run(config, std::cout);
    if (grid->parsed()) return vropt::bench::cmd_grid(config, std::cout);
    if (suite->parsed()) return vropt::bench::cmd_suite(config, std::cout);
    if (sweep->parsed()) {
      vropt::bench::ExperimentConfig c = config;
      if (!sigma_list.empty()) c.sigma_list = sigma_list;
      return vropt::bench::cmd_sigma_sweep(c, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
