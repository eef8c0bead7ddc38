#include "vropt/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace vropt::bench {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> default_exponents() {
  std::vector<int> out;
  for (int a = 10; a >= -9; --a) out.push_back(a);
  return out;
}

std::vector<int> paper_exponents() { return {10, 7, 4, 1, -2, -5, -7, -9}; }

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::istringstream ss(text);
  std::string tok;
  std::vector<std::string> parts;
  while (std::getline(ss, tok, ',')) parts.push_back(tok);
  if (parts.size() != 4)
    throw std::invalid_argument("synth spec must be KIND,N,D,PARAM, got '" + text + "'");
  spec.kind = parts[0];
  if (spec.kind != "ridge" && spec.kind != "logistic" && spec.kind != "onehot")
    throw std::invalid_argument("synth kind must be ridge, logistic or onehot");
  spec.n = std::stoll(parts[1]);
  spec.d = std::stoi(parts[2]);
  spec.param = std::stod(parts[3]);
  return spec;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j = json::parse(in);
  ExperimentConfig c;
  if (j.contains("data")) c.data_path = j["data"].get<std::string>();
  if (j.contains("synth")) c.synth = parse_synth_spec(j["synth"].get<std::string>());
  if (j.contains("link")) c.link = link_from_name(j["link"].get<std::string>());
  if (j.contains("lambda")) {
    const auto& v = j["lambda"];
    if (v.is_string()) {
      if (v.get<std::string>() != "paper")
        throw std::runtime_error("lambda must be a number or \"paper\"");
    } else {
      c.lambda_explicit = v.get<double>();
    }
  }
  if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("exponents")) c.exponents = j["exponents"].get<std::vector<int>>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("inner")) c.inner_steps = j["inner"].get<std::int64_t>();
  if (j.contains("rank")) c.rank = j["rank"].get<int>();
  if (j.contains("sigma2")) c.sigma_sq = j["sigma2"].get<double>();
  if (j.contains("sigma_list")) c.sigma_list = j["sigma_list"].get<std::vector<double>>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("deterministic")) c.deterministic = j["deterministic"].get<bool>();
  if (j.contains("budget")) c.budget = j["budget"].get<double>();
  if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
  if (j.contains("dense_cap")) c.dense_cap = j["dense_cap"].get<std::int32_t>();
  if (j.contains("ref_tol")) c.ref_tol = j["ref_tol"].get<double>();
  return c;
}

Problem load_problem(const ExperimentConfig& config) {
  Problem p;
  if (!config.data_path.empty() && config.synth)
    throw std::invalid_argument("give either --data or --synth, not both");
  if (config.data_path.empty() && !config.synth)
    throw std::invalid_argument("no dataset: give --data PATH or --synth KIND,N,D,PARAM");

  if (!config.data_path.empty()) {
    p.data = std::make_shared<Dataset>(parse_libsvm_file(config.data_path));
    p.tag = fs::path(config.data_path).stem().string();
  } else {
    const SynthSpec& s = *config.synth;
    Dataset ds = [&] {
      if (s.kind == "ridge")
        return synth_problem(SynthKind::ridge, s.n, s.d, s.param, config.seed);
      if (s.kind == "logistic")
        return synth_problem(SynthKind::logistic, s.n, s.d, s.param, config.seed);
      return synth_onehot_problem(s.n, s.d, static_cast<int>(s.param), config.seed);
    }();
    p.data = std::make_shared<Dataset>(std::move(ds));
    std::ostringstream tag;
    tag << s.kind << '-' << s.n << 'x' << s.d << '-' << s.param << "-s" << config.seed;
    p.tag = tag.str();
  }

  const DatasetStats raw = dataset_stats(*p.data, 0.0);
  p.lambda = config.lambda_explicit.value_or(raw.default_lambda);
  p.stats = dataset_stats(*p.data, p.lambda);
  p.objective = std::make_shared<GlmObjective>(p.data, config.link, p.lambda, config.dense_cap);
  return p;
}

namespace {

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h) {
  const auto* b = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string reference_key(const Problem& problem, double tol) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const Dataset& ds = *problem.data;
  for (std::int64_t i = 0; i < ds.n_samples(); ++i) {
    const auto r = ds.row(i);
    h = fnv1a(r.indices.data(), r.indices.size_bytes(), h);
    h = fnv1a(r.values.data(), r.values.size_bytes(), h);
    const double y = ds.label(i);
    h = fnv1a(&y, sizeof(y), h);
  }
  const int link = static_cast<int>(problem.objective->link());
  h = fnv1a(&link, sizeof(link), h);
  const double lam = problem.lambda;
  h = fnv1a(&lam, sizeof(lam), h);
  h = fnv1a(&tol, sizeof(tol), h);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
  }
  fs::rename(tmp, path);
}

Reference cached_reference(const Problem& problem, const std::string& out_dir, double tol) {
  const fs::path dir = fs::path(out_dir) / "ref_cache";
  fs::create_directories(dir);
  const fs::path file = dir / ("ref_" + reference_key(problem, tol) + ".json");
  if (fs::exists(file)) {
    std::ifstream in(file);
    json j = json::parse(in);
    Reference ref;
    const auto vec = j["theta_star"].get<std::vector<double>>();
    ref.theta_star = Eigen::Map<const Eigen::VectorXd>(vec.data(), static_cast<Eigen::Index>(vec.size()));
    ref.f_star = j["f_star"].get<double>();
    ref.grad_norm = j["grad_norm"].get<double>();
    ref.passes = j["passes"].get<std::int64_t>();
    return ref;
  }
  Reference ref = reference_solution(*problem.objective, tol);
  json j;
  j["theta_star"] = std::vector<double>(ref.theta_star.data(),
                                        ref.theta_star.data() + ref.theta_star.size());
  j["f_star"] = ref.f_star;
  j["grad_norm"] = ref.grad_norm;
  j["passes"] = ref.passes;
  write_file_atomic(file.string(), j.dump());
  return ref;
}

MethodPlan plan_for(const ExperimentConfig& config, const std::string& method) {
  MethodPlan plan = plan_from_name(method);
  plan.rank = config.rank;
  plan.sigma_sq = config.sigma_sq;
  return plan;
}

int epochs_for_budget(const MethodPlan& plan, std::int64_t inner_steps, std::int64_t n,
                      double budget) {
  const double steps = static_cast<double>(inner_steps > 0 ? inner_steps : n);
  const double inner = steps / static_cast<double>(n) * inner_step_datapass_charge(plan);
  const double first = snapshot_datapass_charge(plan, true) + inner;
  const double later = snapshot_datapass_charge(plan, false) + inner;
  if (budget <= first) return 1;
  return 1 + static_cast<int>(std::floor((budget - first) / later));
}

RunOutcome run_method(const ExperimentConfig& config, const Problem& problem,
                      const Reference& ref, const MethodPlan& plan, int exponent,
                      int epochs_override) {
  RunConfig rc;
  rc.gamma = std::ldexp(1.0, exponent) / problem.stats.l_max;
  rc.inner_steps = config.inner_steps;
  rc.epochs = epochs_override > 0 ? epochs_override
              : config.epochs > 0
                  ? config.epochs
                  : epochs_for_budget(plan, config.inner_steps, problem.data->n_samples(),
                                      config.budget);
  rc.seed = config.seed;
  rc.f_star = ref.f_star;
  return run(plan, *problem.objective, rc);
}

int worker_count(const ExperimentConfig& config, std::size_t jobs) {
  if (config.deterministic || jobs <= 1) return 1;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("VROPT_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) hw = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::min<std::size_t>(hw, jobs));
}

int select_best_exponent(const std::vector<GridCell>& cells, const std::string& method) {
  // Suboptimality below 1e-12 is indistinguishable from the reference noise
  // floor, so such cells compare as exact ties and the tie-break toward the
  // larger stepsize decides.
  constexpr double kSelectionFloor = 1e-12;
  bool any = false;
  int best = std::numeric_limits<int>::min();
  double best_val = std::numeric_limits<double>::infinity();
  int min_exp = std::numeric_limits<int>::max();
  for (const auto& c : cells) {
    if (c.method != method) continue;
    min_exp = std::min(min_exp, c.exponent);
    if (c.diverged) continue;
    const double val = std::max(c.final_subopt, kSelectionFloor);
    if (!any || val < best_val || (val == best_val && c.exponent > best)) {
      any = true;
      best_val = val;
      best = c.exponent;
    }
  }
  if (!any) {
    if (min_exp == std::numeric_limits<int>::max())
      throw std::invalid_argument("select_best_exponent: no cells for method " + method);
    return min_exp;  // everything diverged
  }
  return best;
}

GridResult run_grid(const ExperimentConfig& config, const Problem& problem,
                    const Reference& ref) {
  if (config.methods.empty()) throw std::invalid_argument("grid: empty method list");
  const std::vector<int>& exps = config.exponents;
  if (exps.empty()) throw std::invalid_argument("grid: empty exponent list");

  struct Job {
    std::string method;
    int exponent;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.methods)
    for (int a : exps) jobs.push_back({m, a});

  GridResult grid;
  grid.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const MethodPlan plan = plan_for(config, jobs[j].method);
      GridCell cell{jobs[j].method, jobs[j].exponent,
                    std::numeric_limits<double>::infinity(), false, 0.0};
      try {
        const RunOutcome out = run_method(config, problem, ref, plan, jobs[j].exponent);
        cell.diverged = out.diverged;
        cell.datapasses = out.trace.empty() ? 0.0 : out.trace.back().datapasses;
        if (!out.diverged && !out.trace.empty()) cell.final_subopt = out.trace.back().subopt;
      } catch (const std::exception&) {
        cell.diverged = true;  // e.g. svrg2 over the dense cap
      }
      grid.cells[j] = std::move(cell);
    }
  };
  const int workers = worker_count(config, jobs.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& m : config.methods)
    grid.best_exponent[m] = select_best_exponent(grid.cells, m);
  return grid;
}

void write_grid_csv(const GridResult& grid, std::ostream& out) {
  out << "method,exponent,final_subopt,diverged,best\n";
  char buf[128];
  for (const auto& c : grid.cells) {
    const auto it = grid.best_exponent.find(c.method);
    const int is_best = it != grid.best_exponent.end() && it->second == c.exponent ? 1 : 0;
    std::snprintf(buf, sizeof(buf), "%.17g", c.final_subopt);
    out << c.method << ',' << c.exponent << ',' << buf << ',' << (c.diverged ? 1 : 0) << ','
        << is_best << '\n';
  }
}

GridResult read_grid_csv(std::istream& in) {
  GridResult grid;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "method,exponent,final_subopt,diverged,best")
        throw std::runtime_error("read_grid_csv: unexpected header");
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    GridCell c;
    std::string tok;
    std::getline(ss, c.method, ',');
    std::getline(ss, tok, ',');
    c.exponent = std::stoi(tok);
    std::getline(ss, tok, ',');
    c.final_subopt = std::stod(tok);
    std::getline(ss, tok, ',');
    c.diverged = tok == "1";
    std::getline(ss, tok, ',');
    if (tok == "1") grid.best_exponent[c.method] = c.exponent;
    grid.cells.push_back(std::move(c));
  }
  return grid;
}

int cmd_stats(const ExperimentConfig& config, std::ostream& out) {
  const Problem p = load_problem(config);
  out << stats_json(*p.data, p.stats) << '\n';
  return 0;
}

namespace {

std::string trace_csv_string(const Trace& trace, const std::vector<std::string>& metadata) {
  std::ostringstream ss;
  write_trace_csv(trace, ss, metadata);
  return ss.str();
}

std::vector<std::string> run_metadata(const ExperimentConfig& config, const Problem& problem,
                                      const std::string& method, int exponent,
                                      const RunOutcome& out) {
  char gbuf[64];
  std::snprintf(gbuf, sizeof(gbuf), "%.17g", std::ldexp(1.0, exponent) / problem.stats.l_max);
  std::vector<std::string> md = {
      "method=" + method,
      "exponent=" + std::to_string(exponent),
      std::string("gamma=") + gbuf,
      "seed=" + std::to_string(config.seed),
      "dataset=" + problem.tag,
      "diverged=" + std::string(out.diverged ? "1" : "0"),
  };
  if (out.diverged) md.push_back("divergence_note=" + out.note);
  return md;
}

}  // namespace

int cmd_run(const ExperimentConfig& config, std::ostream& out) {
  if (config.methods.size() != 1 || config.exponents.size() != 1)
    throw std::invalid_argument("run: need exactly one --method and one --gamma-exp");
  const Problem problem = load_problem(config);
  fs::create_directories(config.out_dir);
  const Reference ref = cached_reference(problem, config.out_dir, config.ref_tol);
  const MethodPlan plan = plan_for(config, config.methods[0]);
  const RunOutcome res = run_method(config, problem, ref, plan, config.exponents[0]);

  const std::string name =
      "trace_" + config.methods[0] + "_a" + std::to_string(config.exponents[0]) + ".csv";
  const fs::path file = fs::path(config.out_dir) / name;
  write_file_atomic(file.string(),
                    trace_csv_string(res.trace, run_metadata(config, problem, config.methods[0],
                                                             config.exponents[0], res)));
  out << "wrote " << file.string() << (res.diverged ? " (diverged)" : "") << '\n';
  return 0;
}

int cmd_grid(const ExperimentConfig& config, std::ostream& out) {
  ExperimentConfig cfg = config;
  if (cfg.exponents.empty()) cfg.exponents = default_exponents();
  const Problem problem = load_problem(cfg);
  fs::create_directories(cfg.out_dir);
  const Reference ref = cached_reference(problem, cfg.out_dir, cfg.ref_tol);
  const GridResult grid = run_grid(cfg, problem, ref);

  std::ostringstream csv;
  write_grid_csv(grid, csv);
  const fs::path file = fs::path(cfg.out_dir) / "grid.csv";
  write_file_atomic(file.string(), csv.str());

  out << "stepsize grid on " << problem.tag << " (budget " << cfg.budget << " datapasses)\n";
  for (const auto& m : cfg.methods) {
    out << "  " << std::left << std::setw(8) << m << " best 2^" << grid.best_exponent.at(m)
        << " / L_max   final subopt per exponent:";
    for (const auto& c : grid.cells) {
      if (c.method != m) continue;
      char buf[32];
      if (c.diverged)
        std::snprintf(buf, sizeof(buf), " [%d:div]", c.exponent);
      else
        std::snprintf(buf, sizeof(buf), " [%d:%.1e]", c.exponent, c.final_subopt);
      out << buf;
    }
    out << '\n';
  }
  out << "wrote " << file.string() << '\n';
  return 0;
}

int cmd_suite(const ExperimentConfig& config, std::ostream& out) {
  ExperimentConfig cfg = config;
  if (cfg.methods.empty()) throw std::invalid_argument("suite: empty method list");
  if (cfg.exponents.empty()) cfg.exponents = default_exponents();
  const Problem problem = load_problem(cfg);
  fs::create_directories(cfg.out_dir);
  const Reference ref = cached_reference(problem, cfg.out_dir, cfg.ref_tol);
  const GridResult grid = run_grid(cfg, problem, ref);

  std::ostringstream merged;
  merged << "method,datapasses,wall_ms,subopt\n";
  for (const auto& m : cfg.methods) {
    const int a = grid.best_exponent.at(m);
    const MethodPlan plan = plan_for(cfg, m);
    RunOutcome res;
    bool failed = false;
    try {
      res = run_method(cfg, problem, ref, plan, a);
    } catch (const std::exception& e) {
      failed = true;
      out << "  " << m << ": failed (" << e.what() << "), continuing\n";
    }
    if (failed) continue;
    const fs::path file = fs::path(cfg.out_dir) / ("trace_" + m + ".csv");
    write_file_atomic(file.string(),
                      trace_csv_string(res.trace, run_metadata(cfg, problem, m, a, res)));
    char buf[160];
    for (const auto& r : res.trace.records) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", m.c_str(), r.datapasses,
                    r.wall_ms, r.subopt);
      merged << buf;
    }
    out << "  " << m << ": best 2^" << a << ", final subopt "
        << (res.diverged ? std::string("diverged")
                         : std::to_string(res.trace.back().subopt))
        << '\n';
  }
  const fs::path mf = fs::path(cfg.out_dir) / "suite_merged.csv";
  write_file_atomic(mf.string(), merged.str());
  out << "wrote " << mf.string() << '\n';
  return 0;
}

int cmd_sigma_sweep(const ExperimentConfig& config, std::ostream& out) {
  ExperimentConfig cfg = config;
  cfg.methods = {"2dsec"};
  const Problem problem = load_problem(cfg);
  fs::create_directories(cfg.out_dir);
  const Reference ref = cached_reference(problem, cfg.out_dir, cfg.ref_tol);

  int exponent;
  if (cfg.exponents.size() == 1) {
    exponent = cfg.exponents[0];
  } else {
    ExperimentConfig gcfg = cfg;
    if (gcfg.exponents.empty()) gcfg.exponents = default_exponents();
    exponent = run_grid(gcfg, problem, ref).best_exponent.at("2dsec");
    out << "grid-best stepsize for 2dsec: 2^" << exponent << " / L_max\n";
  }

  for (double s2 : cfg.sigma_list) {
    ExperimentConfig rcfg = cfg;
    rcfg.sigma_sq = s2;
    const MethodPlan plan = plan_for(rcfg, "2dsec");
    const RunOutcome res = run_method(rcfg, problem, ref, plan, exponent);
    char name[64];
    std::snprintf(name, sizeof(name), "sigma_%g.csv", s2);
    const fs::path file = fs::path(cfg.out_dir) / name;
    auto md = run_metadata(cfg, problem, "2dsec", exponent, res);
    char s2buf[48];
    std::snprintf(s2buf, sizeof(s2buf), "sigma2=%.17g", s2);
    md.push_back(s2buf);
    write_file_atomic(file.string(), trace_csv_string(res.trace, md));
    out << "  sigma2=" << s2 << "  final subopt "
        << (res.diverged ? std::string("diverged") : std::to_string(res.trace.back().subopt))
        << '\n';
  }
  return 0;
}

}  // namespace vropt::bench
