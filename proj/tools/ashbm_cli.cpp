#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ashbm/experiment.hpp"

namespace fs = std::filesystem;
using namespace ashbm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInconsistent = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InconsistentSystem: return kExitInconsistent;
    case ErrorCode::ZeroSketchResidual:
    case ErrorCode::DegenerateDirection:
    case ErrorCode::StalledSampling:
    case ErrorCode::Breakdown: return kExitSolver;
    default: return kExitConfig;
  }
}

// Options shared by solve / sweep / bound. Each flag overrides the config file.
struct CommonFlags {
  std::string config_path;
  std::string matrix, rhs, solution;
  std::vector<double> gen;  // m n r kappa
  std::uint64_t problem_seed = 1;
  std::string solver, sampling, residual, format, out;
  std::vector<double> zeta;
  double beta = 0.0, tol = 0.0;
  Index max_iters = 0, trials = 0, threads = 0, residual_every = 0;
  std::uint64_t seed = 0;
  bool no_timing = false;

  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--matrix", matrix, "Matrix Market file for A")->check(CLI::ExistingFile);
    app->add_option("--rhs", rhs, "right-hand side, one value per line")->check(CLI::ExistingFile);
    app->add_option("--solution", solution, "known A^+ b, one value per line")->check(CLI::ExistingFile);
    app->add_option("--generate", gen, "generate a Gaussian problem: m n rank kappa")->expected(4);
    app->add_option("--problem-seed", problem_seed, "seed of the generated problem (or of x* without --rhs)");
    app->add_option("--solver", solver, "basic|mbasic|ashbm|scg|mrabk|cgne");
    app->add_option("--sampling", sampling, "row|uniform:<p>|partition:<p>|identity");
    app->add_option("--zeta", zeta, "relaxation schedule zeta_0 zeta_1 ... (last value repeats)");
    app->add_option("--beta", beta, "momentum for mrabk");
    app->add_option("--tol", tol, "RSE tolerance");
    app->add_option("--max-iters", max_iters, "iteration cap");
    app->add_option("--trials", trials, "independent trials");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--residual", residual, "residual tracking: incremental|sampled");
    app->add_option("--residual-every", residual_every, "full residual cadence in sampled mode");
    app->add_flag("--no-timing", no_timing, "leave wall_nanos at 0");
    app->add_option("--out", out, "output directory");
    app->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  }

  bool given(CLI::App* app, const char* name) const { return app->get_option(name)->count() > 0; }

  ExperimentConfig resolve(CLI::App* app) const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (!matrix.empty()) {
      c.problem = ProblemSource{};
      c.problem.kind = ProblemSource::Kind::MatrixMarket;
      c.problem.matrix_path = matrix;
      c.problem.rhs_path = rhs;
      c.problem.solution_path = solution;
    } else if (!gen.empty()) {
      c.problem = ProblemSource{};
      c.problem.m = static_cast<Index>(gen[0]);
      c.problem.n = static_cast<Index>(gen[1]);
      c.problem.rank = static_cast<Index>(gen[2]);
      c.problem.kappa = gen[3];
    }
    if (given(app, "--problem-seed")) c.problem.seed = problem_seed;
    if (!solver.empty()) c.solver = parse_solver_id(solver);
    if (!sampling.empty()) c.scheme = SchemeSpec::parse(sampling);
    SolverConfig& s = c.solver_config;
    if (!zeta.empty()) s.zeta = zeta;
    if (given(app, "--beta")) s.momentum_beta = beta;
    if (given(app, "--tol")) s.rse_tolerance = tol;
    if (given(app, "--max-iters")) s.max_iters = max_iters;
    if (given(app, "--trials")) c.trials = trials;
    if (given(app, "--seed")) c.seed = seed;
    if (given(app, "--threads")) c.threads = threads;
    if (!residual.empty()) s.residual_mode = parse_residual_mode(residual);
    if (given(app, "--residual-every")) s.residual_every = residual_every;
    if (no_timing) s.record_timing = false;
    if (!out.empty()) c.out_dir = out;
    if (!format.empty()) c.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;
    require(c.trials >= 1 && c.threads >= 1, ErrorCode::ConfigError, "trials and threads must be >= 1");
    s.validate();
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::ConfigError, "cannot write " + path.string());
  f << text;
}

std::string trace_name(Index trial, OutputFormat format) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trace_%04lld.%s", static_cast<long long>(trial),
                format == OutputFormat::Json ? "json" : "csv");
  return buf;
}

int cmd_generate(const std::vector<double>& dims, std::uint64_t seed, const std::string& out) {
  require(dims.size() == 4, ErrorCode::ConfigError, "generate needs m n rank kappa");
  const LinearSystem sys = generate_gaussian_problem(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]),
                                                     static_cast<Index>(dims[2]), dims[3], seed);
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  save_matrix_market(dir / "A.mtx", sys.a);
  save_vector(dir / "b.txt", sys.b);
  save_vector(dir / "x_min_norm.txt", *sys.min_norm);
  if (sys.planted_solution) save_vector(dir / "x_planted.txt", *sys.planted_solution);
  std::cout << "wrote " << (dir / "A.mtx").string() << ", b.txt, x_min_norm.txt, x_planted.txt\n";
  return kExitOk;
}

int cmd_solve(const ExperimentConfig& c) {
  const LinearSystem sys = load_system(c.problem);
  const auto trials = run_trials(sys, c);
  const ExperimentSummary summary = summarize(trials, c, sys.a.rows());
  const std::string summary_json = summary_to_json(summary);

  if (!c.out_dir.empty()) {
    const fs::path dir(c.out_dir);
    fs::create_directories(dir);
    for (const auto& t : trials) {
      std::ofstream f(dir / trace_name(t.trial, c.format), std::ios::binary);
      if (c.format == OutputFormat::Json) {
        write_trace_json(f, t.result.trace);
      } else {
        write_trace_csv(f, t.result.trace);
      }
    }
    write_text(dir / "summary.json", summary_json + "\n");
    write_text(dir / "config.json", serialize_config(c) + "\n");
  }
  std::cout << summary_json << '\n';

  int code = kExitOk;
  for (const auto& t : trials) {
    if (t.error) {
      std::cerr << "trial " << t.trial << ": " << t.error_message << '\n';
      code = std::max(code, exit_code_for(*t.error));
    } else if (t.result.failed()) {
      std::cerr << "trial " << t.trial << ": " << to_string(t.result.status) << ": " << t.result.message << '\n';
      code = std::max(code, kExitSolver);
    }
  }
  return code;
}

std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      require(used == item.size() && v > 0, ErrorCode::ConfigError, "bad block size '" + item + "'");
      out.push_back(static_cast<Index>(v));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ConfigError, "bad block size '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::ConfigError, "empty --p-list");
  return out;
}

std::vector<SolverId> parse_solver_list(const std::string& text) {
  std::vector<SolverId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_solver_id(item));
  require(!out.empty(), ErrorCode::ConfigError, "empty --solvers");
  return out;
}

int cmd_sweep(const ExperimentConfig& c, const std::string& p_list, const std::string& solvers) {
  const LinearSystem sys = load_system(c.problem);
  const std::vector<SolverId> ids =
      solvers.empty() ? std::vector<SolverId>{c.solver} : parse_solver_list(solvers);
  const auto rows = run_sweep(sys, c, parse_index_list(p_list), ids);

  std::ostringstream text;
  if (c.format == OutputFormat::Json) {
    text << "[";
    for (std::size_t i = 0; i < rows.size(); ++i) text << (i ? ",\n" : "\n") << summary_to_json(rows[i].summary);
    text << "\n]\n";
  } else {
    write_sweep_csv(text, rows);
  }
  if (!c.out_dir.empty()) {
    fs::create_directories(c.out_dir);
    write_text(fs::path(c.out_dir) / (c.format == OutputFormat::Json ? "sweep.json" : "sweep.csv"), text.str());
  }
  std::cout << text.str();

  for (const auto& r : rows)
    if (r.summary.failures > 0) return kExitSolver;
  return kExitOk;
}

int cmd_bound(const ExperimentConfig& c) {
  require(c.scheme.kind != SchemeKind::FixedIdentity, ErrorCode::Unsupported,
          "identity sampling is deterministic; no randomized bound");
  const LinearSystem sys = load_system(c.problem);
  const SpectralSummary spectrum = spectral_quantities(sys.a);
  // same partition as trial 0
  const SamplingScheme scheme = SamplingScheme::from_spec(c.scheme, sys.a, derive_seed(trial_seed(c.seed, 0), 0));
  const BoundReport report = theoretical_bound(scheme, sys.a, c.solver_config.zeta_at(0), spectrum.sigma_min_nonzero);
  const std::string text = bound_to_json(report, spectrum, c.solver_config.max_iters) + "\n";
  if (!c.out_dir.empty()) {
    fs::create_directories(c.out_dir);
    write_text(fs::path(c.out_dir) / "bound.json", text);
    std::cout << "per_iter_factor " << format_double(report.per_iter_factor) << '\n';
  } else {
    std::cout << text;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized iterative solvers for consistent linear systems"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a Gaussian test problem");
  std::vector<double> dims;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("dims", dims, "m n rank kappa")->expected(4)->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  auto* solve_cmd = app.add_subcommand("solve", "run seeded trials of one solver");
  CommonFlags solve_flags;
  solve_flags.add(solve_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "run trials over a list of block sizes");
  CommonFlags sweep_flags;
  sweep_flags.add(sweep_cmd);
  std::string p_list, solver_list;
  sweep_cmd->add_option("--p-list", p_list, "comma separated block sizes")->required();
  sweep_cmd->add_option("--solvers", solver_list, "comma separated solver ids (default: --solver)");

  auto* bound_cmd = app.add_subcommand("bound", "report the expected-error bound");
  CommonFlags bound_flags;
  bound_flags.add(bound_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(dims, gen_seed, gen_out);
    if (solve_cmd->parsed()) return cmd_solve(solve_flags.resolve(solve_cmd));
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags.resolve(sweep_cmd), p_list, solver_list);
    if (bound_cmd->parsed()) return cmd_bound(bound_flags.resolve(bound_cmd));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
