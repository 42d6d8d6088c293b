#include "ashbm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace ashbm {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace {

json problem_to_json(const ProblemSource& p) {
  if (p.kind == ProblemSource::Kind::Generate) {
    return {{"kind", "generate"}, {"m", p.m}, {"n", p.n}, {"rank", p.rank}, {"kappa", p.kappa}, {"seed", p.seed}};
  }
  return {{"kind", "mtx"},
          {"matrix", p.matrix_path},
          {"rhs", p.rhs_path},
          {"solution", p.solution_path},
          {"seed", p.seed}};
}

ProblemSource problem_from_json(const json& j) {
  ProblemSource p;
  const std::string kind = j.value("kind", "generate");
  if (kind == "generate") {
    p.kind = ProblemSource::Kind::Generate;
    p.m = j.value("m", p.m);
    p.n = j.value("n", p.n);
    p.rank = j.value("rank", std::min(p.m, p.n));
    p.kappa = j.value("kappa", p.kappa);
  } else if (kind == "mtx") {
    p.kind = ProblemSource::Kind::MatrixMarket;
    p.matrix_path = j.at("matrix").get<std::string>();
    p.rhs_path = j.value("rhs", "");
    p.solution_path = j.value("solution", "");
  } else {
    throw Error(ErrorCode::ConfigError, "unknown problem kind '" + kind + "'");
  }
  p.seed = j.value("seed", p.seed);
  return p;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  const SolverConfig& s = c.solver_config;
  json j = {
      {"problem", problem_to_json(c.problem)},
      {"sampling", c.scheme.to_string()},
      {"solver", std::string(to_string(c.solver))},
      {"trials", c.trials},
      {"seed", c.seed},
      {"zeta", s.zeta},
      {"beta", s.momentum_beta},
      {"tol", s.rse_tolerance},
      {"max_iters", s.max_iters},
      {"zero_test_factor", s.zero_test_factor},
      {"resample_cap", s.resample_cap},
      {"residual", std::string(to_string(s.residual_mode))},
      {"residual_every", s.residual_every},
      {"drift_check_every", s.drift_check_every},
      {"record_trace", s.record_trace},
      {"timing", s.record_timing},
      {"out", c.out_dir},
      {"format", c.format == OutputFormat::Csv ? "csv" : "json"},
      {"threads", c.threads},
  };
  return j.dump(2);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid JSON config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
    if (j.contains("sampling")) c.scheme = SchemeSpec::parse(j.at("sampling").get<std::string>());
    if (j.contains("solver")) c.solver = parse_solver_id(j.at("solver").get<std::string>());
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    SolverConfig& s = c.solver_config;
    if (j.contains("zeta")) {
      const auto& z = j.at("zeta");
      s.zeta = z.is_array() ? z.get<std::vector<double>>() : std::vector<double>{z.get<double>()};
    }
    s.momentum_beta = j.value("beta", s.momentum_beta);
    s.rse_tolerance = j.value("tol", s.rse_tolerance);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.zero_test_factor = j.value("zero_test_factor", s.zero_test_factor);
    s.resample_cap = j.value("resample_cap", s.resample_cap);
    if (j.contains("residual")) s.residual_mode = parse_residual_mode(j.at("residual").get<std::string>());
    s.residual_every = j.value("residual_every", s.residual_every);
    s.drift_check_every = j.value("drift_check_every", s.drift_check_every);
    s.record_trace = j.value("record_trace", s.record_trace);
    s.record_timing = j.value("timing", s.record_timing);
    c.out_dir = j.value("out", c.out_dir);
    const std::string format = j.value("format", "csv");
    if (format == "csv") {
      c.format = OutputFormat::Csv;
    } else if (format == "json") {
      c.format = OutputFormat::Json;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown output format '" + format + "'");
    }
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid config field: ") + e.what());
  }
  require(c.trials >= 1, ErrorCode::ConfigError, "trials must be >= 1");
  require(c.threads >= 1, ErrorCode::ConfigError, "threads must be >= 1");
  c.solver_config.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

LinearSystem load_system(const ProblemSource& source) {
  if (source.kind == ProblemSource::Kind::Generate) {
    return generate_gaussian_problem(source.m, source.n, source.rank, source.kappa, source.seed);
  }
  Matrix a = load_matrix_market(source.matrix_path);
  LinearSystem system = source.rhs_path.empty()
                            ? consistent_system_for(std::move(a), source.seed)
                            : LinearSystem{std::move(a), load_vector(source.rhs_path), std::nullopt, std::nullopt};
  require(system.b.size() == system.a.rows(), ErrorCode::DimensionMismatch, "rhs length differs from row count");
  if (!source.solution_path.empty()) {
    Vector x = load_vector(source.solution_path);
    require(x.size() == system.a.cols(), ErrorCode::DimensionMismatch, "solution length differs from column count");
    system.consistency_residual = (matvec(system.a, x) - system.b).norm();
    require(system.consistency_residual <= kConsistencyTolerance * (1.0 + system.b.norm()),
            ErrorCode::InconsistentSystem, "supplied solution does not solve the system");
    system.min_norm = std::move(x);
  }
  return attach_min_norm(std::move(system));
}

// ---------------------------------------------------------------------------
// Trials

TrialResult run_trial(const LinearSystem& system, const ExperimentConfig& config, Index trial) {
  TrialResult out;
  out.trial = trial;
  out.seed = trial_seed(config.seed, trial);
  try {
    const SamplingScheme scheme = SamplingScheme::from_spec(config.scheme, system.a, derive_seed(out.seed, 0));
    SolverConfig sc = config.solver_config;
    sc.seed = derive_seed(out.seed, 1);
    out.result = solve(config.solver, system, scheme, sc);
  } catch (const Error& e) {
    out.error = e.code();
    out.error_message = e.what();
  }
  return out;
}

std::vector<TrialResult> run_trials(const LinearSystem& system, const ExperimentConfig& config) {
  require(config.trials >= 1 && config.threads >= 1, ErrorCode::ConfigError, "trials and threads must be >= 1");
  std::vector<TrialResult> results(static_cast<std::size_t>(config.trials));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index i = next++; i < config.trials; i = next++) results[static_cast<std::size_t>(i)] = run_trial(system, config, i);
  };
  const Index workers = std::min(config.threads, config.trials);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

Stats describe(const std::vector<double>& values) {
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan, nan};
  }
  return {quantile(values, 0.0), quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75),
          quantile(values, 1.0)};
}

namespace {

Index effective_block_size(const ExperimentConfig& config, Index rows) {
  if (config.solver == SolverId::Cgne) return rows;
  switch (config.scheme.kind) {
    case SchemeKind::FixedIdentity: return rows;
    case SchemeKind::SingleRowWeighted: return 1;
    default: return config.scheme.block_size;
  }
}

}  // namespace

ExperimentSummary summarize(const std::vector<TrialResult>& trials, const ExperimentConfig& config, Index rows) {
  ExperimentSummary s;
  s.solver = std::string(to_string(config.solver));
  s.scheme = config.solver == SolverId::Cgne ? "identity" : config.scheme.to_string();
  s.block_size = effective_block_size(config, rows);
  s.trials = static_cast<Index>(trials.size());
  std::vector<double> iters, full, final_rse, rho;
  const double work = static_cast<double>(s.block_size) / static_cast<double>(rows);
  for (const auto& t : trials) {
    if (t.error || t.result.failed()) {
      ++s.failures;
      continue;
    }
    if (t.result.status == SolveStatus::Converged) ++s.converged;
    const Index k = t.result.state.k;
    iters.push_back(static_cast<double>(k));
    full.push_back(static_cast<double>(k) * work);
    if (!t.result.trace.empty()) {
      const double r = t.result.trace.back().rse;
      final_rse.push_back(r);
      if (k >= 1 && std::isfinite(r)) rho.push_back(r > 0.0 ? convergence_factor(r, k) : 0.0);
    }
  }
  s.iterations = describe(iters);
  s.full_iterations = describe(full);
  s.final_rse = describe(final_rse);
  s.convergence_factor = describe(rho);
  return s;
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace) {
    out << r.k << ',' << format_double(r.rse) << ',' << format_double(r.residual_norm) << ','
        << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << r.wall_nanos << ',' << (r.moved ? 1 : 0)
        << '\n';
  }
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stats_json(const Stats& s) {
  return {{"min", number_or_null(s.min)},
          {"q25", number_or_null(s.q25)},
          {"median", number_or_null(s.median)},
          {"q75", number_or_null(s.q75)},
          {"max", number_or_null(s.max)}};
}

}  // namespace

void write_trace_json(std::ostream& out, const Trace& trace) {
  json rows = json::array();
  for (const auto& r : trace) {
    rows.push_back({{"k", r.k},
                    {"rse", number_or_null(r.rse)},
                    {"residual_norm", number_or_null(r.residual_norm)},
                    {"alpha", number_or_null(r.alpha)},
                    {"beta", number_or_null(r.beta)},
                    {"wall_nanos", r.wall_nanos},
                    {"moved", r.moved}});
  }
  out << rows.dump() << '\n';
}

std::string summary_to_json(const ExperimentSummary& s) {
  json j = {{"solver", s.solver},
            {"scheme", s.scheme},
            {"block_size", s.block_size},
            {"trials", s.trials},
            {"converged", s.converged},
            {"failures", s.failures},
            {"iterations", stats_json(s.iterations)},
            {"full_iterations", stats_json(s.full_iterations)},
            {"final_rse", stats_json(s.final_rse)},
            {"convergence_factor", stats_json(s.convergence_factor)}};
  return j.dump(2);
}

std::vector<SweepRow> run_sweep(const LinearSystem& system, const ExperimentConfig& config,
                                const std::vector<Index>& block_sizes, const std::vector<SolverId>& solvers) {
  require(config.scheme.kind == SchemeKind::PartitionBlock || config.scheme.kind == SchemeKind::UniformBlock,
          ErrorCode::ConfigError, "sweeps need partition or uniform sampling");
  std::vector<SweepRow> rows;
  for (Index p : block_sizes) {
    for (SolverId id : solvers) {
      ExperimentConfig c = config;
      c.scheme.block_size = p;
      c.solver = id;
      rows.push_back({id, p, summarize(run_trials(system, c), c, system.a.rows())});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << s.solver << ',' << s.scheme << ',' << r.block_size << ',' << s.trials << ',' << s.failures << ','
        << format_double(s.iterations.median) << ',' << format_double(s.iterations.q25) << ','
        << format_double(s.iterations.q75) << ',' << format_double(s.iterations.min) << ','
        << format_double(s.iterations.max) << ',' << format_double(s.full_iterations.median) << ','
        << format_double(s.full_iterations.q25) << ',' << format_double(s.full_iterations.q75) << ','
        << format_double(s.full_iterations.min) << ',' << format_double(s.full_iterations.max) << ','
        << format_double(s.convergence_factor.median) << ',' << format_double(s.final_rse.median) << '\n';
  }
}

std::string bound_to_json(const BoundReport& report, const SpectralSummary& spectrum, Index curve_length) {
  json j = {{"scheme", report.scheme.to_string()},
            {"zeta", report.zeta},
            {"sigma_min_sq_HA", report.sigma_min_sq_HA},
            {"lambda_max", report.lambda_max},
            {"per_iter_factor", report.per_iter_factor},
            {"is_estimate", report.is_estimate},
            {"spectrum",
             {{"sigma_max", spectrum.sigma_max},
              {"sigma_min_nonzero", spectrum.sigma_min_nonzero},
              {"sigma_min_all", spectrum.sigma_min_all},
              {"rank", spectrum.rank},
              {"fro_norm", spectrum.fro_norm}}},
            {"curve", report.curve(curve_length)}};
  return j.dump(2);
}

}  // namespace ashbm
