#include <cmath>
#include <sstream>

#include "ashbm/error.hpp"
#include "ashbm/experiment.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace ashbm;
using testing::Gen;

namespace {

ExperimentConfig random_config(Gen& g) {
  ExperimentConfig c;
  if (g.real(0, 1) < 0.5) {
    c.problem.m = g.size(2, 500);
    c.problem.n = g.size(2, 500);
    c.problem.rank = g.size(1, std::min(c.problem.m, c.problem.n));
    c.problem.kappa = g.real(1, 100);
  } else {
    c.problem.kind = ProblemSource::Kind::MatrixMarket;
    c.problem.matrix_path = "data/m" + std::to_string(g.size(0, 99)) + ".mtx";
    if (g.real(0, 1) < 0.5) c.problem.rhs_path = "data/b.txt";
    if (g.real(0, 1) < 0.5) c.problem.solution_path = "data/x.txt";
  }
  c.problem.seed = g.rng();
  const SchemeKind kinds[] = {SchemeKind::SingleRowWeighted, SchemeKind::UniformBlock, SchemeKind::PartitionBlock,
                              SchemeKind::FixedIdentity};
  c.scheme.kind = kinds[g.size(0, 3)];
  c.scheme.block_size = (c.scheme.kind == SchemeKind::UniformBlock || c.scheme.kind == SchemeKind::PartitionBlock)
                            ? g.size(1, 64)
                            : 1;
  c.solver = static_cast<SolverId>(g.size(0, 5));
  c.trials = g.size(1, 100);
  c.seed = g.rng();
  auto& s = c.solver_config;
  s.zeta.clear();
  for (Index i = g.size(1, 3); i > 0; --i) s.zeta.push_back(g.real(0.01, 1.99));
  s.max_iters = g.size(0, 2'000'000);
  s.rse_tolerance = std::pow(10.0, g.real(-16, -2));
  s.zero_test_factor = std::pow(10.0, g.real(-16, -10));
  s.resample_cap = g.size(0, 1000);
  s.momentum_beta = g.real(0, 0.99);
  s.residual_mode = g.real(0, 1) < 0.5 ? ResidualMode::Incremental : ResidualMode::Sampled;
  s.residual_every = g.size(0, 50);
  s.drift_check_every = g.size(1, 5000);
  s.record_trace = g.real(0, 1) < 0.8;
  s.record_timing = g.real(0, 1) < 0.5;
  c.out_dir = g.real(0, 1) < 0.5 ? "" : "out/run" + std::to_string(g.size(0, 9));
  c.format = g.real(0, 1) < 0.5 ? OutputFormat::Csv : OutputFormat::Json;
  c.threads = g.size(1, 8);
  return c;
}

ExperimentConfig small_experiment(SolverId solver, Index trials, Index threads) {
  ExperimentConfig c;
  c.problem.m = 60;
  c.problem.n = 15;
  c.problem.rank = 15;
  c.problem.kappa = 3.0;
  c.problem.seed = 4;
  c.scheme = {SchemeKind::PartitionBlock, 6};
  c.solver = solver;
  c.trials = trials;
  c.seed = 99;
  c.threads = threads;
  c.solver_config.record_timing = false;
  return c;
}

std::string csv_of(const Trace& t) {
  std::ostringstream out;
  write_trace_csv(out, t);
  return out.str();
}

}  // namespace

TEST_CASE("property: config serialization round-trips") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Gen g(seed);
    INFO("seed " << seed);
    const ExperimentConfig c = random_config(g);
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
  }
}

TEST_CASE("config parsing errors") {
  CHECK_THROWS_AS(parse_config("{"), Error);
  CHECK_THROWS_AS(parse_config(R"({"solver": "gmres"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"sampling": "blocks:3"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"zeta": 2.5})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"trials": 0})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"format": "xml"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"kind": "hdf5"}})"), Error);
  try {
    parse_config(R"({"trials": "many"})");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  const auto c = parse_config(R"({"zeta": 0.5, "solver": "cgne", "sampling": "uniform:4"})");
  CHECK(c.solver_config.zeta == std::vector<double>{0.5});
  CHECK(c.scheme == SchemeSpec{SchemeKind::UniformBlock, 4});
}

TEST_CASE("trial seeds are distinct and stable") {
  CHECK(trial_seed(0, 0) != trial_seed(0, 1));
  CHECK(trial_seed(5, 3) == derive_seed(5, 3));
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("per-trial traces do not depend on the worker count") {
  for (SolverId id : {SolverId::Ashbm, SolverId::ModifiedBasic, SolverId::Scg}) {
    const auto sys = load_system(small_experiment(id, 6, 1).problem);
    const auto one = run_trials(sys, small_experiment(id, 6, 1));
    const auto many = run_trials(sys, small_experiment(id, 6, 4));
    REQUIRE(one.size() == many.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(csv_of(one[i].result.trace) == csv_of(many[i].result.trace));
      CHECK(one[i].seed == many[i].seed);
    }
    CHECK(one[0].result.trace != one[1].result.trace);
  }
}

TEST_CASE("summary statistics") {
  const auto c = small_experiment(SolverId::Ashbm, 8, 2);
  const auto sys = load_system(c.problem);
  const auto trials = run_trials(sys, c);
  const auto s = summarize(trials, c, sys.a.rows());
  CHECK(s.trials == 8);
  CHECK(s.converged == 8);
  CHECK(s.failures == 0);
  CHECK(s.block_size == 6);
  CHECK(s.iterations.min <= s.iterations.q25);
  CHECK(s.iterations.q25 <= s.iterations.median);
  CHECK(s.iterations.median <= s.iterations.q75);
  CHECK(s.iterations.q75 <= s.iterations.max);
  CHECK(s.full_iterations.median == doctest::Approx(s.iterations.median * 6.0 / 60.0));
  CHECK(s.final_rse.max <= c.solver_config.rse_tolerance);
  CHECK(s.convergence_factor.median < 1.0);
  CHECK(summary_to_json(s) == summary_to_json(summarize(run_trials(sys, c), c, sys.a.rows())));
}

TEST_CASE("trial errors are kept per trial") {
  auto c = small_experiment(SolverId::Mrabk, 3, 1);
  c.scheme = {SchemeKind::UniformBlock, 5};
  const auto sys = load_system(c.problem);
  const auto trials = run_trials(sys, c);
  for (const auto& t : trials) {
    REQUIRE(t.error);
    CHECK(*t.error == ErrorCode::Unsupported);
  }
  CHECK(summarize(trials, c, sys.a.rows()).failures == 3);
}

TEST_CASE("CSV trace format") {
  Trace t{{0, 1.0, 2.5, 0.0, 0.0, 0, false}, {1, 0.25, std::nan(""), 1.5, -0.5, 42, true}};
  CHECK(csv_of(t) == "k,rse,residual_norm,alpha,beta,wall_nanos,moved\n0,1,2.5,0,0,0,0\n1,0.25,nan,1.5,-0.5,42,1\n");
  std::ostringstream js;
  write_trace_json(js, t);
  CHECK(js.str().find("\"residual_norm\":null") != std::string::npos);
}

TEST_CASE("sweep rows") {
  auto c = small_experiment(SolverId::Ashbm, 3, 1);
  const auto sys = load_system(c.problem);
  SUBCASE("shape") {
    const auto rows = run_sweep(sys, c, {1, 5, 12}, {SolverId::ModifiedBasic, SolverId::Ashbm});
    CHECK(rows.size() == 6);
    std::ostringstream out;
    write_sweep_csv(out, rows);
    std::string line;
    std::istringstream in(out.str());
    int count = 0;
    std::getline(in, line);
    CHECK(line == kSweepCsvHeader);
    while (std::getline(in, line)) ++count;
    CHECK(count == 6);
  }
  SUBCASE("p = 1 matches a plain solve at p = 1") {
    const auto rows = run_sweep(sys, c, {1}, {SolverId::Ashbm});
    auto single = c;
    single.scheme.block_size = 1;
    const auto direct = summarize(run_trials(sys, single), single, sys.a.rows());
    CHECK(summary_to_json(rows[0].summary) == summary_to_json(direct));
  }
  SUBCASE("needs a block scheme") {
    c.scheme = {SchemeKind::SingleRowWeighted, 1};
    CHECK_THROWS_AS(run_sweep(sys, c, {1}, {SolverId::Ashbm}), Error);
  }
}

TEST_CASE("bound report for row sampling on an orthogonal matrix") {
  Gen g(10);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.gaussian(10, 10));
  const Matrix q(DenseMatrix(qr.householderQ()));
  const auto rep = theoretical_bound(SamplingScheme::single_row(q), q, 1.0);
  const std::string js = bound_to_json(rep, spectral_quantities(q), 3);
  CHECK(js.find("\"scheme\": \"row\"") != std::string::npos);
  CHECK(js.find("\"sigma_min_all\"") != std::string::npos);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}
