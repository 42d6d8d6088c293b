#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ashbm/analysis.hpp"
#include "ashbm/experiment.hpp"
#include "ashbm/problems.hpp"
#include "ashbm/sampling.hpp"
#include "ashbm/solvers.hpp"

namespace py = pybind11;
using namespace ashbm;

namespace {

SolverConfig make_config(std::uint64_t seed, std::vector<double> zeta, double beta, double tol, Index max_iters,
                         const std::string& residual, bool record_trace) {
  SolverConfig c;
  c.seed = seed;
  c.zeta = std::move(zeta);
  c.momentum_beta = beta;
  c.rse_tolerance = tol;
  c.max_iters = max_iters;
  c.residual_mode = parse_residual_mode(residual);
  c.record_trace = record_trace;
  c.record_timing = false;
  c.validate();
  return c;
}

py::dict trace_columns(const Trace& trace) {
  const Index n = static_cast<Index>(trace.size());
  Eigen::VectorXd rse(n), res(n), alpha(n), beta(n);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> k(n);
  for (Index i = 0; i < n; ++i) {
    const auto& t = trace[static_cast<std::size_t>(i)];
    k[i] = t.k;
    rse[i] = t.rse;
    res[i] = t.residual_norm;
    alpha[i] = t.alpha;
    beta[i] = t.beta;
  }
  py::dict d;
  d["k"] = k;
  d["rse"] = rse;
  d["residual_norm"] = res;
  d["alpha"] = alpha;
  d["beta"] = beta;
  return d;
}

py::dict stats_dict(const Stats& s) {
  py::dict d;
  d["min"] = s.min;
  d["q25"] = s.q25;
  d["median"] = s.median;
  d["q75"] = s.q75;
  d["max"] = s.max;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ashbm, m) {
  m.doc() = "Randomized iterative solvers for consistent linear systems with adaptive heavy-ball momentum.";

  py::register_exception<Error>(m, "AshbmError", PyExc_ValueError);

  py::class_<LinearSystem>(m, "System")
      .def(py::init([](const DenseMatrix& a, const Vector& b) {
             return attach_min_norm(LinearSystem{Matrix(a), b, std::nullopt, std::nullopt});
           }),
           py::arg("a"), py::arg("b"), "Dense system; A^+ b is attached through the SVD oracle.")
      .def_property_readonly("a", [](const LinearSystem& s) { return s.a.to_dense(); })
      .def_readonly("b", &LinearSystem::b)
      .def_readonly("min_norm", &LinearSystem::min_norm)
      .def_readonly("planted_solution", &LinearSystem::planted_solution)
      .def_readonly("consistency_residual", &LinearSystem::consistency_residual)
      .def_property_readonly("shape", [](const LinearSystem& s) { return py::make_tuple(s.a.rows(), s.a.cols()); })
      .def_property_readonly("is_sparse", [](const LinearSystem& s) { return s.a.is_sparse(); });

  m.def("generate_gaussian_problem", &generate_gaussian_problem, py::arg("m"), py::arg("n"), py::arg("rank"),
        py::arg("kappa"), py::arg("seed"));

  m.def(
      "load_matrix_market",
      [](const std::string& matrix, const std::string& rhs, std::uint64_t seed) {
        ProblemSource src;
        src.kind = ProblemSource::Kind::MatrixMarket;
        src.matrix_path = matrix;
        src.rhs_path = rhs;
        src.seed = seed;
        return load_system(src);
      },
      py::arg("matrix"), py::arg("rhs") = "", py::arg("seed") = 1,
      "Reads A from a .mtx file; without a rhs file, b = A x* for a seeded Gaussian x*.");

  m.def(
      "spectral_quantities",
      [](const LinearSystem& s) {
        const auto q = spectral_quantities(s.a);
        py::dict d;
        d["sigma_max"] = q.sigma_max;
        d["sigma_min_nonzero"] = q.sigma_min_nonzero;
        d["sigma_min_all"] = q.sigma_min_all;
        d["rank"] = q.rank;
        d["fro_norm"] = q.fro_norm;
        d["condition_number"] = q.condition_number();
        return d;
      },
      py::arg("system"));

  m.def(
      "min_norm_solution", [](const DenseMatrix& a, const Vector& b) { return min_norm_solution(Matrix(a), b); },
      py::arg("a"), py::arg("b"));

  m.def("build_partition", &build_partition, py::arg("m"), py::arg("p"), py::arg("seed"));

  m.def(
      "solve",
      [](const LinearSystem& system, const std::string& solver, const std::string& sampling, std::uint64_t seed,
         std::uint64_t partition_seed, std::vector<double> zeta, double beta, double tol, Index max_iters,
         const std::string& residual, bool record_trace) {
        const SolverConfig cfg = make_config(seed, std::move(zeta), beta, tol, max_iters, residual, record_trace);
        const auto scheme = SamplingScheme::from_spec(SchemeSpec::parse(sampling), system.a, partition_seed);
        SolveResult res;
        {
          py::gil_scoped_release release;
          res = solve(parse_solver_id(solver), system, scheme, cfg);
        }
        py::dict d;
        d["x"] = res.state.x;
        d["iterations"] = res.state.k;
        d["status"] = std::string(to_string(res.status));
        d["message"] = res.message;
        d["fallback_steps"] = res.fallback_steps;
        d["rejected_draws"] = res.rejected_draws;
        d["trace"] = trace_columns(res.trace);
        return d;
      },
      py::arg("system"), py::arg("solver") = "ashbm", py::arg("sampling") = "partition:30", py::arg("seed") = 0,
      py::arg("partition_seed") = 0, py::arg("zeta") = std::vector<double>{1.0}, py::arg("beta") = 0.7,
      py::arg("tol") = 1e-12, py::arg("max_iters") = 1'000'000, py::arg("residual") = "incremental",
      py::arg("record_trace") = true);

  m.def(
      "run_experiment",
      [](const LinearSystem& system, const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        std::vector<TrialResult> trials;
        {
          py::gil_scoped_release release;
          trials = run_trials(system, cfg);
        }
        const auto s = summarize(trials, cfg, system.a.rows());
        py::dict d;
        d["solver"] = s.solver;
        d["scheme"] = s.scheme;
        d["trials"] = s.trials;
        d["converged"] = s.converged;
        d["failures"] = s.failures;
        d["iterations"] = stats_dict(s.iterations);
        d["full_iterations"] = stats_dict(s.full_iterations);
        d["final_rse"] = stats_dict(s.final_rse);
        d["convergence_factor"] = stats_dict(s.convergence_factor);
        return d;
      },
      py::arg("system"), py::arg("config_json"),
      "Runs the configured trials on `system` (the config's problem entry is ignored).");

  m.def(
      "theoretical_bound",
      [](const LinearSystem& system, const std::string& sampling, double zeta, std::uint64_t partition_seed) {
        const auto scheme = SamplingScheme::from_spec(SchemeSpec::parse(sampling), system.a, partition_seed);
        const auto r = theoretical_bound(scheme, system.a, zeta);
        py::dict d;
        d["scheme"] = r.scheme.to_string();
        d["zeta"] = r.zeta;
        d["sigma_min_sq_HA"] = r.sigma_min_sq_HA;
        d["lambda_max"] = r.lambda_max;
        d["per_iter_factor"] = r.per_iter_factor;
        d["is_estimate"] = r.is_estimate;
        return d;
      },
      py::arg("system"), py::arg("sampling"), py::arg("zeta") = 1.0, py::arg("partition_seed") = 0);

  m.def("rse", &rse, py::arg("x"), py::arg("min_norm"), py::arg("x0"));
  m.def("convergence_factor", &convergence_factor, py::arg("final_rse"), py::arg("iterations"));
}
