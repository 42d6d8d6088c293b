#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ashbm/analysis.hpp"
#include "ashbm/problems.hpp"
#include "ashbm/sampling.hpp"

namespace ashbm {

enum class SolverId { Basic, ModifiedBasic, Ashbm, Scg, Mrabk, Cgne };

SolverId parse_solver_id(std::string_view name);
std::string_view to_string(SolverId id);

/// How the solvers obtain A x^k - b.
enum class ResidualMode {
  /// Keep the full residual, updated as r += A (x^{k+1} - x^k) with a fresh
  /// recomputation every `drift_check_every` iterations. Costs one product
  /// with A per iteration.
  Incremental,
  /// Evaluate only the sampled rows S^T (A x - b). The full residual norm is
  /// formed every `residual_every` iterations (0: only at the end).
  Sampled,
};

ResidualMode parse_residual_mode(std::string_view name);
std::string_view to_string(ResidualMode mode);

struct SolverConfig {
  /// Relaxation zeta_k = zeta[min(k, size - 1)], each in (0, 2).
  std::vector<double> zeta{1.0};
  Index max_iters = 1'000'000;
  double rse_tolerance = 1e-12;
  /// ||S^T r|| <= zero_test_factor * (1 + ||b||) counts as zero.
  double zero_test_factor = 1e-14;
  /// Consecutive zero draws tolerated before StalledSampling; 0 picks
  /// 100 * (number of blocks).
  Index resample_cap = 0;
  /// Fixed momentum for mRABK.
  double momentum_beta = 0.7;
  std::uint64_t seed = 0;
  ResidualMode residual_mode = ResidualMode::Incremental;
  Index residual_every = 0;
  Index drift_check_every = 1000;
  /// When false, the trace keeps only the final record.
  bool record_trace = true;
  /// When false, wall_nanos stays 0 so traces are reproducible byte for byte.
  bool record_timing = true;

  double zeta_at(Index k) const { return zeta[static_cast<std::size_t>(std::min<Index>(k, static_cast<Index>(zeta.size()) - 1))]; }
  void validate() const;

  bool operator==(const SolverConfig&) const = default;
};

struct SolverState {
  Vector x;
  Vector x_prev;
  /// Search direction p_k (SCG, CGNE); empty for the other methods.
  Vector p;
  /// A x - b at the returned iterate.
  Vector r;
  Index k = 0;
};

struct StepOutcome {
  double alpha = 0.0;
  double beta = 0.0;
  SampleOp sample;
  bool moved = false;
};

enum class SolveStatus { Converged, MaxIterations, StalledSampling, DegenerateDirection, Breakdown };

std::string_view to_string(SolveStatus status);

struct SolveResult {
  SolverState state;
  Trace trace;
  SolveStatus status = SolveStatus::MaxIterations;
  std::string message;
  /// ASHBM steps that fell back to the plain Polyak step.
  Index fallback_steps = 0;
  /// Draws discarded because S^T r was zero.
  Index rejected_draws = 0;

  bool failed() const {
    return status != SolveStatus::Converged && status != SolveStatus::MaxIterations;
  }
  /// Throws the matching Error when failed().
  void check() const;
};

/// Everything a diagnostic observer may need about one accepted step
/// x^k -> x^{k+1}. Pointers stay valid only during the callback.
struct StepEvent {
  Index k = 0;
  const SampleOp* sample = nullptr;
  const Vector* x_prev = nullptr;  // x^{k-1} (x^0 when k == 0)
  const Vector* x = nullptr;       // x^k
  const Vector* x_next = nullptr;  // x^{k+1}
  const Vector* direction = nullptr;  // p_k for SCG/CGNE, otherwise null
  double alpha = 0.0;
  double beta = 0.0;
  bool moved = false;
  bool fallback = false;
};

using StepObserver = std::function<void(const StepEvent&)>;

/// ||S^T r||^2 / ||A^T S S^T r||^2. Throws ZeroSketchResidual when
/// ||S^T r|| <= zero_threshold.
double polyak_stepsize(const SampleOp& s, const Matrix& a, const Vector& r, double zero_threshold);

/// One step of the basic method on a state whose r is current.
/// Leaves the state untouched (moved = false) when ||S^T r|| <= zero_threshold.
StepOutcome basic_step(SolverState& state, const Matrix& a, const SampleOp& s, double zeta, double zero_threshold);

/// Momentum parameters minimizing the error over x^k + span{g, d}:
///   alpha = ||d||^2 s / D,  beta = <g, d> s / D,  D = ||g||^2 ||d||^2 - <g, d>^2
/// where g = A^T S S^T r, d = x^k - x^{k-1}, s = ||S^T r||^2.
/// Throws DegenerateDirection when D <= rel_threshold * ||g||^2 ||d||^2.
struct MomentumParameters {
  double alpha = 0.0;
  double beta = 0.0;
};
inline constexpr double kDegenerateThreshold = 1e-14;
MomentumParameters ashbm_parameters(const Vector& g, const Vector& d, double s,
                                    double rel_threshold = kDegenerateThreshold);

/// tau = max_i ||A_{I_i,:}||_2^2 / ||A_{I_i,:}||_F^2 / ||A||_F^2
double compute_tau(const Partition& partition, const Matrix& a);

SolveResult solve_basic(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer = {});
SolveResult solve_modified_basic(const LinearSystem& system, const SamplingScheme& scheme,
                                 const SolverConfig& config, const StepObserver& observer = {});
SolveResult solve_ashbm(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer = {});
SolveResult solve_scg(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                      const StepObserver& observer = {});
SolveResult solve_mrabk(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer = {});
SolveResult solve_cgne(const LinearSystem& system, const SolverConfig& config,
                       const std::optional<Vector>& x0 = std::nullopt, const StepObserver& observer = {});

/// Dispatch by id; CGNE ignores the scheme.
SolveResult solve(SolverId id, const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                  const StepObserver& observer = {});

}  // namespace ashbm
