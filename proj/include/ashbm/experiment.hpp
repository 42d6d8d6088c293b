#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ashbm/analysis.hpp"
#include "ashbm/error.hpp"
#include "ashbm/problems.hpp"
#include "ashbm/sampling.hpp"
#include "ashbm/solvers.hpp"

namespace ashbm {

struct ProblemSource {
  enum class Kind { Generate, MatrixMarket };
  Kind kind = Kind::Generate;
  // Generate
  Index m = 100;
  Index n = 50;
  Index rank = 50;
  double kappa = 1.0;
  /// Seed of the generator, or of x* when an .mtx file comes without a rhs.
  std::uint64_t seed = 1;
  // MatrixMarket
  std::string matrix_path;
  std::string rhs_path;
  std::string solution_path;

  bool operator==(const ProblemSource&) const = default;
};

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  ProblemSource problem;
  SchemeSpec scheme{SchemeKind::PartitionBlock, 30};
  SolverId solver = SolverId::Ashbm;
  Index trials = 1;
  std::uint64_t seed = 0;
  SolverConfig solver_config;
  std::string out_dir;
  OutputFormat format = OutputFormat::Csv;
  Index threads = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the system described by `source` with A^+ b attached.
LinearSystem load_system(const ProblemSource& source);

/// Seed of trial i; the partition and the draw stream of that trial use
/// derive_seed(trial_seed(base, i), 0) and derive_seed(trial_seed(base, i), 1).
inline std::uint64_t trial_seed(std::uint64_t base, Index trial) {
  return derive_seed(base, static_cast<std::uint64_t>(trial));
}

struct TrialResult {
  Index trial = 0;
  std::uint64_t seed = 0;
  SolveResult result;
  /// Set when the trial threw (configuration or system errors).
  std::optional<ErrorCode> error;
  std::string error_message;
};

/// Runs config.trials independent solves on a pool of config.threads workers.
/// Trial i depends only on (system, config, i).
std::vector<TrialResult> run_trials(const LinearSystem& system, const ExperimentConfig& config);

/// Runs a single trial exactly as run_trials would.
TrialResult run_trial(const LinearSystem& system, const ExperimentConfig& config, Index trial);

struct Stats {
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

Stats describe(const std::vector<double>& values);

struct ExperimentSummary {
  std::string solver;
  std::string scheme;
  Index block_size = 1;
  Index trials = 0;
  Index converged = 0;
  Index failures = 0;
  Stats iterations;
  /// iterations * p / m
  Stats full_iterations;
  Stats final_rse;
  /// final_rse^(1/K) per trial; exact convergence counts as 0.
  Stats convergence_factor;
};

ExperimentSummary summarize(const std::vector<TrialResult>& trials, const ExperimentConfig& config, Index rows);

/// Trace column order: k,rse,residual_norm,alpha,beta,wall_nanos,moved
inline constexpr const char* kTraceCsvHeader = "k,rse,residual_norm,alpha,beta,wall_nanos,moved";

void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_json(std::ostream& out, const Trace& trace);
std::string summary_to_json(const ExperimentSummary& summary);

struct SweepRow {
  SolverId solver;
  Index block_size = 1;
  ExperimentSummary summary;
};

/// One row per (block size, solver). Uses config.scheme's kind with each p.
std::vector<SweepRow> run_sweep(const LinearSystem& system, const ExperimentConfig& config,
                                const std::vector<Index>& block_sizes, const std::vector<SolverId>& solvers);

inline constexpr const char* kSweepCsvHeader =
    "solver,scheme,p,trials,failures,median_iters,q25_iters,q75_iters,min_iters,max_iters,"
    "median_full_iters,q25_full_iters,q75_full_iters,min_full_iters,max_full_iters,median_rho,median_final_rse";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Bound report for the scheme instance trial 0 would use, plus its curve.
std::string bound_to_json(const BoundReport& report, const SpectralSummary& spectrum, Index curve_length);

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
std::string format_double(double v);

}  // namespace ashbm
