#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ashbm/linalg.hpp"
#include "ashbm/sampling.hpp"

namespace ashbm {

/// Metrics of one iterate x^k.
struct TraceRecord {
  Index k = 0;
  /// ||x^k - A^+ b||^2 / ||x^0 - A^+ b||^2; NaN when A^+ b is unknown.
  double rse = 0.0;
  /// ||A x^k - b||_2; NaN on iterations where the full residual was not formed.
  double residual_norm = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t wall_nanos = 0;
  bool moved = false;

  bool operator==(const TraceRecord&) const = default;
};

using Trace = std::vector<TraceRecord>;

/// ||x - x_min||^2 / ||x0 - x_min||^2. Throws AlreadySolved when x0 == x_min.
double rse(const Vector& x, const Vector& min_norm, const Vector& x0);

/// final_rse^(1/K). Throws ExactConvergence for final_rse == 0.
double convergence_factor(double final_rse, Index iterations);

/// Per-iteration contraction factor of the expected squared error.
struct BoundReport {
  SchemeSpec scheme;
  double zeta = 1.0;
  /// sigma_min^2(H^{1/2} A), smallest nonzero singular value.
  double sigma_min_sq_HA = 0.0;
  double lambda_max = 0.0;
  /// 1 - zeta (2 - zeta) sigma_min_sq_HA / lambda_max
  double per_iter_factor = 1.0;
  bool is_estimate = false;

  /// per_iter_factor^k for k = 0..iterations.
  std::vector<double> curve(Index iterations) const;
};

/// Bound for the shipped randomized schemes (row, uniform, partition).
/// FixedIdentity is deterministic and reported as Unsupported.
BoundReport theoretical_bound(const SamplingScheme& scheme, const Matrix& a, double zeta);
/// Same, reusing a precomputed smallest nonzero singular value of A.
BoundReport theoretical_bound(const SamplingScheme& scheme, const Matrix& a, double zeta, double sigma_min_nonzero);

/// Median RSE at each iteration across trials. A finished trial contributes
/// its last value to every later iteration. Length = longest trace.
std::vector<double> median_rse_curve(std::span<const Trace> traces);

struct ContractionVerdict {
  bool pass = false;
  /// Number of iterations compared against the bound.
  Index checked = 0;
  /// First iteration that broke the bound, or -1.
  Index first_violation = -1;
  /// max over checked k of median_rse_k / factor^k.
  double worst_ratio = 0.0;
};

inline constexpr Index kMinContractionTrials = 30;
inline constexpr double kContractionSlack = 0.05;

/// Median RSE must satisfy median_k <= factor^k (1 + slack) at every k where
/// the median is above 100 * machine epsilon. Needs at least 30 trials.
ContractionVerdict contraction_check(std::span<const Trace> traces, const BoundReport& report,
                                     double slack = kContractionSlack);

/// Type-7 (linear interpolation) sample quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace ashbm
