#include "ashbm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ashbm/error.hpp"

namespace ashbm {

double rse(const Vector& x, const Vector& min_norm, const Vector& x0) {
  const double denom = (x0 - min_norm).squaredNorm();
  require(denom > 0.0, ErrorCode::AlreadySolved, "initial point equals the min-norm solution");
  return (x - min_norm).squaredNorm() / denom;
}

double convergence_factor(double final_rse, Index iterations) {
  require(iterations >= 1, ErrorCode::ConfigError, "convergence factor needs at least one iteration");
  require(final_rse >= 0.0, ErrorCode::ConfigError, "negative RSE");
  require(final_rse > 0.0, ErrorCode::ExactConvergence, "final RSE is exactly zero");
  return std::pow(final_rse, 1.0 / static_cast<double>(iterations));
}

std::vector<double> BoundReport::curve(Index iterations) const {
  std::vector<double> out(static_cast<std::size_t>(iterations + 1));
  for (Index k = 0; k <= iterations; ++k) out[static_cast<std::size_t>(k)] = std::pow(per_iter_factor, k);
  return out;
}

BoundReport theoretical_bound(const SamplingScheme& scheme, const Matrix& a, double zeta) {
  require(scheme.kind() != SchemeKind::FixedIdentity, ErrorCode::Unsupported,
          "identity sampling is deterministic; no randomized bound");
  return theoretical_bound(scheme, a, zeta, spectral_quantities(a).sigma_min_nonzero);
}

BoundReport theoretical_bound(const SamplingScheme& scheme, const Matrix& a, double zeta, double sigma_min_nonzero) {
  require(scheme.kind() != SchemeKind::FixedIdentity, ErrorCode::Unsupported,
          "identity sampling is deterministic; no randomized bound");
  require(zeta > 0.0 && zeta < 2.0, ErrorCode::ConfigError, "zeta must lie in (0, 2)");

  const ScaledIdentity h = expected_gram(scheme, a);
  const LambdaMax lam = lambda_max_sup(scheme, a, /*estimate_seed=*/0, /*estimate_draws=*/2000);

  BoundReport report;
  report.scheme = scheme.spec();
  report.zeta = zeta;
  report.sigma_min_sq_HA = h.scale * sigma_min_nonzero * sigma_min_nonzero;
  report.lambda_max = lam.value;
  report.is_estimate = lam.estimate;
  report.per_iter_factor = 1.0 - zeta * (2.0 - zeta) * report.sigma_min_sq_HA / report.lambda_max;
  return report;
}

std::vector<double> median_rse_curve(std::span<const Trace> traces) {
  std::size_t longest = 0;
  for (const auto& t : traces) longest = std::max(longest, t.size());
  std::vector<double> out(longest);
  std::vector<double> column(traces.size());
  for (std::size_t k = 0; k < longest; ++k) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto& t = traces[i];
      column[i] = t.empty() ? 0.0 : t[std::min(k, t.size() - 1)].rse;
    }
    out[k] = quantile(column, 0.5);
  }
  return out;
}

ContractionVerdict contraction_check(std::span<const Trace> traces, const BoundReport& report, double slack) {
  require(static_cast<Index>(traces.size()) >= kMinContractionTrials, ErrorCode::ConfigError,
          "contraction check needs at least 30 trials");
  const double floor = 100.0 * std::numeric_limits<double>::epsilon();
  const std::vector<double> median = median_rse_curve(traces);

  ContractionVerdict verdict;
  verdict.pass = true;
  for (std::size_t k = 0; k < median.size(); ++k) {
    if (!(median[k] > floor)) break;
    const double bound = std::pow(report.per_iter_factor, static_cast<double>(k));
    const double ratio = median[k] / bound;
    verdict.worst_ratio = std::max(verdict.worst_ratio, ratio);
    ++verdict.checked;
    if (median[k] > bound * (1.0 + slack) && verdict.pass) {
      verdict.pass = false;
      verdict.first_violation = static_cast<Index>(k);
    }
  }
  return verdict;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::ConfigError, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace ashbm
