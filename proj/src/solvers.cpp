#include "ashbm/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "ashbm/error.hpp"

namespace ashbm {

SolverId parse_solver_id(std::string_view name) {
  if (name == "basic") return SolverId::Basic;
  if (name == "mbasic") return SolverId::ModifiedBasic;
  if (name == "ashbm") return SolverId::Ashbm;
  if (name == "scg") return SolverId::Scg;
  if (name == "mrabk") return SolverId::Mrabk;
  if (name == "cgne") return SolverId::Cgne;
  throw Error(ErrorCode::ConfigError, "unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(SolverId id) {
  switch (id) {
    case SolverId::Basic: return "basic";
    case SolverId::ModifiedBasic: return "mbasic";
    case SolverId::Ashbm: return "ashbm";
    case SolverId::Scg: return "scg";
    case SolverId::Mrabk: return "mrabk";
    case SolverId::Cgne: return "cgne";
  }
  return "?";
}

ResidualMode parse_residual_mode(std::string_view name) {
  if (name == "incremental" || name == "full") return ResidualMode::Incremental;
  if (name == "sampled") return ResidualMode::Sampled;
  throw Error(ErrorCode::ConfigError, "unknown residual mode '" + std::string(name) + "'");
}

std::string_view to_string(ResidualMode mode) {
  return mode == ResidualMode::Incremental ? "incremental" : "sampled";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::StalledSampling: return "stalled_sampling";
    case SolveStatus::DegenerateDirection: return "degenerate_direction";
    case SolveStatus::Breakdown: return "breakdown";
  }
  return "?";
}

void SolverConfig::validate() const {
  require(!zeta.empty(), ErrorCode::ConfigError, "zeta schedule is empty");
  for (double z : zeta) require(z > 0.0 && z < 2.0, ErrorCode::ConfigError, "zeta must lie in (0, 2)");
  require(max_iters >= 0, ErrorCode::ConfigError, "max_iters must be non-negative");
  require(rse_tolerance > 0.0, ErrorCode::ConfigError, "rse tolerance must be positive");
  require(zero_test_factor > 0.0, ErrorCode::ConfigError, "zero test factor must be positive");
  require(resample_cap >= 0 && residual_every >= 0, ErrorCode::ConfigError, "counts must be non-negative");
  require(drift_check_every >= 1, ErrorCode::ConfigError, "drift check interval must be positive");
  require(momentum_beta >= 0.0 && momentum_beta < 1.0, ErrorCode::ConfigError, "momentum beta must lie in [0, 1)");
}

void SolveResult::check() const {
  switch (status) {
    case SolveStatus::StalledSampling: throw Error(ErrorCode::StalledSampling, message);
    case SolveStatus::DegenerateDirection: throw Error(ErrorCode::DegenerateDirection, message);
    case SolveStatus::Breakdown: throw Error(ErrorCode::Breakdown, message);
    default: break;
  }
}

// ---------------------------------------------------------------------------
// Step primitives

double polyak_stepsize(const SampleOp& s, const Matrix& a, const Vector& r, double zero_threshold) {
  const Vector w = apply_sample_transpose(s, r);
  const double wn = w.norm();
  if (!(wn > zero_threshold)) throw Error(ErrorCode::ZeroSketchResidual, "S^T r is numerically zero");
  const Vector g = pullback(s, a, w);
  return (wn * wn) / g.squaredNorm();
}

StepOutcome basic_step(SolverState& state, const Matrix& a, const SampleOp& s, double zeta, double zero_threshold) {
  StepOutcome out;
  out.sample = s;
  const Vector w = apply_sample_transpose(s, state.r);
  const double s_sq = w.squaredNorm();
  if (!(std::sqrt(s_sq) > zero_threshold)) return out;

  const Vector g = pullback(s, a, w);
  out.alpha = (2.0 - zeta) * s_sq / g.squaredNorm();
  out.moved = true;
  state.x_prev = state.x;
  state.x.noalias() -= out.alpha * g;
  state.r.noalias() += matvec(a, state.x - state.x_prev);
  ++state.k;
  return out;
}

MomentumParameters ashbm_parameters(const Vector& g, const Vector& d, double s, double rel_threshold) {
  const double gg = g.squaredNorm();
  const double dd = d.squaredNorm();
  const double gd = g.dot(d);
  const double det = gg * dd - gd * gd;
  if (!(det > rel_threshold * gg * dd)) {
    throw Error(ErrorCode::DegenerateDirection, "gradient and previous step are numerically parallel");
  }
  return {dd * s / det, gd * s / det};
}

double compute_tau(const Partition& partition, const Matrix& a) {
  require(a.fro_norm_sq() > 0.0, ErrorCode::ZeroMatrix, "tau of a zero matrix");
  double best = 0.0;
  for (const auto& block : partition) {
    double fro_sq = 0.0;
    for (Index r : block) fro_sq += a.row_norms_sq()[r];
    if (fro_sq == 0.0) continue;
    best = std::max(best, block_lambda_max(a.row_block(block)) / fro_sq);
  }
  return best / a.fro_norm_sq();
}

// ---------------------------------------------------------------------------
// Shared run bookkeeping: residual tracking, termination and trace emission.

namespace {

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(const LinearSystem& system, const SolverConfig& config, ResidualMode mode, Vector x0)
      : a_(system.a), b_(system.b), cfg_(config), mode_(mode), x_(std::move(x0)) {
    config.validate();
    require(b_.size() == a_.rows(), ErrorCode::DimensionMismatch, "rhs length differs from row count");
    require(x_.size() == a_.cols(), ErrorCode::DimensionMismatch, "initial point length differs from column count");
    x_prev_ = x_;
    b_inf_ = b_.lpNorm<Eigen::Infinity>();
    zero_threshold_ = cfg_.zero_test_factor * (1.0 + b_.norm());
    if (system.min_norm) {
      min_norm_ = &*system.min_norm;
      rse_denom_ = (x_ - *min_norm_).squaredNorm();
    }
    residual_every_ = cfg_.residual_every;
    if (mode_ == ResidualMode::Sampled && residual_every_ == 0 && !min_norm_) residual_every_ = 100;

    r_ = matvec(a_, x_) - b_;
    const double r_norm = r_.norm();
    const double rse0 = current_rse();
    record({0, rse0, r_norm, 0.0, 0.0, 0, false});
    if (residual_small(r_) || rse0 == 0.0) {
      result_.status = SolveStatus::Converged;
      done_ = true;
    } else if (cfg_.max_iters == 0) {
      done_ = true;
    }
    tick_ = Clock::now();
  }

  bool done() const { return done_; }
  Index k() const { return k_; }
  const Vector& x() const { return x_; }
  const Vector& x_prev() const { return x_prev_; }
  double zero_threshold() const { return zero_threshold_; }
  const Matrix& a() const { return a_; }
  /// Full residual; only meaningful in incremental mode.
  const Vector& residual() const { return r_; }

  /// S^T (A x^k - b)
  Vector sketch(const SampleOp& s) const {
    if (mode_ == ResidualMode::Incremental) return apply_sample_transpose(s, r_);
    return sketch_residual(s, a_, x_, b_);
  }

  /// S^T (A x^{k-1} - b)
  Vector sketch_previous(const SampleOp& s) const {
    if (mode_ == ResidualMode::Incremental) return apply_sample_transpose(s, r_prev_);
    return sketch_residual(s, a_, x_prev_, b_);
  }

  struct Draw {
    SampleOp sample;
    Vector sketched;
  };

  /// Redraws until S^T r^k is nonzero. On exhausting the cap the run ends:
  /// converged if the true residual is negligible, stalled otherwise.
  std::optional<Draw> draw_nonzero(SampleStream& stream, Index cap) {
    for (Index attempt = 0; attempt < cap; ++attempt) {
      Draw d{stream.next(), {}};
      d.sketched = sketch(d.sample);
      if (d.sketched.norm() > zero_threshold_) return d;
      ++result_.rejected_draws;
    }
    const Vector r = matvec(a_, x_) - b_;
    if (residual_small(r) || r.norm() <= zero_threshold_) {
      result_.status = SolveStatus::Converged;
    } else {
      fail(SolveStatus::StalledSampling,
           std::to_string(cap) + " consecutive draws with S^T r = 0 while ||r|| = " + std::to_string(r.norm()));
    }
    done_ = true;
    return std::nullopt;
  }

  /// Accepts x^{k+1}. `residual_hint`, when given, is A x^{k+1} - b computed
  /// by the caller's own recursion (CGNE).
  void advance(Vector x_next, double alpha, double beta, bool moved, const Vector* residual_hint = nullptr) {
    if (mode_ == ResidualMode::Incremental) {
      r_prev_ = r_;
      if (residual_hint) {
        r_ = *residual_hint;
      } else if (moved) {
        r_.noalias() += matvec(a_, x_next - x_);
      }
    }
    x_prev_ = std::move(x_);
    x_ = std::move(x_next);
    ++k_;

    double r_norm = std::numeric_limits<double>::quiet_NaN();
    bool residual_converged = false;
    if (mode_ == ResidualMode::Incremental) {
      if (k_ % cfg_.drift_check_every == 0) r_ = matvec(a_, x_) - b_;
      r_norm = r_.norm();
      residual_converged = residual_small(r_);
    } else if (residual_every_ > 0 && k_ % residual_every_ == 0) {
      const Vector r = matvec(a_, x_) - b_;
      r_norm = r.norm();
      residual_converged = residual_small(r);
    }

    const double rse_k = current_rse();
    const auto now = Clock::now();
    const std::int64_t nanos =
        cfg_.record_timing ? std::chrono::duration_cast<std::chrono::nanoseconds>(now - tick_).count() : 0;
    tick_ = now;
    record({k_, rse_k, r_norm, alpha, beta, nanos, moved});

    if (rse_k <= cfg_.rse_tolerance || residual_converged) {
      result_.status = SolveStatus::Converged;
      done_ = true;
    } else if (k_ >= cfg_.max_iters) {
      result_.status = SolveStatus::MaxIterations;
      done_ = true;
    }
  }

  void fail(SolveStatus status, std::string message) {
    result_.status = status;
    result_.message = std::move(message);
    done_ = true;
  }

  /// Ends the run as converged, for callers with their own zero test.
  void converge() {
    result_.status = SolveStatus::Converged;
    done_ = true;
  }

  void count_fallback() { ++result_.fallback_steps; }

  SolveResult finish(Vector direction = {}) {
    result_.state.r = matvec(a_, x_) - b_;
    result_.state.x = std::move(x_);
    result_.state.x_prev = std::move(x_prev_);
    result_.state.p = std::move(direction);
    result_.state.k = k_;
    if (!cfg_.record_trace) result_.trace.assign(1, last_);
    return std::move(result_);
  }

 private:
  void record(const TraceRecord& rec) {
    last_ = rec;
    if (cfg_.record_trace) result_.trace.push_back(rec);
  }

  double current_rse() const {
    if (!min_norm_) return std::numeric_limits<double>::quiet_NaN();
    if (rse_denom_ == 0.0) return 0.0;
    return (x_ - *min_norm_).squaredNorm() / rse_denom_;
  }

  bool residual_small(const Vector& r) const {
    return r.lpNorm<Eigen::Infinity>() <= cfg_.rse_tolerance * (1.0 + b_inf_);
  }

  const Matrix& a_;
  const Vector& b_;
  const SolverConfig& cfg_;
  ResidualMode mode_;
  Vector x_;
  Vector x_prev_;
  Vector r_;
  Vector r_prev_;
  const Vector* min_norm_ = nullptr;
  TraceRecord last_;
  double rse_denom_ = 0.0;
  double b_inf_ = 0.0;
  double zero_threshold_ = 0.0;
  Index residual_every_ = 0;
  Index k_ = 0;
  bool done_ = false;
  Clock::time_point tick_;
  SolveResult result_;
};

Index resample_cap(const SamplingScheme& scheme, const SolverConfig& cfg) {
  if (cfg.resample_cap > 0) return cfg.resample_cap;
  switch (scheme.kind()) {
    case SchemeKind::FixedIdentity: return 1;
    case SchemeKind::UniformBlock:
      return 100 * ((scheme.rows() + scheme.block_size() - 1) / scheme.block_size());
    default: return 100 * static_cast<Index>(scheme.partition().size());
  }
}

void check_scheme(const LinearSystem& system, const SamplingScheme& scheme) {
  require(scheme.rows() == system.a.rows(), ErrorCode::DimensionMismatch, "scheme built for a different row count");
}

Vector zero_start(const LinearSystem& system) { return Vector::Zero(system.a.cols()); }

void notify(const StepObserver& observer, Index k, const SampleOp& s, const Vector& x_prev, const Vector& x,
            const Vector& x_next, const Vector* direction, double alpha, double beta, bool moved, bool fallback) {
  if (!observer) return;
  StepEvent e;
  e.k = k;
  e.sample = &s;
  e.x_prev = &x_prev;
  e.x = &x;
  e.x_next = &x_next;
  e.direction = direction;
  e.alpha = alpha;
  e.beta = beta;
  e.moved = moved;
  e.fallback = fallback;
  observer(e);
}

/// x^k - (2 - zeta) L_adap g with g = A^T S w, w = S^T r^k.
struct PolyakStep {
  Vector g;
  double s = 0.0;
  double alpha = 0.0;
};

PolyakStep polyak_step(const SampleOp& sample, const Matrix& a, const Vector& w, double zeta) {
  PolyakStep step;
  step.g = pullback(sample, a, w);
  step.s = w.squaredNorm();
  step.alpha = (2.0 - zeta) * step.s / step.g.squaredNorm();
  return step;
}

}  // namespace

// ---------------------------------------------------------------------------
// Solvers

SolveResult solve_basic(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer) {
  check_scheme(system, scheme);
  Run run(system, config, config.residual_mode, zero_start(system));
  SampleStream stream(scheme, config.seed);
  while (!run.done()) {
    const SampleOp sample = stream.next();
    const Vector w = run.sketch(sample);
    if (w.norm() > run.zero_threshold()) {
      const PolyakStep step = polyak_step(sample, run.a(), w, config.zeta_at(run.k()));
      Vector x_next = run.x() - step.alpha * step.g;
      notify(observer, run.k(), sample, run.x_prev(), run.x(), x_next, nullptr, step.alpha, 0.0, true, false);
      run.advance(std::move(x_next), step.alpha, 0.0, true);
    } else {
      Vector x_next = run.x();
      notify(observer, run.k(), sample, run.x_prev(), run.x(), x_next, nullptr, 0.0, 0.0, false, false);
      run.advance(std::move(x_next), 0.0, 0.0, false);
    }
  }
  return run.finish();
}

SolveResult solve_modified_basic(const LinearSystem& system, const SamplingScheme& scheme,
                                 const SolverConfig& config, const StepObserver& observer) {
  check_scheme(system, scheme);
  Run run(system, config, config.residual_mode, zero_start(system));
  SampleStream stream(scheme, config.seed);
  const Index cap = resample_cap(scheme, config);
  while (!run.done()) {
    auto drawn = run.draw_nonzero(stream, cap);
    if (!drawn) break;
    const PolyakStep step = polyak_step(drawn->sample, run.a(), drawn->sketched, config.zeta_at(run.k()));
    Vector x_next = run.x() - step.alpha * step.g;
    notify(observer, run.k(), drawn->sample, run.x_prev(), run.x(), x_next, nullptr, step.alpha, 0.0, true, false);
    run.advance(std::move(x_next), step.alpha, 0.0, true);
  }
  return run.finish();
}

SolveResult solve_ashbm(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer) {
  check_scheme(system, scheme);
  Run run(system, config, config.residual_mode, zero_start(system));
  SampleStream stream(scheme, config.seed);
  const Index cap = resample_cap(scheme, config);
  while (!run.done()) {
    auto drawn = run.draw_nonzero(stream, cap);
    if (!drawn) break;
    // The first step, and any step whose search plane collapses, is the
    // zeta = 1 Polyak step.
    const PolyakStep step = polyak_step(drawn->sample, run.a(), drawn->sketched, 1.0);
    double alpha = step.alpha;
    double beta = 0.0;
    bool fallback = false;
    Vector x_next;
    if (run.k() == 0) {
      x_next = run.x() - alpha * step.g;
    } else {
      const Vector d = run.x() - run.x_prev();
      try {
        const MomentumParameters mp = ashbm_parameters(step.g, d, step.s);
        alpha = mp.alpha;
        beta = mp.beta;
        x_next = run.x() - alpha * step.g + beta * d;
      } catch (const Error&) {
        fallback = true;
        run.count_fallback();
        x_next = run.x() - alpha * step.g;
      }
    }
    notify(observer, run.k(), drawn->sample, run.x_prev(), run.x(), x_next, nullptr, alpha, beta, true, fallback);
    run.advance(std::move(x_next), alpha, beta, true);
  }
  return run.finish();
}

SolveResult solve_scg(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                      const StepObserver& observer) {
  check_scheme(system, scheme);
  Run run(system, config, config.residual_mode, zero_start(system));
  SampleStream stream(scheme, config.seed);
  const Index cap = resample_cap(scheme, config);
  if (run.done()) return run.finish();

  auto drawn = run.draw_nonzero(stream, cap);
  if (!drawn) return run.finish();
  SampleOp sample = std::move(drawn->sample);
  double sketched_sq = drawn->sketched.squaredNorm();
  Vector p = -pullback(sample, run.a(), drawn->sketched);
  double eta = 0.0;

  while (true) {
    const double p_sq = p.squaredNorm();
    if (!(p_sq > 0.0)) {
      run.fail(SolveStatus::DegenerateDirection, "search direction vanished with nonzero residual");
      break;
    }
    const double delta = sketched_sq / p_sq;
    Vector x_next = run.x() + delta * p;
    notify(observer, run.k(), sample, run.x_prev(), run.x(), x_next, &p, delta, eta, true, false);
    run.advance(std::move(x_next), delta, eta, true);
    if (run.done()) break;

    drawn = run.draw_nonzero(stream, cap);
    if (!drawn) break;
    // eta_k = (||S'r^{k+1}||^2 - <S'r^{k+1}, S'r^k>) / ||S_k' r^k||^2, with S = S_{k+1}
    const Vector& next_sketch = drawn->sketched;
    const Vector prev_sketch = run.sketch_previous(drawn->sample);
    eta = (next_sketch.squaredNorm() - next_sketch.dot(prev_sketch)) / sketched_sq;
    p = -pullback(drawn->sample, run.a(), next_sketch) + eta * p;
    sketched_sq = next_sketch.squaredNorm();
    sample = std::move(drawn->sample);
  }
  return run.finish(std::move(p));
}

SolveResult solve_mrabk(const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                        const StepObserver& observer) {
  check_scheme(system, scheme);
  require(scheme.kind() == SchemeKind::PartitionBlock || scheme.kind() == SchemeKind::SingleRowWeighted,
          ErrorCode::Unsupported, "mRABK needs partition sampling");
  Run run(system, config, config.residual_mode, zero_start(system));
  SampleStream stream(scheme, config.seed);
  const double alpha = 1.0 / (compute_tau(scheme.partition(), system.a) * system.a.fro_norm_sq());
  const double beta = config.momentum_beta;
  while (!run.done()) {
    const SampleOp sample = stream.next();
    const Vector w = run.sketch(sample);
    Vector x_next = run.x() - alpha * pullback(sample, run.a(), w) + beta * (run.x() - run.x_prev());
    const bool moved = x_next != run.x();
    notify(observer, run.k(), sample, run.x_prev(), run.x(), x_next, nullptr, alpha, beta, moved, false);
    run.advance(std::move(x_next), alpha, beta, moved);
  }
  return run.finish();
}

SolveResult solve_cgne(const LinearSystem& system, const SolverConfig& config, const std::optional<Vector>& x0,
                       const StepObserver& observer) {
  Run run(system, config, ResidualMode::Incremental, x0 ? *x0 : zero_start(system));
  const Matrix& a = system.a;
  const SampleOp identity = SampleOp::full_identity();
  Vector p = -matvec_transpose(a, run.residual());
  double r_sq = run.residual().squaredNorm();
  double tau = 0.0;
  while (!run.done()) {
    const double p_sq = p.squaredNorm();
    if (!(p_sq > 0.0)) {
      run.fail(SolveStatus::Breakdown, "CGNE direction vanished with residual " + std::to_string(std::sqrt(r_sq)));
      break;
    }
    const double mu = r_sq / p_sq;
    Vector x_next = run.x() + mu * p;
    const Vector r_next = run.residual() + mu * matvec(a, p);
    notify(observer, run.k(), identity, run.x_prev(), run.x(), x_next, &p, mu, tau, true, false);
    run.advance(std::move(x_next), mu, tau, true, &r_next);
    if (run.done()) break;
    // advance() may have replaced the residual by a fresh A x - b.
    const double r_next_sq = run.residual().squaredNorm();
    // Past round-off level the recursion only amplifies noise.
    if (std::sqrt(r_next_sq) <= run.zero_threshold()) {
      run.converge();
      break;
    }
    tau = r_next_sq / r_sq;
    p = -matvec_transpose(a, run.residual()) + tau * p;
    r_sq = r_next_sq;
  }
  return run.finish(std::move(p));
}

SolveResult solve(SolverId id, const LinearSystem& system, const SamplingScheme& scheme, const SolverConfig& config,
                  const StepObserver& observer) {
  switch (id) {
    case SolverId::Basic: return solve_basic(system, scheme, config, observer);
    case SolverId::ModifiedBasic: return solve_modified_basic(system, scheme, config, observer);
    case SolverId::Ashbm: return solve_ashbm(system, scheme, config, observer);
    case SolverId::Scg: return solve_scg(system, scheme, config, observer);
    case SolverId::Mrabk: return solve_mrabk(system, scheme, config, observer);
    case SolverId::Cgne: return solve_cgne(system, config, std::nullopt, observer);
  }
  throw Error(ErrorCode::Unsupported, "unknown solver id");
}

}  // namespace ashbm
