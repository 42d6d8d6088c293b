#include "ashbm/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "ashbm/error.hpp"

namespace ashbm {

// ---------------------------------------------------------------------------
// SchemeSpec

SchemeSpec SchemeSpec::parse(std::string_view text) {
  if (text == "row") return {SchemeKind::SingleRowWeighted, 1};
  if (text == "identity") return {SchemeKind::FixedIdentity, 1};

  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::ConfigError, "unknown sampling scheme '" + std::string(text) + "'");
  }
  const auto name = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  long long p = 0;
  auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p);
  if (ec != std::errc() || ptr != arg.data() + arg.size() || p < 1) {
    throw Error(ErrorCode::ConfigError, "invalid block size in '" + std::string(text) + "'");
  }
  if (name == "uniform") return {SchemeKind::UniformBlock, static_cast<Index>(p)};
  if (name == "partition") return {SchemeKind::PartitionBlock, static_cast<Index>(p)};
  throw Error(ErrorCode::ConfigError, "unknown sampling scheme '" + std::string(text) + "'");
}

std::string SchemeSpec::to_string() const {
  switch (kind) {
    case SchemeKind::SingleRowWeighted: return "row";
    case SchemeKind::FixedIdentity: return "identity";
    case SchemeKind::UniformBlock: return "uniform:" + std::to_string(block_size);
    case SchemeKind::PartitionBlock: return "partition:" + std::to_string(block_size);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Partitions and schemes

Partition build_partition(Index m, Index p, std::uint64_t seed) {
  if (p < 1 || p > m) {
    throw Error(ErrorCode::InvalidBlockSize,
                "block size " + std::to_string(p) + " outside [1, " + std::to_string(m) + "]");
  }
  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
  }

  const Index t = (m + p - 1) / p;
  Partition blocks(static_cast<std::size_t>(t));
  for (Index i = 0; i < t; ++i) {
    const auto begin = perm.begin() + i * p;
    const auto end = perm.begin() + std::min(m, (i + 1) * p);
    blocks[static_cast<std::size_t>(i)].assign(begin, end);
    std::sort(blocks[static_cast<std::size_t>(i)].begin(), blocks[static_cast<std::size_t>(i)].end());
  }
  return blocks;
}

void SamplingScheme::finish_weighted(const Matrix& a) {
  require(a.fro_norm_sq() > 0.0, ErrorCode::ZeroMatrix, "sampling scheme on a zero matrix");
  probabilities_.resize(partition_.size());
  scales_.resize(partition_.size());
  cumulative_.resize(partition_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < partition_.size(); ++i) {
    double block_fro_sq = 0.0;
    for (Index r : partition_[i]) block_fro_sq += a.row_norms_sq()[r];
    probabilities_[i] = block_fro_sq / a.fro_norm_sq();
    scales_[i] = block_fro_sq > 0.0 ? 1.0 / std::sqrt(block_fro_sq) : 0.0;
    running += probabilities_[i];
    cumulative_[i] = running;
  }
}

SamplingScheme SamplingScheme::single_row(const Matrix& a) {
  SamplingScheme s;
  s.kind_ = SchemeKind::SingleRowWeighted;
  s.m_ = a.rows();
  s.block_size_ = 1;
  s.partition_.resize(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) s.partition_[static_cast<std::size_t>(i)] = {i};
  s.finish_weighted(a);
  return s;
}

SamplingScheme SamplingScheme::uniform_block(const Matrix& a, Index p) {
  require(p >= 1 && p <= a.rows(), ErrorCode::InvalidBlockSize,
          "block size " + std::to_string(p) + " outside [1, " + std::to_string(a.rows()) + "]");
  require(a.fro_norm_sq() > 0.0, ErrorCode::ZeroMatrix, "sampling scheme on a zero matrix");
  SamplingScheme s;
  s.kind_ = SchemeKind::UniformBlock;
  s.m_ = a.rows();
  s.block_size_ = p;
  s.uniform_scale_ = std::sqrt(static_cast<double>(a.rows()) / static_cast<double>(p) / a.fro_norm_sq());
  return s;
}

SamplingScheme SamplingScheme::partition_block(const Matrix& a, Index p, std::uint64_t partition_seed) {
  SamplingScheme s;
  s.kind_ = SchemeKind::PartitionBlock;
  s.m_ = a.rows();
  s.block_size_ = p;
  s.partition_ = build_partition(a.rows(), p, partition_seed);
  s.finish_weighted(a);
  return s;
}

SamplingScheme SamplingScheme::partition_block(const Matrix& a, Partition partition) {
  std::vector<char> seen(static_cast<std::size_t>(a.rows()), 0);
  Index largest = 0;
  for (const auto& block : partition) {
    require(!block.empty(), ErrorCode::InvalidBlockSize, "empty partition block");
    largest = std::max(largest, static_cast<Index>(block.size()));
    for (Index r : block) {
      require(r >= 0 && r < a.rows() && !seen[static_cast<std::size_t>(r)], ErrorCode::InvalidBlockSize,
              "partition blocks must be disjoint and in range");
      seen[static_cast<std::size_t>(r)] = 1;
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }), ErrorCode::InvalidBlockSize,
          "partition must cover every row");
  SamplingScheme s;
  s.kind_ = SchemeKind::PartitionBlock;
  s.m_ = a.rows();
  s.block_size_ = largest;
  s.partition_ = std::move(partition);
  s.finish_weighted(a);
  return s;
}

SamplingScheme SamplingScheme::identity(const Matrix& a) {
  SamplingScheme s;
  s.kind_ = SchemeKind::FixedIdentity;
  s.m_ = a.rows();
  s.block_size_ = a.rows();
  return s;
}

SamplingScheme SamplingScheme::from_spec(const SchemeSpec& spec, const Matrix& a, std::uint64_t partition_seed) {
  switch (spec.kind) {
    case SchemeKind::SingleRowWeighted: return single_row(a);
    case SchemeKind::UniformBlock: return uniform_block(a, spec.block_size);
    case SchemeKind::PartitionBlock: return partition_block(a, spec.block_size, partition_seed);
    case SchemeKind::FixedIdentity: return identity(a);
  }
  throw Error(ErrorCode::Unsupported, "unknown scheme kind");
}

std::size_t SamplingScheme::block_for(double u) const {
  const double target = u * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) --it;
  // Skip zero-probability blocks that share the preceding cumulative value.
  auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  while (probabilities_[idx] == 0.0 && idx + 1 < probabilities_.size()) ++idx;
  return idx;
}

// ---------------------------------------------------------------------------
// Draws

namespace {

SampleOp draw_with(const SamplingScheme& scheme, Rng& rng, std::vector<Index>& scratch) {
  SampleOp op;
  switch (scheme.kind()) {
    case SchemeKind::FixedIdentity:
      return SampleOp::full_identity();
    case SchemeKind::SingleRowWeighted:
    case SchemeKind::PartitionBlock: {
      const std::size_t i = scheme.block_for(uniform01(rng));
      op.rows = scheme.partition()[i];
      op.scale = scheme.block_scales()[i];
      return op;
    }
    case SchemeKind::UniformBlock: {
      // Partial Fisher-Yates over a persistent permutation: any starting
      // order yields a uniform p-subset.
      const auto m = static_cast<std::size_t>(scheme.rows());
      if (scratch.size() != m) {
        scratch.resize(m);
        std::iota(scratch.begin(), scratch.end(), Index{0});
      }
      const auto p = static_cast<std::size_t>(scheme.block_size());
      for (std::size_t i = 0; i < p; ++i) {
        std::swap(scratch[i], scratch[i + uniform_below(rng, m - i)]);
      }
      op.rows.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(p));
      std::sort(op.rows.begin(), op.rows.end());
      op.scale = scheme.uniform_scale();
      return op;
    }
  }
  return op;
}

}  // namespace

SampleStream::SampleStream(const SamplingScheme& scheme, std::uint64_t seed) : scheme_(&scheme), rng_(seed) {}

SampleOp SampleStream::next() { return draw_with(*scheme_, rng_, scratch_); }

SampleOp draw_sample(const SamplingScheme& scheme, Rng& rng) {
  std::vector<Index> scratch;
  return draw_with(scheme, rng, scratch);
}

Vector apply_sample_transpose(const SampleOp& s, const Vector& v) {
  if (s.identity) return v;
  Vector out(static_cast<Index>(s.rows.size()));
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    require(s.rows[j] < v.size(), ErrorCode::DimensionMismatch, "sample row outside vector");
    out[static_cast<Index>(j)] = s.weight(j) * v[s.rows[j]];
  }
  return out;
}

Vector pullback(const SampleOp& s, const Matrix& a, const Vector& w) {
  if (s.identity) return matvec_transpose(a, w);
  require(w.size() == static_cast<Index>(s.rows.size()), ErrorCode::DimensionMismatch, "pullback weight length");
  Vector out = Vector::Zero(a.cols());
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    a.add_row(s.rows[j], s.weight(j) * w[static_cast<Index>(j)], out);
  }
  return out;
}

Vector sketch_residual(const SampleOp& s, const Matrix& a, const Vector& x, const Vector& b) {
  if (s.identity) return matvec(a, x) - b;
  Vector out;
  a.rows_dot(s.rows, x, out);
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    out[jj] = s.weight(j) * (out[jj] - b[s.rows[j]]);
  }
  return out;
}

Eigen::MatrixXd dense_sketch(const SampleOp& s, Index m) {
  if (s.identity) return Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, static_cast<Index>(s.rows.size()));
  for (std::size_t j = 0; j < s.rows.size(); ++j) out(s.rows[j], static_cast<Index>(j)) = s.weight(j);
  return out;
}

// ---------------------------------------------------------------------------
// Bound quantities

ScaledIdentity expected_gram(const SamplingScheme& scheme, const Matrix& a) {
  switch (scheme.kind()) {
    case SchemeKind::FixedIdentity:
      return {1.0, a.rows()};
    case SchemeKind::SingleRowWeighted:
    case SchemeKind::UniformBlock:
    case SchemeKind::PartitionBlock:
      return {1.0 / a.fro_norm_sq(), a.rows()};
  }
  throw Error(ErrorCode::Unsupported, "no closed-form expected Gram for this scheme");
}

double block_lambda_max(const DenseMatrix& block) {
  if (block.size() == 0) return 0.0;
  const bool wide = block.rows() <= block.cols();
  const Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(block * block.transpose())
                                    : Eigen::MatrixXd(block.transpose() * block);
  if (gram.rows() <= 64) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues().maxCoeff());
  }
  // Power iteration from a deterministic start with every component nonzero.
  Vector v = Vector::LinSpaced(gram.rows(), 1.0, 2.0).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Vector w = gram * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(next - lambda) <= 1e-10 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

double binomial(Index m, Index p) {
  p = std::min(p, m - p);
  double c = 1.0;
  for (Index i = 1; i <= p; ++i) {
    c = c * static_cast<double>(m - p + i) / static_cast<double>(i);
    if (!std::isfinite(c)) return std::numeric_limits<double>::infinity();
  }
  return std::round(c);
}

namespace {

double uniform_block_sup_exact(const Matrix& a, Index p) {
  const Index m = a.rows();
  std::vector<Index> subset(static_cast<std::size_t>(p));
  std::iota(subset.begin(), subset.end(), Index{0});
  double best = 0.0;
  while (true) {
    best = std::max(best, block_lambda_max(a.row_block(subset)));
    // Advance to the next lexicographic combination.
    Index i = p - 1;
    while (i >= 0 && subset[static_cast<std::size_t>(i)] == m - p + i) --i;
    if (i < 0) break;
    ++subset[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < p; ++j) subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

}  // namespace

LambdaMax lambda_max_sup(const SamplingScheme& scheme, const Matrix& a, std::uint64_t estimate_seed,
                         Index estimate_draws) {
  switch (scheme.kind()) {
    case SchemeKind::SingleRowWeighted:
      return {1.0, false};
    case SchemeKind::FixedIdentity:
      return {block_lambda_max(a.to_dense()), false};
    case SchemeKind::PartitionBlock: {
      double best = 0.0;
      for (std::size_t i = 0; i < scheme.partition().size(); ++i) {
        if (scheme.probabilities()[i] == 0.0) continue;
        const double s = scheme.block_scales()[i];
        best = std::max(best, s * s * block_lambda_max(a.row_block(scheme.partition()[i])));
      }
      return {best, false};
    }
    case SchemeKind::UniformBlock: {
      const Index p = scheme.block_size();
      const double factor = static_cast<double>(a.rows()) / static_cast<double>(p) / a.fro_norm_sq();
      if (binomial(a.rows(), p) <= kMaxEnumeratedSubsets) {
        return {factor * uniform_block_sup_exact(a, p), false};
      }
      SampleStream stream(scheme, estimate_seed);
      double best = 0.0;
      for (Index d = 0; d < estimate_draws; ++d) {
        const SampleOp s = stream.next();
        best = std::max(best, block_lambda_max(a.row_block(s.rows)));
      }
      return {factor * best, true};
    }
  }
  throw Error(ErrorCode::Unsupported, "lambda_max for unknown scheme");
}

}  // namespace ashbm
