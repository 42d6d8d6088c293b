#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ashbm/linalg.hpp"
#include "ashbm/random.hpp"

namespace ashbm {

enum class SchemeKind { SingleRowWeighted, UniformBlock, PartitionBlock, FixedIdentity };

/// Textual scheme description: `row`, `uniform:<p>`, `partition:<p>`, `identity`.
struct SchemeSpec {
  SchemeKind kind = SchemeKind::SingleRowWeighted;
  Index block_size = 1;

  static SchemeSpec parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const SchemeSpec&) const = default;
};

using Partition = std::vector<std::vector<Index>>;

/// ceil(m/p) blocks cut from a seeded uniform permutation of [0, m): the first
/// t-1 blocks hold p rows, the last holds the remainder. Rows are sorted inside
/// each block.
Partition build_partition(Index m, Index p, std::uint64_t seed);

/// One realized sketch S (m x q) stored as a row index set plus scaling:
/// column j of S is weight(j) * e_{rows[j]}.
struct SampleOp {
  std::vector<Index> rows;
  double scale = 1.0;
  /// Per-row weights; when non-empty they replace `scale`.
  std::vector<double> weights;
  bool identity = false;

  static SampleOp full_identity() {
    SampleOp s;
    s.identity = true;
    return s;
  }

  /// Number of sketch columns q.
  Index columns(Index m) const { return identity ? m : static_cast<Index>(rows.size()); }
  double weight(std::size_t j) const { return weights.empty() ? scale : weights[j]; }

  bool operator==(const SampleOp&) const = default;
};

/// A distribution over sketching matrices, bound to a particular A.
///
/// Immutable once built. PartitionBlock fixes its partition at construction.
class SamplingScheme {
 public:
  static SamplingScheme single_row(const Matrix& a);
  static SamplingScheme uniform_block(const Matrix& a, Index p);
  static SamplingScheme partition_block(const Matrix& a, Index p, std::uint64_t partition_seed);
  static SamplingScheme partition_block(const Matrix& a, Partition partition);
  static SamplingScheme identity(const Matrix& a);
  static SamplingScheme from_spec(const SchemeSpec& spec, const Matrix& a, std::uint64_t partition_seed);

  SchemeKind kind() const noexcept { return kind_; }
  Index block_size() const noexcept { return block_size_; }
  Index rows() const noexcept { return m_; }
  SchemeSpec spec() const { return {kind_, block_size_}; }

  /// Blocks for PartitionBlock; singletons for SingleRowWeighted; empty otherwise.
  const Partition& partition() const noexcept { return partition_; }
  /// Selection probability of each entry of partition().
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }
  /// Sketch scale used when partition()[i] is drawn.
  const std::vector<double>& block_scales() const noexcept { return scales_; }
  /// sqrt(m/p)/||A||_F for UniformBlock.
  double uniform_scale() const noexcept { return uniform_scale_; }

  /// Index of the block selected by a uniform variate u in [0, 1).
  std::size_t block_for(double u) const;

 private:
  SamplingScheme() = default;
  void finish_weighted(const Matrix& a);

  SchemeKind kind_ = SchemeKind::FixedIdentity;
  Index m_ = 0;
  Index block_size_ = 1;
  Partition partition_;
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
  std::vector<double> scales_;
  double uniform_scale_ = 0.0;
};

/// Independent draws from one scheme. The sequence is a pure function of
/// (scheme, seed).
class SampleStream {
 public:
  SampleStream(const SamplingScheme& scheme, std::uint64_t seed);

  SampleOp next();

 private:
  const SamplingScheme* scheme_;
  Rng rng_;
  std::vector<Index> scratch_;
};

/// One draw using a caller-owned engine.
SampleOp draw_sample(const SamplingScheme& scheme, Rng& rng);

/// S^T v
Vector apply_sample_transpose(const SampleOp& s, const Vector& v);
/// A^T (S w), touching only the rows in S.
Vector pullback(const SampleOp& s, const Matrix& a, const Vector& w);
/// S^T (A x - b) evaluated from the sampled rows only.
Vector sketch_residual(const SampleOp& s, const Matrix& a, const Vector& x, const Vector& b);
/// Explicit m x q matrix S, for small-instance checks.
Eigen::MatrixXd dense_sketch(const SampleOp& s, Index m);

/// E[S S^T] for the shipped bounded schemes, all of the form scale * I.
struct ScaledIdentity {
  double scale = 0.0;
  Index dim = 0;
  Eigen::MatrixXd dense() const { return scale * Eigen::MatrixXd::Identity(dim, dim); }
};
ScaledIdentity expected_gram(const SamplingScheme& scheme, const Matrix& a);

/// sup over the support of lambda_max(A^T S S^T A).
struct LambdaMax {
  double value = 0.0;
  /// True when UniformBlock had too many subsets to enumerate and the value
  /// is the max over randomly sampled subsets.
  bool estimate = false;
};

inline constexpr double kMaxEnumeratedSubsets = 1e5;

LambdaMax lambda_max_sup(const SamplingScheme& scheme, const Matrix& a, std::uint64_t estimate_seed = 0,
                         Index estimate_draws = 20000);

/// ||B||_2^2 = lambda_max(B B^T). Dense eigensolver when the smaller Gram side
/// is at most 64, power iteration (relative tolerance 1e-10) otherwise.
double block_lambda_max(const DenseMatrix& block);

/// C(m, p) as a double, saturating at +inf.
double binomial(Index m, Index p);

}  // namespace ashbm
