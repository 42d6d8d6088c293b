#include "ashbm/problems.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/QR>

#include "ashbm/error.hpp"
#include "ashbm/random.hpp"

namespace ashbm {

namespace {

Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& g) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
}

Vector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

LinearSystem generate_gaussian_problem(Index m, Index n, Index rank, double kappa, std::uint64_t seed) {
  require(m >= 1 && n >= 1, ErrorCode::DimensionMismatch, "dimensions must be positive");
  require(rank >= 1 && rank <= std::min(m, n), ErrorCode::InvalidRank,
          "rank " + std::to_string(rank) + " outside [1, min(m, n)]");
  require(kappa >= 1.0, ErrorCode::ConfigError, "kappa must be >= 1");

  Rng rng(seed);
  const Eigen::MatrixXd u = orthonormal_columns(gaussian_matrix(m, rank, rng));
  const Eigen::MatrixXd v = orthonormal_columns(gaussian_matrix(n, rank, rng));
  Vector d(rank);
  for (Index i = 0; i < rank; ++i) d[i] = 1.0 + (kappa - 1.0) * uniform01(rng);
  Vector x_star = gaussian_vector(n, rng);

  DenseMatrix a = u * d.asDiagonal() * v.transpose();
  Vector b = a * x_star;
  Vector min_norm = v * (v.transpose() * x_star);

  LinearSystem sys{Matrix(std::move(a)), std::move(b), std::move(x_star), std::move(min_norm)};
  sys.consistency_residual = (matvec(sys.a, *sys.min_norm) - sys.b).norm();
  return sys;
}

LinearSystem consistent_system_for(Matrix a, std::uint64_t seed) {
  Rng rng(seed);
  Vector x_star = gaussian_vector(a.cols(), rng);
  Vector b = matvec(a, x_star);
  return LinearSystem{std::move(a), std::move(b), std::move(x_star), std::nullopt};
}

LinearSystem attach_min_norm(LinearSystem system, double tol) {
  if (system.min_norm) return system;
  system.min_norm = min_norm_solution(system.a, system.b, tol);
  system.consistency_residual = (matvec(system.a, *system.min_norm) - system.b).norm();
  return system;
}

// ---------------------------------------------------------------------------
// Matrix Market

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace

Matrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty Matrix Market stream");

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (banner != "%%MatrixMarket" || object != "matrix" || symmetry.empty()) {
    throw Error(ErrorCode::ParseError, "malformed header: " + line);
  }
  if (format != "coordinate" && format != "array") throw Error(ErrorCode::ParseError, "unknown format " + format);
  if (field == "complex" || symmetry == "hermitian") throw Error(ErrorCode::Unsupported, "complex matrices");
  if (field != "real" && field != "integer" && field != "double" && field != "pattern") {
    throw Error(ErrorCode::ParseError, "unknown field " + field);
  }
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric") {
    throw Error(ErrorCode::ParseError, "unknown symmetry " + symmetry);
  }
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";
  const bool skew = symmetry == "skew-symmetric";
  if (pattern && format == "array") throw Error(ErrorCode::ParseError, "pattern field requires coordinate format");

  if (!next_data_line(in, line)) throw Error(ErrorCode::ParseError, "missing size line");
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, count = -1;
  size_line >> rows >> cols;
  if (format == "coordinate") size_line >> count;
  if (!size_line || rows < 0 || cols < 0 || (format == "coordinate" && count < 0)) {
    throw Error(ErrorCode::ParseError, "malformed size line: " + line);
  }
  if ((symmetric || skew) && rows != cols) throw Error(ErrorCode::ParseError, "symmetric matrix must be square");

  std::vector<Triplet> entries;
  auto push = [&](long long i, long long j, double v) {
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw Error(ErrorCode::ParseError, "entry index out of range");
    }
    entries.emplace_back(static_cast<Index>(i), static_cast<Index>(j), v);
    if (i != j && symmetric) entries.emplace_back(static_cast<Index>(j), static_cast<Index>(i), v);
    if (i != j && skew) entries.emplace_back(static_cast<Index>(j), static_cast<Index>(i), -v);
  };

  if (format == "coordinate") {
    entries.reserve(static_cast<std::size_t>(count) * ((symmetric || skew) ? 2 : 1));
    for (long long e = 0; e < count; ++e) {
      if (!next_data_line(in, line)) throw Error(ErrorCode::ParseError, "fewer entries than declared");
      std::istringstream entry(line);
      long long i = 0, j = 0;
      double v = 1.0;
      entry >> i >> j;
      if (!pattern) entry >> v;
      if (!entry) throw Error(ErrorCode::ParseError, "malformed entry: " + line);
      push(i - 1, j - 1, v);
    }
  } else {
    // Column-major; symmetric variants store only the lower triangle.
    for (long long j = 0; j < cols; ++j) {
      const long long first = symmetric ? j : (skew ? j + 1 : 0);
      for (long long i = first; i < rows; ++i) {
        if (!next_data_line(in, line)) throw Error(ErrorCode::ParseError, "fewer array values than declared");
        std::istringstream entry(line);
        double v = 0.0;
        if (!(entry >> v)) throw Error(ErrorCode::ParseError, "malformed value: " + line);
        if (v != 0.0) push(i, j, v);
      }
    }
  }
  return Matrix::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), entries);
}

Matrix load_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path.string());
  return read_matrix_market(in);
}

namespace {

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

}  // namespace

void write_matrix_market(std::ostream& out, const Matrix& a) {
  if (a.is_sparse()) {
    const auto& s = a.sparse();
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << ' ' << a.cols() << ' ' << s.nonZeros() << '\n';
    for (Index i = 0; i < a.rows(); ++i) {
      for (SparseMatrix::InnerIterator it(s, i); it; ++it) {
        out << (i + 1) << ' ' << (it.index() + 1) << ' ';
        write_double(out, it.value());
        out << '\n';
      }
    }
  } else {
    const auto& d = a.dense();
    out << "%%MatrixMarket matrix array real general\n";
    out << a.rows() << ' ' << a.cols() << '\n';
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index i = 0; i < a.rows(); ++i) {
        write_double(out, d(i, j));
        out << '\n';
      }
    }
  }
}

void save_matrix_market(const std::filesystem::path& path, const Matrix& a) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::ConfigError, "cannot write " + path.string());
  write_matrix_market(out, a);
}

Vector read_vector(std::istream& in) {
  std::vector<double> values;
  std::string line;
  while (next_data_line(in, line)) {
    std::istringstream ss(line);
    double v;
    if (!(ss >> v)) throw Error(ErrorCode::ParseError, "malformed vector value: " + line);
    values.push_back(v);
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

Vector load_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path.string());
  return read_vector(in);
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    write_double(out, v[i]);
    out << '\n';
  }
}

void save_vector(const std::filesystem::path& path, const Vector& v) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::ConfigError, "cannot write " + path.string());
  write_vector(out, v);
}

}  // namespace ashbm
