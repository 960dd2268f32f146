#pragma once

// Dense linear algebra for the small matrices that show up as decoders,
// Jacobians and SVD factors (a few rows, at most a dozen columns).

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace orthovae::linalg {

/// Dense row-major matrix of doubles.
///
/// A default-constructed Matrix is an empty placeholder; every matrix built
/// with explicit dimensions has rows >= 1 and cols >= 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  /// Rectangular diagonal: entry (i, i) = diag[i] for i < min(rows, cols).
  static Matrix diagonal(std::size_t rows, std::size_t cols, std::span<const double> diag);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * cols_, cols_};
  }
  std::vector<double> column(std::size_t j) const;
  double column_norm(std::size_t j) const;

  /// Reshape without touching entries; rows * cols must equal size().
  void reshape(std::size_t rows, std::size_t cols);
  /// Resize to rows x cols, discarding contents when the shape changes.
  void resize(std::size_t rows, std::size_t cols);

  Matrix transpose() const;
  /// Columns listed in `idx`, in that order.
  Matrix select_columns(std::span<const std::size_t> idx) const;

  double frobenius_norm() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

/// a^T a
Matrix gram(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);
/// ||Q^T Q - I||_F
double orthogonality_defect(const Matrix& q);

// ---------------------------------------------------------------------------
// Decompositions

/// Thin SVD: m = u * diag(sigma) * v^T with k = min(rows, cols),
/// u rows x k, v cols x k, sigma non-increasing.
struct SvdFactors {
  Matrix u;
  std::vector<double> sigma;
  Matrix v;

  Matrix reconstruct() const;
};

/// One-sided (Hestenes) Jacobi SVD. Throws NumericalError when the sweep cap
/// is hit or the input is not finite.
SvdFactors svd(const Matrix& m);

/// Singular values only, non-increasing.
std::vector<double> singular_values(const Matrix& m);

/// Product of the singular values. Throws DegenerateError when the smallest
/// singular value is below kRankRelative times the largest.
double psdet(const Matrix& m);

struct SymmetricEigen {
  std::vector<double> values;  // non-increasing
  Matrix vectors;              // column j pairs with values[j]
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymmetricEigen symmetric_eigen(const Matrix& sym);

/// Lower-triangular L with positive diagonal and L L^T = spd. Throws
/// DegenerateError for non-symmetric or non-positive-definite input.
Matrix cholesky_factor(const Matrix& spd);

/// Solves L x = b for lower-triangular L.
std::vector<double> solve_lower(const Matrix& lower, std::span<const double> b);

/// Determinant via partial-pivot LU.
double determinant(const Matrix& square);

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of diag(R) fixed positive.
Matrix random_orthogonal(std::size_t dim, std::uint64_t seed);

/// Counter-clockwise rotation by theta radians.
Matrix rotation_2d(double theta);

/// Right-handed rotation by `angle` about `axis` (normalized internally).
Matrix rotation_about_axis(std::span<const double> axis, double angle);

}  // namespace orthovae::linalg
