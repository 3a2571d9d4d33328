#pragma once

// Small dense linear algebra: symmetric matrices, oriented directions,
// Jacobi eigen-decomposition, Cholesky.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "nonosc/algebra.hpp"

namespace nonosc {

using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
Vec scaled(std::span<const double> a, double c);
Vec add(std::span<const double> a, std::span<const double> b);
Vec subtract(std::span<const double> a, std::span<const double> b);
/// a / |a|; throws DomainError for the zero vector.
Vec normalized(std::span<const double> a);

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Vec apply(std::span<const double> v) const;
  Vec apply_transpose(std::span<const double> v) const;
  Matrix transpose() const;
  friend Matrix operator*(const Matrix& a, const Matrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Real symmetric matrix; entry(i,j) and entry(j,i) share storage.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : data_(n, 0.0) {}
  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(std::span<const double> d);
  /// Symmetric part of a square dense matrix.
  static SymMatrix from_dense(const Matrix& m);

  std::size_t dimension() const { return data_.dimension(); }
  double& operator()(std::size_t i, std::size_t j) { return data_(i, j); }
  double operator()(std::size_t i, std::size_t j) const { return data_(i, j); }
  const std::vector<double>& packed() const { return data_.packed(); }

  /// (sum_ij s_ij^2)^(1/2), off-diagonal entries counted twice.
  double frobenius_norm() const;
  Vec apply(std::span<const double> v) const;
  double quadratic_form(std::span<const double> v) const;
  Matrix to_dense() const;

  SymMatrix scaled(double c) const;
  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
  /// Frobenius distance.
  friend double distance(const SymMatrix& a, const SymMatrix& b);

 private:
  SymmetricArray<double> data_;
};

/// Congruence A^T S A.
SymMatrix congruence(const SymMatrix& s, const Matrix& a);

/// A point of the sphere of oriented directions of symmetric matrices:
/// a symmetric matrix of unit Frobenius norm.
class OrientedDirection {
 public:
  const SymMatrix& matrix() const { return m_; }
  std::size_t dimension() const { return m_.dimension(); }

 private:
  friend OrientedDirection frobenius_normalize(const SymMatrix& s);
  explicit OrientedDirection(SymMatrix m) : m_(std::move(m)) {}
  SymMatrix m_;
};

/// S / |S|_F. Throws DomainError for the zero matrix.
OrientedDirection frobenius_normalize(const SymMatrix& s);

struct EigenDecomposition {
  Vec values;      // ascending
  Matrix vectors;  // column k is the unit eigenvector of values[k]
};

/// Cyclic Jacobi with threshold sweeps (at most 30).
EigenDecomposition eigen_decomposition(const SymMatrix& s);

/// |S v - <S v, v> v| / |S v|, or 0 when S v = 0. v must be a unit vector.
double eigen_direction_residual(const SymMatrix& s, std::span<const double> v);

/// Eigenvalues of a general real square matrix, sorted by real part then
/// imaginary part.
std::vector<std::complex<double>> general_eigenvalues(const Matrix& m);

/// Lower-triangular L with S = L L^T. Throws DomainError when S is not
/// positive definite.
Matrix cholesky(const SymMatrix& s);
/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
SymMatrix spd_inverse(const SymMatrix& s);
/// Inverse of a lower-triangular matrix.
Matrix lower_triangular_inverse(const Matrix& l);

/// Orthonormal basis of the complement of the unit vector v, as the
/// columns of an n×(n-1) matrix.
Matrix orthogonal_complement(std::span<const double> v);

}  // namespace nonosc
