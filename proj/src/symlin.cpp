#include "nonosc/symlin.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nonosc/errors.hpp"

namespace nonosc {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) {
  // scaled to avoid overflow/underflow far from the origin or very close to it
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double v : a) s += (v / scale) * (v / scale);
  return scale * std::sqrt(s);
}

Vec scaled(std::span<const double> a, double c) {
  Vec out(a.begin(), a.end());
  for (double& v : out) v *= c;
  return out;
}

Vec add(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Vec subtract(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Vec normalized(std::span<const double> a) {
  const double n = norm(a);
  if (n == 0.0) throw DomainError("cannot normalize the zero vector");
  return scaled(a, 1.0 / n);
}

// ---------------------------------------------------------------------------

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec Matrix::apply(std::span<const double> v) const {
  Vec out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
  }
  return out;
}

Vec Matrix::apply_transpose(std::span<const double> v) const {
  Vec out(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[j] += (*this)(i, j) * v[i];
  }
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix s(n);
  for (std::size_t i = 0; i < n; ++i) s(i, i) = 1.0;
  return s;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s(i, i) = d[i];
  return s;
}

SymMatrix SymMatrix::from_dense(const Matrix& m) {
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  }
  return s;
}

double SymMatrix::frobenius_norm() const {
  const std::size_t n = dimension();
  double scale = 0.0;
  for (double v : packed()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = (*this)(i, j) / scale;
      s += (i == j ? 1.0 : 2.0) * v * v;
    }
  }
  return scale * std::sqrt(s);
}

Vec SymMatrix::apply(std::span<const double> v) const {
  const std::size_t n = dimension();
  Vec out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += (*this)(i, j) * v[j];
  }
  return out;
}

double SymMatrix::quadratic_form(std::span<const double> v) const { return dot(apply(v), v); }

Matrix SymMatrix::to_dense() const {
  const std::size_t n = dimension();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (*this)(i, j);
  }
  return m;
}

SymMatrix SymMatrix::scaled(double c) const {
  SymMatrix out = *this;
  for (double& v : out.data_.packed()) v *= c;
  return out;
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  SymMatrix out = a;
  for (std::size_t k = 0; k < out.data_.packed().size(); ++k) out.data_.packed()[k] += b.data_.packed()[k];
  return out;
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) { return a + b.scaled(-1.0); }

double distance(const SymMatrix& a, const SymMatrix& b) { return (a - b).frobenius_norm(); }

SymMatrix congruence(const SymMatrix& s, const Matrix& a) {
  const Matrix product = a.transpose() * (s.to_dense() * a);
  SymMatrix out(a.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = i; j < a.cols(); ++j) out(i, j) = 0.5 * (product(i, j) + product(j, i));
  }
  return out;
}

OrientedDirection frobenius_normalize(const SymMatrix& s) {
  const double h = s.frobenius_norm();
  if (h == 0.0) throw DomainError("cannot normalize the zero matrix");
  if (!std::isfinite(h)) throw DomainError("matrix has non-finite entries");
  return OrientedDirection(s.scaled(1.0 / h));
}

// ---------------------------------------------------------------------------

EigenDecomposition eigen_decomposition(const SymMatrix& s) {
  const std::size_t n = s.dimension();
  Matrix a = s.to_dense();
  Matrix v = Matrix::identity(n);
  const double scale = s.frobenius_norm();

  for (int sweep = 0; sweep < 30; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off <= 1e-36 * scale * scale || off == 0.0) break;
    // threshold: large rotations first during the first sweeps
    const double threshold = sweep < 3 ? 0.2 * std::sqrt(off) / static_cast<double>(n * n) : 0.0;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= threshold || apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  EigenDecomposition out{Vec(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double eigen_direction_residual(const SymMatrix& s, std::span<const double> v) {
  const Vec sv = s.apply(v);
  const double len = norm(sv);
  if (len == 0.0) return 0.0;
  const double rayleigh = dot(sv, v);
  Vec perp = sv;
  for (std::size_t i = 0; i < perp.size(); ++i) perp[i] -= rayleigh * v[i];
  return std::min(1.0, norm(perp) / len);
}

std::vector<std::complex<double>> general_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("eigenvalues of a non-square matrix");
  const auto n = static_cast<Eigen::Index>(m.rows());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  if (solver.info() != Eigen::Success) throw NumericalError("QR iteration did not converge");
  std::vector<std::complex<double>> values(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(values.begin(), values.end(), [](const auto& x, const auto& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return values;
}

Matrix cholesky(const SymMatrix& s) {
  const std::size_t n = s.dimension();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw DomainError("matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

Matrix lower_triangular_inverse(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    inv(j, j) = 1.0 / l(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = 0.0;
      for (std::size_t k = j; k < i; ++k) v -= l(i, k) * inv(k, j);
      inv(i, j) = v / l(i, i);
    }
  }
  return inv;
}

SymMatrix spd_inverse(const SymMatrix& s) {
  const Matrix linv = lower_triangular_inverse(cholesky(s));
  const std::size_t n = s.dimension();
  // S^-1 = L^-T L^-1
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = 0.0;
      for (std::size_t k = std::max(i, j); k < n; ++k) v += linv(k, i) * linv(k, j);
      out(i, j) = v;
    }
  }
  return out;
}

Matrix orthogonal_complement(std::span<const double> v) {
  const std::size_t n = v.size();
  Matrix basis(n, n == 0 ? 0 : n - 1);
  std::vector<Vec> chosen{Vec(v.begin(), v.end())};
  std::size_t column = 0;
  // Gram-Schmidt over the coordinate axes, least aligned with v first
  std::vector<std::size_t> axes(n);
  std::iota(axes.begin(), axes.end(), 0);
  std::sort(axes.begin(), axes.end(), [&](std::size_t i, std::size_t j) { return std::abs(v[i]) < std::abs(v[j]); });
  for (std::size_t axis : axes) {
    if (column + 1 >= n) break;
    Vec e(n, 0.0);
    e[axis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : chosen) {
        const double c = dot(e, b);
        for (std::size_t i = 0; i < n; ++i) e[i] -= c * b[i];
      }
    }
    const double len = norm(e);
    if (len < 1e-8) continue;
    for (double& x : e) x /= len;
    for (std::size_t i = 0; i < n; ++i) basis(i, column) = e[i];
    chosen.push_back(std::move(e));
    ++column;
  }
  return basis;
}

}  // namespace nonosc
