#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/linalg.hpp"
#include "orthovae/tolerances.hpp"

namespace orthovae::linalg {

namespace {

double dot_columns(const Matrix& a, std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, p) * a(i, q);
  return s;
}

void rotate_columns(Matrix& a, std::size_t p, std::size_t q, double c, double s) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double ap = a(i, p);
    const double aq = a(i, q);
    a(i, p) = c * ap - s * aq;
    a(i, q) = s * ap + c * aq;
  }
}

// Fills column j of q with a unit vector orthogonal to columns [0, j).
void complete_column(Matrix& q, std::size_t j) {
  const std::size_t n = q.rows();
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<double> v(n, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += q(i, k) * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * q(i, k);
      }
    }
    const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (nv > best_norm) {
      best_norm = nv;
      best = std::move(v);
    }
  }
  for (std::size_t i = 0; i < n; ++i) q(i, j) = best[i] / best_norm;
}

// Tall case (rows >= cols).
SvdFactors svd_tall(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t d = m.cols();
  Matrix a = m;
  Matrix v = Matrix::identity(d);

  bool converged = false;
  for (int sweep = 0; sweep < tol::kSvdMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double alpha = dot_columns(a, p, p);
        const double beta = dot_columns(a, q, q);
        const double gamma = dot_columns(a, p, q);
        if (gamma == 0.0 || std::abs(gamma) <= tol::kSvdOffDiagonal * std::sqrt(alpha * beta)) {
          continue;
        }
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        rotate_columns(a, p, q, c, s);
        rotate_columns(v, p, q, c, s);
      }
    }
  }
  if (!converged) {
    throw NumericalError("svd: no convergence after " + std::to_string(tol::kSvdMaxSweeps) +
                         " sweeps");
  }

  std::vector<double> norms(d);
  for (std::size_t j = 0; j < d; ++j) norms[j] = a.column_norm(j);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdFactors f{Matrix(n, d), std::vector<double>(d), Matrix(d, d)};
  const double smax = norms[order[0]];
  const double null_cut = smax * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t j = order[k];
    f.sigma[k] = norms[j];
    for (std::size_t i = 0; i < d; ++i) f.v(i, k) = v(i, j);
    if (norms[j] > null_cut && norms[j] > 0.0) {
      for (std::size_t i = 0; i < n; ++i) f.u(i, k) = a(i, j) / norms[j];
    } else {
      complete_column(f.u, k);
    }
  }
  return f;
}

}  // namespace

Matrix SvdFactors::reconstruct() const {
  Matrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= sigma[k];
  return us * v.transpose();
}

SvdFactors svd(const Matrix& m) {
  if (m.empty()) throw ShapeError("svd: empty matrix");
  if (!m.all_finite()) throw NumericalError("svd: non-finite input");
  if (m.rows() >= m.cols()) return svd_tall(m);
  // m^T = U' S V'^T  =>  m = V' S U'^T
  SvdFactors t = svd_tall(m.transpose());
  return SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

std::vector<double> singular_values(const Matrix& m) { return svd(m).sigma; }

double psdet(const Matrix& m) {
  const std::vector<double> s = singular_values(m);
  if (m.rows() < m.cols()) throw DegenerateError("psdet: matrix has more columns than rows");
  if (s.front() == 0.0 || s.back() <= tol::kRankRelative * s.front()) {
    throw DegenerateError("psdet: matrix is not of full column rank");
  }
  double p = 1.0;
  for (double v : s) p *= v;
  return p;
}

SymmetricEigen symmetric_eigen(const Matrix& sym) {
  if (sym.rows() != sym.cols()) throw ShapeError("symmetric_eigen: matrix not square");
  if (!sym.all_finite()) throw NumericalError("symmetric_eigen: non-finite input");
  const std::size_t n = sym.rows();
  Matrix a = sym;
  Matrix v = Matrix::identity(n);
  const double scale = std::max(a.frobenius_norm(), std::numeric_limits<double>::min());

  bool converged = false;
  for (int sweep = 0; sweep < tol::kEigenMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol::kEigenOffDiagonal * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        rotate_columns(v, p, q, c, s);
      }
    }
  }
  if (!converged) throw NumericalError("symmetric_eigen: no convergence");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

Matrix cholesky_factor(const Matrix& spd) {
  if (spd.rows() != spd.cols()) throw ShapeError("cholesky_factor: matrix not square");
  if (!spd.all_finite()) throw DegenerateError("cholesky_factor: non-finite input");
  const std::size_t n = spd.rows();
  double amax = 0.0;
  for (double v : spd.values()) amax = std::max(amax, std::abs(v));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(spd(i, j) - spd(j, i)) > tol::kSymmetry * std::max(1.0, amax)) {
        throw DegenerateError("cholesky_factor: matrix is not symmetric");
      }
    }
  }
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw DegenerateError("cholesky_factor: matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      // lower triangle read symmetrically from the averaged input
      double s = 0.5 * (spd(i, j) + spd(j, i));
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

std::vector<double> solve_lower(const Matrix& lower, std::span<const double> b) {
  if (lower.rows() != lower.cols() || lower.rows() != b.size()) {
    throw ShapeError("solve_lower: dimension mismatch");
  }
  const std::size_t n = b.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x[k];
    if (lower(i, i) == 0.0) throw DegenerateError("solve_lower: zero pivot");
    x[i] = s / lower(i, i);
  }
  return x;
}

double determinant(const Matrix& square) {
  if (square.rows() != square.cols()) throw ShapeError("determinant: matrix not square");
  const std::size_t n = square.rows();
  Matrix a = square;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
      det = -det;
    }
    det *= a(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return det;
}

Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ShapeError("random_orthogonal: dim must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (double& v : g.values()) v = normal(gen);

  // Modified Gram-Schmidt with one re-orthogonalization pass; R's diagonal
  // comes out positive, which is the sign fix.
  Matrix q(dim, dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<double> v = g.column(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += q(i, k) * v[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * q(i, k);
      }
    }
    const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (nv == 0.0) throw NumericalError("random_orthogonal: rank-deficient draw");
    for (std::size_t i = 0; i < dim; ++i) q(i, j) = v[i] / nv;
  }
  return q;
}

Matrix rotation_2d(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Matrix::from_rows({{c, -s}, {s, c}});
}

Matrix rotation_about_axis(std::span<const double> axis, double angle) {
  if (axis.size() != 3) throw ShapeError("rotation_about_axis: axis must be 3-dimensional");
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n == 0.0) throw ShapeError("rotation_about_axis: zero axis");
  const double k[3] = {axis[0] / n, axis[1] / n, axis[2] / n};
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  // Rodrigues: R = c I + s [k]_x + (1 - c) k k^T
  Matrix r(3, 3);
  const double cross[3][3] = {{0.0, -k[2], k[1]}, {k[2], 0.0, -k[0]}, {-k[1], k[0], 0.0}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      r(i, j) = (i == j ? c : 0.0) + s * cross[i][j] + (1.0 - c) * k[i] * k[j];
    }
  }
  return r;
}

}  // namespace orthovae::linalg
