#include <cmath>
#include <limits>

#include "orthovae/errors.hpp"
#include "orthovae/metrics.hpp"

namespace orthovae::metrics {

Matrix SignedPermutation::matrix() const {
  Matrix m(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) m(i, perm[i]) = signs[i];
  return m;
}

// Shortest augmenting path version of the Hungarian method with row and
// column potentials, O(d^3).
std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("solve_assignment: cost must be square");
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);  // match[col] = row, 1-based
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

PermutationMatch nearest_signed_permutation(const Matrix& v) {
  if (v.rows() != v.cols()) throw ShapeError("nearest_signed_permutation: matrix must be square");
  if (v.rows() > 12) throw ShapeError("nearest_signed_permutation: dimension above 12");
  const std::size_t d = v.rows();
  Matrix cost(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double a = std::abs(v(i, j));
      cost(i, j) = std::abs(a - 1.0) - a;
    }
  }
  PermutationMatch out;
  out.p.perm = solve_assignment(cost);
  out.p.signs.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.p.signs[i] = v(i, out.p.perm[i]) < 0.0 ? -1 : 1;
  const Matrix p = out.p.matrix();
  double l1 = 0.0;
  double f2 = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double diff = v.values()[k] - p.values()[k];
    l1 += std::abs(diff);
    f2 += diff * diff;
  }
  out.l1 = l1;
  out.frobenius = std::sqrt(f2);
  return out;
}

}  // namespace orthovae::metrics
