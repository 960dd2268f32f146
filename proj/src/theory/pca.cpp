#include <algorithm>
#include <cmath>

#include "orthovae/errors.hpp"
#include "orthovae/theory.hpp"
#include "orthovae/tolerances.hpp"

namespace orthovae::theory {

std::vector<double> PcaModel::encode(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ShapeError("pca encode: input length mismatch");
  std::vector<double> centered(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) centered[k] = x[k] - mean[k];
  return components * std::span<const double>(centered);
}

std::vector<double> PcaModel::decode(std::span<const double> z) const {
  if (z.size() != components.rows()) throw ShapeError("pca decode: code length mismatch");
  std::vector<double> x = mean;
  for (std::size_t j = 0; j < z.size(); ++j) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += components(j, k) * z[j];
  }
  return x;
}

double PcaModel::reconstruction_error(const Matrix& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = decode(encode(x.row(i)));
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double d = r[k] - x(i, k);
      total += d * d;
    }
  }
  return total / static_cast<double>(x.rows());
}

PcaModel pca_fit(const Matrix& x, std::size_t d, double tie_tolerance) {
  if (x.rows() < 2) throw ShapeError("pca_fit: need at least two samples");
  if (d == 0 || d > x.cols()) throw ShapeError("pca_fit: d must be in [1, n]");
  const std::size_t n = x.cols();
  const double count = static_cast<double>(x.rows());
  if (tie_tolerance < 0.0) tie_tolerance = std::max(tol::kDegenerateSingular, 5.0 / std::sqrt(count));

  PcaModel model;
  model.mean.assign(n, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < n; ++k) model.mean[k] += x(i, k);
  }
  for (double& m : model.mean) m /= count;

  Matrix cov(n, n);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      const double da = x(i, a) - model.mean[a];
      for (std::size_t b = a; b < n; ++b) cov(a, b) += da * (x(i, b) - model.mean[b]);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      cov(a, b) /= count;
      cov(b, a) = cov(a, b);
    }
  }

  const auto eig = linalg::symmetric_eigen(cov);
  model.eigenvalues = eig.values;
  model.components = Matrix(d, n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < n; ++k) model.components(j, k) = eig.vectors(k, j);
  }
  const std::size_t check = std::min(d + 1, n);
  for (std::size_t j = 0; j + 1 < check; ++j) {
    const double hi = eig.values[j];
    if (hi <= 0.0 || hi - eig.values[j + 1] <= tie_tolerance * hi) model.degenerate = true;
  }
  return model;
}

}  // namespace orthovae::theory
