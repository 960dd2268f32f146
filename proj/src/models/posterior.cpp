#include <cmath>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/models.hpp"

namespace orthovae::models {

std::string_view model_kind_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::ae:
      return "ae";
    case ModelKind::vae:
      return "vae";
    case ModelKind::beta_vae:
      return "beta_vae";
    case ModelKind::beta_vae_full:
      return "beta_vae_full";
  }
  return "ae";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ae") return ModelKind::ae;
  if (name == "vae") return ModelKind::vae;
  if (name == "beta_vae") return ModelKind::beta_vae;
  if (name == "beta_vae_full") return ModelKind::beta_vae_full;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

PosteriorKind posterior_kind(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::ae:
      return PosteriorKind::point;
    case ModelKind::vae:
    case ModelKind::beta_vae:
      return PosteriorKind::diagonal;
    case ModelKind::beta_vae_full:
      return PosteriorKind::full;
  }
  return PosteriorKind::point;
}

GaussianPosterior GaussianPosterior::diagonal(std::vector<double> mean,
                                              std::vector<double> logvar) {
  if (mean.size() != logvar.size()) throw ShapeError("posterior: mean/logvar length mismatch");
  GaussianPosterior p;
  p.mean = std::move(mean);
  p.logvar = std::move(logvar);
  return p;
}

GaussianPosterior GaussianPosterior::full(std::vector<double> mean, Matrix factor) {
  const std::size_t d = mean.size();
  if (factor.rows() != d || factor.cols() != d) throw ShapeError("posterior: factor must be d x d");
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      if (factor(i, j) != 0.0) throw ShapeError("posterior: factor is not lower-triangular");
    }
    if (!(factor(i, i) > 0.0)) {
      throw DegenerateError("posterior: factor diagonal entry " + std::to_string(i) +
                            " is not positive");
    }
  }
  GaussianPosterior p;
  p.mean = std::move(mean);
  p.factor = std::move(factor);
  return p;
}

std::vector<double> GaussianPosterior::variances() const {
  std::vector<double> v(dim());
  if (is_full()) {
    for (std::size_t i = 0; i < dim(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += factor(i, k) * factor(i, k);
      v[i] = s;
    }
  } else {
    for (std::size_t i = 0; i < dim(); ++i) v[i] = std::exp(logvar[i]);
  }
  return v;
}

Matrix GaussianPosterior::covariance() const {
  if (is_full()) return factor * factor.transpose();
  const auto v = variances();
  return Matrix::diagonal(v);
}

double kl_diagonal(const GaussianPosterior& p) {
  if (p.is_full()) throw ShapeError("kl_diagonal: posterior has a full factor");
  double s = 0.0;
  for (std::size_t j = 0; j < p.dim(); ++j) {
    s += p.mean[j] * p.mean[j] + std::exp(p.logvar[j]) - p.logvar[j] - 1.0;
  }
  return 0.5 * s;
}

double kl_full(const GaussianPosterior& p) {
  if (!p.is_full()) throw ShapeError("kl_full: posterior has no full factor");
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double lii = p.factor(i, i);
    if (!(lii > 0.0)) throw DegenerateError("kl_full: non-positive factor diagonal");
    s += p.mean[i] * p.mean[i] - 2.0 * std::log(lii) - 1.0;
    for (std::size_t k = 0; k <= i; ++k) s += p.factor(i, k) * p.factor(i, k);
  }
  return 0.5 * s;
}

double kl(const GaussianPosterior& p) { return p.is_full() ? kl_full(p) : kl_diagonal(p); }

double kl_approx_polarized(const GaussianPosterior& p, std::span<const std::size_t> active) {
  if (p.is_full()) throw ShapeError("kl_approx_polarized: needs a diagonal posterior");
  double s = 0.0;
  for (std::size_t j : active) {
    if (j >= p.dim()) throw ShapeError("kl_approx_polarized: active index out of range");
    s += p.mean[j] * p.mean[j] - p.logvar[j] - 1.0;
  }
  return 0.5 * s;
}

std::optional<double> delta_kl(double kl_value, double kl_approx) {
  if (!(kl_value > 0.0) || !std::isfinite(kl_approx)) return std::nullopt;
  return std::abs(kl_value - kl_approx) / kl_value;
}

std::vector<std::size_t> active_variables(const Matrix& means, double threshold) {
  if (means.rows() < 2) throw ShapeError("active_variables: need at least two samples");
  std::vector<std::size_t> active;
  const double n = static_cast<double>(means.rows());
  for (std::size_t j = 0; j < means.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < means.rows(); ++i) mean += means(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < means.rows(); ++i) {
      const double d = means(i, j) - mean;
      var += d * d;
    }
    var /= n;
    if (std::sqrt(var) > threshold) active.push_back(j);
  }
  return active;
}

GaussianPosterior rotate_diagonal_marginals(const GaussianPosterior& p, const Matrix& q) {
  if (p.is_full()) throw ShapeError("rotate_diagonal_marginals: needs a diagonal posterior");
  if (q.rows() != p.dim() || q.cols() != p.dim()) throw ShapeError("rotation size mismatch");
  const auto var = p.variances();
  std::vector<double> logvar(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.dim(); ++k) s += q(i, k) * q(i, k) * var[k];
    logvar[i] = std::log(s);
  }
  return GaussianPosterior::diagonal(q * std::span<const double>(p.mean), std::move(logvar));
}

}  // namespace orthovae::models
