#include <cmath>
#include <limits>

#include "orthovae/errors.hpp"
#include "orthovae/metrics.hpp"
#include "orthovae/tolerances.hpp"

namespace orthovae::metrics {

DtoResult dto(const nets::Mlp& decoder, const Matrix& latent_means,
              std::span<const std::size_t> active, std::size_t max_samples) {
  if (latent_means.cols() != decoder.input_dim()) {
    throw ShapeError("dto: latent width does not match the decoder");
  }
  DtoResult out;
  if (active.empty()) {
    out.degenerate = true;
    out.dto = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const std::size_t n = std::min(max_samples, latent_means.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix j = decoder.jacobian(latent_means.row(i)).select_columns(active);
    const auto f = linalg::svd(j);
    if (j.rows() < j.cols() || !(f.sigma.front() > 0.0) ||
        f.sigma.back() <= tol::kRankRelative * f.sigma.front()) {
      ++out.skipped;
      continue;
    }
    const double dist = nearest_signed_permutation(f.v).frobenius;
    out.per_sample.push_back(dist);
    total += dist;
    ++out.used;
  }
  if (out.used == 0) {
    out.degenerate = true;
    out.dto = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.dto = total / static_cast<double>(out.used);
  }
  return out;
}

}  // namespace orthovae::metrics
