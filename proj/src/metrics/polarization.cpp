#include "orthovae/errors.hpp"
#include "orthovae/metrics.hpp"

namespace orthovae::metrics {

double polarized_fraction(std::span<const std::optional<double>> trace, double threshold) {
  if (trace.empty()) throw ShapeError("polarized_fraction: empty trace");
  const std::size_t m = trace.size();
  std::size_t last_above = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (!trace[k] || !(*trace[k] < threshold)) last_above = k + 1;
  }
  return static_cast<double>(m - last_above) / static_cast<double>(m);
}

}  // namespace orthovae::metrics
