#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "orthovae/errors.hpp"
#include "orthovae/metrics.hpp"
#include "orthovae/rng.hpp"

namespace orthovae::metrics {

Knn1d::Knn1d(std::span<const double> z, std::span<const double> targets, std::size_t k) : k_(k) {
  if (z.size() != targets.size()) throw ShapeError("knn: inputs and targets differ in length");
  if (k == 0 || z.size() < k) throw ShapeError("knn: need at least k training points");
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  z_.reserve(z.size());
  t_.reserve(z.size());
  for (std::size_t i : order) {
    z_.push_back(z[i]);
    t_.push_back(targets[i]);
  }
}

double Knn1d::predict(double query, KnnMode mode) const {
  // expand a window [lo, hi) around the insertion point, nearer side first
  auto hi = static_cast<std::size_t>(std::lower_bound(z_.begin(), z_.end(), query) - z_.begin());
  std::size_t lo = hi;
  while (hi - lo < k_) {
    if (lo == 0) {
      ++hi;
    } else if (hi == z_.size()) {
      --lo;
    } else if (query - z_[lo - 1] <= z_[hi] - query) {
      --lo;
    } else {
      ++hi;
    }
  }
  if (mode == KnnMode::regress) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += t_[i];
    return s / static_cast<double>(k_);
  }
  std::map<double, std::size_t> votes;
  for (std::size_t i = lo; i < hi; ++i) ++votes[t_[i]];
  double best = votes.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [label, count] : votes) {  // ascending labels: ties keep the smaller
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

double knn_predict(std::span<const double> train_z, std::span<const double> train_targets,
                   double query, KnnMode mode, std::size_t k) {
  return Knn1d(train_z, train_targets, k).predict(query, mode);
}

namespace {

double variance(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

double best_constant_accuracy(std::span<const double> labels) {
  std::map<double, std::size_t> counts;
  for (double l : labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [label, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace

DisentanglementResult disentanglement_score(const Matrix& latents, const Matrix& factors,
                                            std::span<const data::FactorKind> kinds,
                                            std::uint64_t seed) {
  if (latents.rows() != factors.rows()) throw ShapeError("disentanglement: row counts differ");
  if (kinds.size() != factors.cols()) throw ShapeError("disentanglement: one kind per factor");
  const std::size_t n = latents.rows();
  const std::size_t n_train = n * 4 / 5;
  if (n_train < 5 || n - n_train < 1) throw ShapeError("disentanglement: too few samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t f_count = factors.cols();
  const std::size_t d = latents.cols();
  DisentanglementResult out;
  out.performance = Matrix(f_count, d);
  out.per_factor.assign(f_count, std::numeric_limits<double>::quiet_NaN());

  auto gather = [&](const Matrix& m, std::size_t col, std::size_t from, std::size_t to) {
    std::vector<double> v;
    v.reserve(to - from);
    for (std::size_t r = from; r < to; ++r) v.push_back(m(order[r], col));
    return v;
  };

  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t fi = 0; fi < f_count; ++fi) {
    if (variance(factors.column(fi)) == 0.0) {
      out.excluded.push_back(fi);
      continue;
    }
    const auto w_train = gather(factors, fi, 0, n_train);
    const auto w_test = gather(factors, fi, n_train, n);
    const bool classify = kinds[fi] == data::FactorKind::discrete;
    const double scale =
        classify ? best_constant_accuracy(w_test) : std::sqrt(variance(w_test));
    if (!(scale > 0.0)) {
      out.excluded.push_back(fi);
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) {
      const Knn1d knn(gather(latents, j, 0, n_train), w_train);
      const auto z_test = gather(latents, j, n_train, n);
      double a = 0.0;
      if (classify) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < z_test.size(); ++r) {
          if (knn.predict(z_test[r], KnnMode::classify) == w_test[r]) ++hits;
        }
        a = static_cast<double>(hits) / static_cast<double>(z_test.size());
      } else {
        double mse = 0.0;
        for (std::size_t r = 0; r < z_test.size(); ++r) {
          const double e = knn.predict(z_test[r], KnnMode::regress) - w_test[r];
          mse += e * e;
        }
        mse /= static_cast<double>(z_test.size());
        a = std::max(0.0, scale - std::sqrt(mse));
      }
      out.performance(fi, j) = a;
    }
    std::vector<double> row(out.performance.row(fi).begin(), out.performance.row(fi).end());
    std::sort(row.begin(), row.end(), std::greater<>());
    const double second = row.size() > 1 ? row[1] : 0.0;
    const double gap = std::clamp((row[0] - second) / scale, 0.0, 1.0);
    out.per_factor[fi] = gap;
    sum += gap;
    ++counted;
  }
  out.score = counted ? sum / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace orthovae::metrics
