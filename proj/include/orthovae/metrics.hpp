#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "orthovae/data.hpp"
#include "orthovae/linalg.hpp"
#include "orthovae/models.hpp"
#include "orthovae/nets.hpp"

namespace orthovae::metrics {

using linalg::Matrix;
using models::active_variables;
using models::delta_kl;

// ---------------------------------------------------------------------------
// Signed permutations

struct SignedPermutation {
  std::vector<std::size_t> perm;  // row i has its nonzero in column perm[i]
  std::vector<int> signs;         // value of that entry, +1 or -1

  Matrix matrix() const;
};

struct PermutationMatch {
  SignedPermutation p;
  double l1 = 0.0;         // sum_ij |V_ij - P_ij|, the selection criterion
  double frobenius = 0.0;  // |V - P|_F, the reported distance
};

/// Minimizes the entrywise L1 distance over all signed permutations. Each
/// cell's best sign is sign(V_ij) (+1 for zero), which leaves an assignment
/// problem with cost ||V_ij| - 1| - |V_ij|, solved by the Hungarian method.
PermutationMatch nearest_signed_permutation(const Matrix& v);

/// Min-cost perfect matching on a square cost matrix; returns row -> column.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

// ---------------------------------------------------------------------------
// Distance to orthogonality

struct DtoResult {
  double dto = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // rank-deficient active Jacobians
  bool degenerate = false;  // every sample skipped; dto is NaN
  std::vector<double> per_sample;
};

/// Mean of |V_i - P(V_i)|_F over the rows of `latent_means` (at most
/// `max_samples`), where V_i is the right singular basis of the decoder
/// Jacobian restricted to the `active` columns.
DtoResult dto(const nets::Mlp& decoder, const Matrix& latent_means,
              std::span<const std::size_t> active, std::size_t max_samples = 256);

// ---------------------------------------------------------------------------
// kNN on a single latent coordinate

enum class KnnMode { regress, classify };

class Knn1d {
 public:
  Knn1d(std::span<const double> z, std::span<const double> targets, std::size_t k = 5);
  /// Mean of the k nearest targets (regress) or their majority label with
  /// the smallest label winning ties (classify).
  double predict(double query, KnnMode mode) const;

 private:
  std::vector<double> z_;
  std::vector<double> t_;
  std::size_t k_;
};

double knn_predict(std::span<const double> train_z, std::span<const double> train_targets,
                   double query, KnnMode mode, std::size_t k = 5);

struct DisentanglementResult {
  double score = 0.0;                    // NaN when every factor is excluded
  std::vector<double> per_factor;        // NaN for excluded factors
  std::vector<std::size_t> excluded;     // zero-variance factors
  Matrix performance;                    // A, factors x latents
};

/// kNN-gap score. Rows are split 80/20 with `seed`; a kNN model per
/// (factor, latent) pair is fit on the 80% part and scored on the rest.
DisentanglementResult disentanglement_score(const Matrix& latents, const Matrix& factors,
                                            std::span<const data::FactorKind> kinds,
                                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Polarized regime

/// Fraction of training after the last evaluation whose delta_kl was not
/// below `threshold` (undefined values count as not below). With m trace
/// points and the last such point at position k (1-based, 0 if none) the
/// result is (m - k) / m. Throws ShapeError for an empty trace.
double polarized_fraction(std::span<const std::optional<double>> delta_kl_trace,
                          double threshold = 0.03);

struct MetricsReport {
  double dto = 0.0;
  std::size_t dto_used = 0;
  std::size_t dto_skipped = 0;
  bool dto_degenerate = false;
  double disentanglement = 0.0;
  double polarized_fraction = 0.0;
  std::vector<std::size_t> active_set;
  std::vector<std::pair<std::size_t, std::optional<double>>> delta_kl_trace;
};

}  // namespace orthovae::metrics
