#pragma once

// The isolated stochastic-loss problem: per sample i a decoder Jacobian J_i,
// a free orthogonal R_i acting on the latent side and diagonal noise
// variances s2_i, minimizing
//
//   sum_i log sum_j |(J_i R_i) e_j|^2 s2_ij   s.t.  sum_ij -log s2_ij = C1.
//
// Also the PCA baseline and the axes-preserving test.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orthovae/linalg.hpp"

namespace orthovae::theory {

using linalg::Matrix;

/// sum_j |c_j|^2 s2_j for the columns c_j of j.
double expected_stochastic_loss(const Matrix& j, std::span<const double> sigmas2);

std::vector<double> column_norms_squared(const Matrix& j);
/// prod_j |c_j|
double column_norm_product(const Matrix& j);

/// Precision budget for a single sample. The optimizer works in log-variance
/// units; on_log_std(c) means sum_j -log s_j = c, i.e. a log-variance budget
/// of 2c.
class Budget {
 public:
  static Budget on_log_variance(double c) { return Budget(c); }
  static Budget on_log_std(double c) { return Budget(2.0 * c); }
  double log_variance_total() const noexcept { return c_; }

 private:
  explicit Budget(double c) : c_(c) {}
  double c_;
};

struct SigmaAllocation {
  std::vector<double> sigmas2;
  double minimum = 0.0;  // d (prod_j |c_j|^2 e^{-C})^{1/d}
};

/// Variances minimizing expected_stochastic_loss under the budget:
/// s2_j proportional to 1/|c_j|^2. Throws DegenerateError for a zero column.
SigmaAllocation optimal_sigmas(const Matrix& j, Budget budget);

struct OrthogonalizingRotation {
  Matrix v;                 // j * v^T has pairwise orthogonal columns
  bool degenerate = false;  // repeated singular values: v is not unique
};

OrthogonalizingRotation orthogonalizing_rotation(const Matrix& j);

enum class AxesPreserving { yes, no, degenerate };
const char* axes_preserving_name(AxesPreserving a) noexcept;

/// degenerate when two singular values agree to kDegenerateSingular
/// (relative); otherwise yes iff |G_jk| <= tolerance * sqrt(G_jj G_kk) for
/// the Gram matrix G = m^T m.
AxesPreserving axes_preserving_check(const Matrix& m, double tolerance = 1e-6);

/// Largest |cos| between two distinct columns.
double max_column_cosine(const Matrix& m);

// ---------------------------------------------------------------------------
// Isolated problem

class IsolatedProblem {
 public:
  IsolatedProblem() = default;
  /// Throws ShapeError unless every Jacobian has the same width and at least
  /// as many rows as columns, and DegenerateError for rank deficiency.
  IsolatedProblem(std::vector<Matrix> jacobians, double c1);

  const std::vector<Matrix>& jacobians() const noexcept { return jacobians_; }
  /// sum over samples and coordinates of -log s2
  double c1() const noexcept { return c1_; }
  double log_psdet(std::size_t i) const { return log_psdet_.at(i); }
  std::size_t samples() const noexcept { return jacobians_.size(); }
  std::size_t latent_dim() const noexcept {
    return jacobians_.empty() ? 0 : jacobians_.front().cols();
  }

 private:
  std::vector<Matrix> jacobians_;
  double c1_ = 0.0;
  std::vector<double> log_psdet_;
};

struct Assignment {
  std::vector<Matrix> rotations;             // sample i uses J_i * rotations[i]
  std::vector<std::vector<double>> sigmas2;  // per sample, per coordinate
};

double objective(const IsolatedProblem& p, const Assignment& a);
/// N log d - C1/d + (2/d) sum_i log psdet(J_i)
double global_lower_bound(const IsolatedProblem& p);
/// |sum -log s2 - C1| <= 1e-9 max(1, |C1|) and all rotations orthogonal.
bool is_feasible(const IsolatedProblem& p, const Assignment& a);

/// Random orthogonal rotations and random variances rescaled onto the budget.
Assignment random_start(const IsolatedProblem& p, std::uint64_t seed);
/// Random problem: N samples of n x d Gaussian Jacobians, C1 ~ U[-d N, d N].
IsolatedProblem random_problem(std::size_t samples, std::size_t n, std::size_t d,
                               std::uint64_t seed);

enum class StepStatus { improved, optimal, stalled };
const char* step_status_name(StepStatus s) noexcept;
enum class MoveKind { none, am_gm, hadamard };

struct StepResult {
  StepStatus status = StepStatus::stalled;
  MoveKind move = MoveKind::none;
  std::size_t sample = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  double delta = 0.0;
};

/// One lemma move on the sample/move with the largest slack.
///
/// am_gm: with a_j = |c_j|^2 s2_j, the largest a_i and smallest a_k become
/// a_i/(1+delta), a_k(1+delta); kept iff a_i > a_k(1+delta).
/// hadamard: a planar rotation of R_i in the plane of the most correlated
/// column pair, kept iff that pair's |inner product| drops, followed by the
/// closed-form variance rebalance inside the sample.
/// delta starts at 0.1 and halves until the move is kept.
///
/// `optimal` is returned without moving when the gap to the lower bound is
/// within kOptimalityRelative * max(|bound|, 1) and every sample's columns
/// have |cos| <= kColumnCosineSlack. `preferred` restricts the move kind.
StepResult local_improvement_step(const IsolatedProblem& p, Assignment& a,
                                  MoveKind preferred = MoveKind::none);

struct ImprovementRun {
  StepStatus status = StepStatus::stalled;
  std::size_t steps = 0;
  double objective = 0.0;
  double lower_bound = 0.0;
};

ImprovementRun improve_until_optimal(const IsolatedProblem& p, Assignment& a,
                                     std::size_t max_steps = 200000);

/// JSON record: objective, lower_bound, per-sample sigmas2, rotations and
/// column-orthogonality residuals.
std::string certificate_json(const IsolatedProblem& p, const Assignment& a);

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  std::vector<double> mean;
  Matrix components;                // d x n, rows are leading eigenvectors
  std::vector<double> eigenvalues;  // all n, non-increasing
  bool degenerate = false;          // a tie among the leading d + 1 eigenvalues

  std::vector<double> encode(std::span<const double> x) const;
  std::vector<double> decode(std::span<const double> z) const;
  /// Mean over rows of |x - decode(encode(x))|^2.
  double reconstruction_error(const Matrix& x) const;
};

/// Centers the rows of `x` and keeps the top-d covariance eigenvectors.
/// Adjacent eigenvalues among the first d + 1 whose relative gap is below
/// `tie_tolerance` mark the fit degenerate; the default scales with the
/// sampling noise, max(1e-6, 5 / sqrt(N)).
PcaModel pca_fit(const Matrix& x, std::size_t d, double tie_tolerance = -1.0);

}  // namespace orthovae::theory
