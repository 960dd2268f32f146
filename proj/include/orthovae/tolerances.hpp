#pragma once

// Shared numerical thresholds. Operations and tests read the same values.

namespace orthovae::tol {

// one-sided Jacobi SVD
inline constexpr int kSvdMaxSweeps = 100;
inline constexpr double kSvdOffDiagonal = 1e-12;

// symmetric Jacobi eigensolver
inline constexpr int kEigenMaxSweeps = 100;
inline constexpr double kEigenOffDiagonal = 1e-14;

// smallest singular value relative to the largest for "full column rank"
inline constexpr double kRankRelative = 1e-12;

// relative asymmetry accepted by the Cholesky factorization
inline constexpr double kSymmetry = 1e-10;

// axes-preserving check: |G_jk| <= kOrthogonality * sqrt(G_jj G_kk)
inline constexpr double kOrthogonality = 1e-6;
// two singular values closer than this (relative) count as repeated
inline constexpr double kDegenerateSingular = 1e-6;

// local-improvement search
inline constexpr double kImprovementInitialStep = 0.1;
inline constexpr double kImprovementMinStep = 1e-18;
inline constexpr double kOptimalityRelative = 1e-7;
// AM-GM slack: max/min ratio of the balanced terms minus one
inline constexpr double kBalanceSlack = 1e-12;
// Hadamard slack: |cos| between two columns
inline constexpr double kColumnCosineSlack = 1e-10;

// polarized regime
inline constexpr double kActiveStd = 0.5;
inline constexpr double kPolarizedDeltaKl = 0.03;

}  // namespace orthovae::tol
