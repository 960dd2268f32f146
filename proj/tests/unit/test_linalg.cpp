#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "orthovae/errors.hpp"
#include "orthovae/linalg.hpp"
#include "orthovae/rng.hpp"

using namespace orthovae;
using linalg::Matrix;

namespace {

Matrix m1() { return Matrix::from_rows({{4.0, 1.0}, {-3.0, 1.0}, {5.0, -1.0}}); }

Matrix gaussian(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

// eigenvalues of a symmetric 2x2 via the characteristic polynomial
std::pair<double, double> eig2(const Matrix& s) {
  const double tr = s(0, 0) + s(1, 1);
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  const double disc = std::sqrt(tr * tr / 4 - det);
  return {tr / 2 + disc, tr / 2 - disc};
}

}  // namespace

TEST_CASE("svd of identity and diagonal") {
  auto f = linalg::svd(Matrix::identity(3));
  for (double s : f.sigma) CHECK(s == doctest::Approx(1.0));
  CHECK(linalg::max_abs_diff(f.u * f.v.transpose(), Matrix::identity(3)) < 1e-12);

  const double d[] = {3.0, 2.0};
  f = linalg::svd(Matrix::diagonal(d));
  CHECK(f.sigma[0] == doctest::Approx(3.0));
  CHECK(f.sigma[1] == doctest::Approx(2.0));
}

TEST_CASE("svd of M1 against the characteristic polynomial") {
  const Matrix m = m1();
  const auto f = linalg::svd(m);
  const auto [l1, l2] = eig2(linalg::gram(m));
  CHECK(f.sigma[0] == doctest::Approx(std::sqrt(l1)).epsilon(1e-12));
  CHECK(f.sigma[1] == doctest::Approx(std::sqrt(l2)).epsilon(1e-12));
  CHECK(linalg::max_abs_diff(f.reconstruct(), m) < 1e-12);
  CHECK(f.sigma[0] * f.sigma[1] == doctest::Approx(linalg::psdet(m)).epsilon(1e-12));
  // det(M1^T M1) = 50 * 3 - 4^2
  CHECK(linalg::psdet(m) == doctest::Approx(std::sqrt(134.0)).epsilon(1e-12));
}

TEST_CASE("svd properties on random matrices") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 6;
    const std::size_t n = d + rng() % (9 - std::min<std::size_t>(d, 8));
    const Matrix m = gaussian(n, d, rng);
    const auto f = linalg::svd(m);
    CHECK(linalg::frobenius_distance(f.reconstruct(), m) <= 1e-8 * m.frobenius_norm());
    CHECK(linalg::orthogonality_defect(f.u) < 1e-9);
    CHECK(linalg::orthogonality_defect(f.v) < 1e-9);
    for (std::size_t k = 1; k < f.sigma.size(); ++k) CHECK(f.sigma[k - 1] >= f.sigma[k]);
    const auto eig = linalg::symmetric_eigen(linalg::gram(m));
    for (std::size_t k = 0; k < d; ++k) {
      CHECK(std::abs(f.sigma[k] - std::sqrt(std::max(0.0, eig.values[k]))) <=
            1e-8 * std::max(1.0, f.sigma[0]));
    }
  }
}

TEST_CASE("svd rejects non-finite input") {
  Matrix m(2, 2, 1.0);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(linalg::svd(m), NumericalError);
}

TEST_CASE("psdet examples and isometry invariance") {
  CHECK(linalg::psdet(Matrix::identity(4)) == doctest::Approx(1.0));
  const double d[] = {2.0, 5.0};
  CHECK(linalg::psdet(Matrix::diagonal(d)) == doctest::Approx(10.0));
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = gaussian(5, 3, rng);
    const Matrix q = linalg::random_orthogonal(5, rng());
    CHECK(linalg::psdet(q * m) == doctest::Approx(linalg::psdet(m)).epsilon(1e-10));
  }
  Matrix rank1(3, 2, 1.0);
  CHECK_THROWS_AS(linalg::psdet(rank1), DegenerateError);
}

TEST_CASE("cholesky") {
  CHECK(linalg::cholesky_factor(Matrix::identity(3)) == Matrix::identity(3));
  const auto l = linalg::cholesky_factor(Matrix::from_rows({{4, 0}, {0, 9}}));
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 1) == doctest::Approx(3.0));
  CHECK(l(0, 1) == 0.0);

  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Matrix b = gaussian(4, 4, rng);
    Matrix a = b * b.transpose();
    for (std::size_t i = 0; i < 4; ++i) a(i, i) += 1e-3;
    const Matrix f = linalg::cholesky_factor(a);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(f(i, i) > 0.0);
      for (std::size_t j = i + 1; j < 4; ++j) CHECK(f(i, j) == 0.0);
    }
    CHECK(linalg::max_abs_diff(f * f.transpose(), a) <= 1e-10 * std::max(1.0, a.frobenius_norm()));
    // uniqueness: refactoring L L^T returns L
    CHECK(linalg::max_abs_diff(linalg::cholesky_factor(f * f.transpose()), f) < 1e-9);
  }
  CHECK_THROWS_AS(linalg::cholesky_factor(Matrix::from_rows({{1, 2}, {2, 1}})), DegenerateError);
}

TEST_CASE("random orthogonal") {
  const Matrix one = linalg::random_orthogonal(1, 9);
  CHECK(std::abs(one(0, 0)) == doctest::Approx(1.0));
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix q = linalg::random_orthogonal(1 + s % 7, s);
    CHECK(linalg::orthogonality_defect(q) <= 1e-10);
    CHECK(std::abs(std::abs(linalg::determinant(q)) - 1.0) <= 1e-9);
  }
  CHECK(linalg::random_orthogonal(4, 1) == linalg::random_orthogonal(4, 1));
}

TEST_CASE("rotation_2d") {
  CHECK(linalg::max_abs_diff(linalg::rotation_2d(0.0), Matrix::identity(2)) == 0.0);
  const double t = 0.37;
  CHECK(linalg::max_abs_diff(linalg::rotation_2d(t) * linalg::rotation_2d(-t),
                             Matrix::identity(2)) < 1e-15);
  CHECK(linalg::determinant(linalg::rotation_2d(1.2)) == doctest::Approx(1.0));
  // M1 R45^T has squared column norms 61/2 and 45/2
  const Matrix m2 = m1() * linalg::rotation_2d(std::numbers::pi / 4).transpose();
  CHECK(m2.column_norm(0) * m2.column_norm(0) == doctest::Approx(30.5).epsilon(1e-12));
  CHECK(m2.column_norm(1) * m2.column_norm(1) == doctest::Approx(22.5).epsilon(1e-12));
}

TEST_CASE("rotation about an axis fixes the axis") {
  const double axis[] = {1.0, -1.0, 1.0};
  const Matrix r = linalg::rotation_about_axis(axis, std::numbers::pi / 4);
  CHECK(linalg::orthogonality_defect(r) < 1e-14);
  CHECK(linalg::determinant(r) == doctest::Approx(1.0));
  const auto v = r * std::span<const double>(axis);
  for (int i = 0; i < 3; ++i) CHECK(v[i] == doctest::Approx(axis[i]));
}

TEST_CASE("matrix shape errors") {
  CHECK_THROWS_AS(Matrix(2, 3) * Matrix(2, 3), ShapeError);
  Matrix m(2, 3);
  CHECK_THROWS_AS(m.reshape(4, 2), ShapeError);
}
