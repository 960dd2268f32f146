#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "orthovae/errors.hpp"
#include "orthovae/metrics.hpp"
#include "orthovae/models.hpp"
#include "orthovae/rng.hpp"
#include "orthovae/theory.hpp"

using namespace orthovae;
using linalg::Matrix;
using theory::Budget;

namespace {

Matrix m1() { return Matrix::from_rows({{4.0, 1.0}, {-3.0, 1.0}, {5.0, -1.0}}); }
Matrix m2() { return m1() * linalg::rotation_2d(std::numbers::pi / 4).transpose(); }

Matrix randn(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

bool is_signed_permutation(const Matrix& v, double tol) {
  for (std::size_t i = 0; i < v.rows(); ++i) {
    std::size_t big = 0;
    for (std::size_t j = 0; j < v.cols(); ++j) {
      if (std::abs(std::abs(v(i, j)) - 1.0) < tol) ++big;
      else if (std::abs(v(i, j)) > tol) return false;
    }
    if (big != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("expected stochastic loss of the worked examples") {
  const double ex[] = {1, 0}, ey[] = {0, 1};
  CHECK(theory::expected_stochastic_loss(m1(), ex) == 50.0);
  CHECK(theory::expected_stochastic_loss(m1(), ey) == 3.0);
  CHECK(theory::expected_stochastic_loss(m2(), ex) == doctest::Approx(30.5).epsilon(1e-14));
  CHECK(theory::expected_stochastic_loss(m2(), ey) == doctest::Approx(22.5).epsilon(1e-14));
  const double ones[] = {1, 1, 1};
  CHECK(theory::expected_stochastic_loss(Matrix::identity(3), ones) == 3.0);
}

TEST_CASE("optimal sigmas") {
  const double c = 1.3;
  const auto a = theory::optimal_sigmas(m1(), Budget::on_log_std(c));
  CHECK(a.sigmas2[0] / a.sigmas2[1] == doctest::Approx(3.0 / 50.0).epsilon(1e-12));
  CHECK(a.minimum == doctest::Approx(2 * std::sqrt(150.0) * std::exp(-c)).epsilon(1e-12));
  CHECK(a.minimum * std::exp(c) == doctest::Approx(24.5).epsilon(1e-3));
  // budget in log-std units: -sum log s = c
  CHECK(-0.5 * (std::log(a.sigmas2[0]) + std::log(a.sigmas2[1])) == doctest::Approx(c));
  CHECK(theory::expected_stochastic_loss(m1(), a.sigmas2) == doctest::Approx(a.minimum));

  const auto b = theory::optimal_sigmas(m2(), Budget::on_log_std(c));
  CHECK(b.minimum * std::exp(c) == doctest::Approx(52.4).epsilon(1e-3));

  const auto eq = theory::optimal_sigmas(Matrix::identity(3), Budget::on_log_variance(0.6));
  CHECK(eq.sigmas2[0] == doctest::Approx(eq.sigmas2[2]));

  Matrix zero_col = m1();
  zero_col(0, 1) = zero_col(1, 1) = zero_col(2, 1) = 0.0;
  CHECK_THROWS_AS(theory::optimal_sigmas(zero_col, Budget::on_log_std(0)), DegenerateError);
}

TEST_CASE("optimal sigmas beat random allocations on the same budget") {
  Rng rng(8);
  std::normal_distribution<double> n;
  const auto best = theory::optimal_sigmas(m1(), Budget::on_log_variance(0.0));
  for (int t = 0; t < 100; ++t) {
    const double u = n(rng);
    const double s2[] = {std::exp(u), std::exp(-u)};
    CHECK(theory::expected_stochastic_loss(m1(), s2) >= best.minimum - 1e-12);
  }
}

TEST_CASE("column norm product and psdet") {
  CHECK(theory::column_norm_product(Matrix::identity(4)) == 1.0);
  CHECK(theory::column_norm_product(m1()) == doctest::Approx(std::sqrt(150.0)));
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Matrix m = randn(5, 3, rng);
    CHECK(theory::column_norm_product(m) >= linalg::psdet(m) * (1 - 1e-12));
  }
  const double d[] = {3.0, 1.0};
  const Matrix ortho = linalg::rotation_about_axis(std::vector<double>{1, 2, 3}, 0.4) *
                       Matrix::diagonal(3, 2, d);
  CHECK(theory::column_norm_product(ortho) == doctest::Approx(linalg::psdet(ortho)).epsilon(1e-12));
}

TEST_CASE("volume bound: col(M V^T) >= psdet(M), equality at the orthogonalizing V") {
  Rng rng(10);
  const Matrix m = randn(4, 3, rng);
  const double psdet = linalg::psdet(m);
  for (int t = 0; t < 100; ++t) {
    const Matrix v = linalg::random_orthogonal(3, rng());
    CHECK(theory::column_norm_product(m * v.transpose()) >= psdet * (1 - 1e-12));
  }
  const auto rot = theory::orthogonalizing_rotation(m);
  CHECK(theory::column_norm_product(m * rot.v.transpose()) ==
        doctest::Approx(psdet).epsilon(1e-10));
}

TEST_CASE("orthogonalizing rotation") {
  const auto r = theory::orthogonalizing_rotation(m2());
  const Matrix rotated = m2() * r.v.transpose();
  CHECK(theory::max_column_cosine(rotated) < 1e-8);
  CHECK(linalg::psdet(rotated) == doctest::Approx(linalg::psdet(m2())).epsilon(1e-12));
  // the orthogonalized column product equals psdet(M2) = sqrt(134)
  CHECK(theory::column_norm_product(rotated) == doctest::Approx(std::sqrt(134.0)).epsilon(1e-10));
  CHECK(theory::column_norm_product(rotated) < std::sqrt(61.0 * 45.0 / 4.0));

  const double d[] = {2.0, 5.0, 1.0};
  const Matrix colortho = linalg::random_orthogonal(4, 3) * Matrix::diagonal(4, 3, d);
  CHECK(is_signed_permutation(theory::orthogonalizing_rotation(colortho).v, 1e-9));

  CHECK(theory::orthogonalizing_rotation(Matrix::identity(2)).degenerate);
}

TEST_CASE("axes-preserving check") {
  const double d[] = {2.0, 1.0};
  CHECK(theory::axes_preserving_check(Matrix::diagonal(3, 2, d)) == theory::AxesPreserving::yes);
  CHECK(theory::axes_preserving_check(m1()) == theory::AxesPreserving::no);
  CHECK(theory::axes_preserving_check(Matrix::identity(2)) == theory::AxesPreserving::degenerate);
  const Matrix q = linalg::random_orthogonal(3, 12);
  const Matrix m = q * Matrix::diagonal(3, 2, d);
  CHECK(theory::axes_preserving_check(m) == theory::AxesPreserving::yes);
  CHECK(is_signed_permutation(linalg::svd(m).v, 1e-9));
}

TEST_CASE("AM-GM and Hadamard inequalities") {
  Rng rng(13);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(2 + t % 4);
    for (double& v : a) v = u(rng);
    if (t % 10 == 0) std::fill(a.begin(), a.end(), a[0]);
    double am = 0, lg = 0;
    for (double v : a) {
      am += v;
      lg += std::log(v);
    }
    am /= static_cast<double>(a.size());
    const double gm = std::exp(lg / static_cast<double>(a.size()));
    CHECK(am >= gm * (1 - 1e-12));
    const bool all_equal = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; });
    CHECK((std::abs(am - gm) <= 1e-9 * am) == all_equal);
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + t % 4;
    const Matrix m = randn(n, n, rng);
    CHECK(theory::column_norm_product(m) >= std::abs(linalg::determinant(m)) * (1 - 1e-12));
    const double d[] = {1.0, 2.0, 3.0, 4.0, 5.0};
    const Matrix o = linalg::random_orthogonal(n, rng()) * Matrix::diagonal(std::span(d, n));
    CHECK(theory::column_norm_product(o) ==
          doctest::Approx(std::abs(linalg::determinant(o))).epsilon(1e-10));
  }
}

TEST_CASE("column orthogonality equivalences on random SVDs") {
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + t % 3;
    std::vector<std::size_t> first(d);
    for (std::size_t j = 0; j < d; ++j) first[j] = j;
    const Matrix u = linalg::random_orthogonal(d + 1, rng()).select_columns(first);
    std::vector<double> s(d);
    for (std::size_t j = 0; j < d; ++j) s[j] = 1.0 + static_cast<double>(j) * 0.7;
    // half the cases have a signed-permutation V, the rest a generic one
    Matrix v = linalg::random_orthogonal(d, rng());
    if (t % 2 == 0) {
      v = Matrix(d, d);
      for (std::size_t j = 0; j < d; ++j) v(j, (j + t) % d) = (j % 2) ? -1.0 : 1.0;
    }
    const Matrix sv = Matrix::diagonal(s) * v.transpose();
    const Matrix m = u * sv;
    const Matrix g = linalg::gram(m);
    double off = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) off = std::max(off, std::abs(g(i, j)));
    const bool cols_m = theory::max_column_cosine(m) < 1e-9;
    const bool gram_diag = off < 1e-9;
    const bool cols_sv = theory::max_column_cosine(sv) < 1e-9;
    CHECK(cols_m == gram_diag);
    CHECK(cols_m == cols_sv);
    CHECK(cols_m == (t % 2 == 0));
  }
}

TEST_CASE("global lower bound") {
  SUBCASE("identity, zero budget") {
    const theory::IsolatedProblem p({Matrix::identity(3)}, 0.0);
    CHECK(theory::global_lower_bound(p) == doctest::Approx(std::log(3.0)));
  }
  SUBCASE("M1 alone") {
    const double c = 0.4;
    const theory::IsolatedProblem p({m1()}, Budget::on_log_std(c).log_variance_total());
    const double bound = theory::global_lower_bound(p);
    // the bound allows rotating M1 to orthogonal columns: 2 sqrt(134) e^-C
    CHECK(bound == doctest::Approx(std::log(2 * std::sqrt(134.0) * std::exp(-c))).epsilon(1e-13));
    // without rotation the optimum is the worked example's 2 sqrt(150) e^-C
    const double unrotated = std::log(theory::optimal_sigmas(m1(), Budget::on_log_std(c)).minimum);
    CHECK(unrotated == doctest::Approx(std::log(24.495 * std::exp(-c))).epsilon(1e-4));
    CHECK(bound < unrotated);
    // for column-orthogonal J both agree
    const auto r = theory::orthogonalizing_rotation(m1());
    const Matrix j = m1() * r.v.transpose();
    const theory::IsolatedProblem q({j}, Budget::on_log_std(c).log_variance_total());
    CHECK(theory::global_lower_bound(q) ==
          doctest::Approx(std::log(theory::optimal_sigmas(j, Budget::on_log_std(c)).minimum))
              .epsilon(1e-12));
  }
  SUBCASE("bound below the objective at random assignments") {
    const auto p = theory::random_problem(6, 5, 3, 21);
    const double bound = theory::global_lower_bound(p);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto a = theory::random_start(p, s);
      REQUIRE(theory::is_feasible(p, a));
      CHECK(theory::objective(p, a) >= bound - 1e-12);
    }
  }
}

TEST_CASE("local improvement steps") {
  SUBCASE("one AM-GM step on M2 with equal variances") {
    const theory::IsolatedProblem p({m2()}, 0.0);
    theory::Assignment a{{Matrix::identity(2)}, {{1.0, 1.0}}};
    const auto r = theory::local_improvement_step(p, a, theory::MoveKind::am_gm);
    CHECK(r.status == theory::StepStatus::improved);
    CHECK(r.move == theory::MoveKind::am_gm);
    CHECK(r.objective_after < r.objective_before);
    CHECK(theory::objective(p, a) == doctest::Approx(r.objective_after));
    CHECK(theory::is_feasible(p, a));
  }
  SUBCASE("optimal assignment is certified without moving") {
    const auto rot = theory::orthogonalizing_rotation(m1());
    const theory::IsolatedProblem p({m1()}, 0.0);
    const Matrix j = m1() * rot.v.transpose();
    const auto s = theory::optimal_sigmas(j, Budget::on_log_variance(0.0));
    theory::Assignment a{{rot.v.transpose()}, {s.sigmas2}};
    const auto r = theory::local_improvement_step(p, a);
    CHECK(r.status == theory::StepStatus::optimal);
    CHECK(r.move == theory::MoveKind::none);
  }
  SUBCASE("random starts converge to the bound with axes-preserving products") {
    for (std::uint64_t k = 0; k < 5; ++k) {
      const auto p = theory::random_problem(4, 4 + k % 3, 2 + k % 3, 100 + k);
      const double bound = theory::global_lower_bound(p);
      for (std::uint64_t s = 0; s < 20; ++s) {
        auto a = theory::random_start(p, 1000 * k + s);
        const auto run = theory::improve_until_optimal(p, a);
        CHECK(run.status == theory::StepStatus::optimal);
        CHECK(std::abs(run.objective - bound) <= 1e-5 * std::max(1.0, std::abs(bound)));
        for (std::size_t i = 0; i < p.samples(); ++i) {
          CHECK(theory::axes_preserving_check(p.jacobians()[i] * a.rotations[i]) ==
                theory::AxesPreserving::yes);
        }
      }
    }
  }
}

TEST_CASE("isolated problem validation and certificate") {
  CHECK_THROWS_AS(theory::IsolatedProblem({m1(), Matrix(3, 3, 1.0)}, 0.0), ShapeError);
  CHECK_THROWS_AS(theory::IsolatedProblem({Matrix(3, 2, 1.0)}, 0.0), DegenerateError);
  const theory::IsolatedProblem p({m1()}, 0.0);
  auto a = theory::random_start(p, 1);
  theory::improve_until_optimal(p, a);
  const auto j = nlohmann::json::parse(theory::certificate_json(p, a));
  CHECK(j.contains("objective"));
  CHECK(j.contains("lower_bound"));
  CHECK(j.at("samples").at(0).contains("sigmas2"));
}

TEST_CASE("pca") {
  SUBCASE("points on the x axis") {
    Matrix x(50, 2);
    for (std::size_t i = 0; i < 50; ++i) x(i, 0) = static_cast<double>(i) - 10.0;
    const auto p = theory::pca_fit(x, 1);
    CHECK(std::abs(p.components(0, 0)) == doctest::Approx(1.0));
    CHECK(p.components(0, 1) == doctest::Approx(0.0));
    CHECK(p.reconstruction_error(x) < 1e-20);
  }
  SUBCASE("isotropic unit square is degenerate, a stretched one is not") {
    Rng rng(15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix sq(50000, 2), st(50000, 2);
    for (std::size_t i = 0; i < 50000; ++i) {
      sq(i, 0) = u(rng);
      sq(i, 1) = u(rng);
      st(i, 0) = 1.5 * sq(i, 0);
      st(i, 1) = sq(i, 1);
    }
    CHECK(theory::pca_fit(sq, 1).degenerate);
    CHECK_FALSE(theory::pca_fit(st, 1).degenerate);
  }
  SUBCASE("no trained linear autoencoder beats PCA") {
    Rng rng(16);
    Matrix x = randn(2000, 3, rng);
    const Matrix mix = Matrix::from_rows({{2.0, 0.5, 0.1}, {0.0, 1.0, 0.3}, {0.0, 0.0, 0.2}});
    x = x * mix;
    const auto pca = theory::pca_fit(x, 2);
    Matrix centered = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < 3; ++j) centered(i, j) -= pca.mean[j];

    models::ModelSpec s;
    s.kind = models::ModelKind::ae;
    s.input_dim = 3;
    s.latent_dim = 2;
    s.activation = nets::Activation::linear;
    models::Autoencoder ae(s);
    Rng init(17);
    ae.init(init);
    models::TrainConfig cfg;
    cfg.epochs = 60;
    cfg.optimizer.learning_rate = 1e-2;
    models::train(ae, centered, centered, cfg);
    const double ae_err = ae.evaluate(centered, Matrix(2000, 2)).rec_total;
    CHECK(pca.reconstruction_error(centered) <= ae_err + 1e-6);
    CHECK(ae_err < 2.0 * pca.reconstruction_error(centered));  // the AE did learn something
  }
}
