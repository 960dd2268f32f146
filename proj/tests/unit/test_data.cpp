#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "orthovae/data.hpp"
#include "orthovae/errors.hpp"
#include "orthovae/rng.hpp"

using namespace orthovae;
using linalg::Matrix;

namespace {

// Rodrigues' formula written out by hand.
Matrix rodrigues(double kx, double ky, double kz, double angle) {
  const double n = std::sqrt(kx * kx + ky * ky + kz * kz);
  kx /= n;
  ky /= n;
  kz /= n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  return Matrix::from_rows({{c + t * kx * kx, t * kx * ky - s * kz, t * kx * kz + s * ky},
                            {t * kx * ky + s * kz, c + t * ky * ky, t * ky * kz - s * kx},
                            {t * kx * kz - s * ky, t * ky * kz + s * kx, c + t * kz * kz}});
}

Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows(), c = x.cols();
  std::vector<double> mean(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) mean[j] += x(i, j) / static_cast<double>(n);
  Matrix cov(c, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b)
        cov(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]) / static_cast<double>(n);
  return cov;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("orthovae_data_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("linear embedding") {
  const Matrix e = data::linear_embedding(2.0);
  const Matrix r = rodrigues(1, -1, 1, std::numbers::pi / 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(e(i, 0) == doctest::Approx(2.0 * r(i, 0)).epsilon(1e-14));
    CHECK(e(i, 1) == doctest::Approx(r(i, 1)).epsilon(1e-14));
  }
  const Matrix g = linalg::gram(e);
  CHECK(g(0, 0) == doctest::Approx(4.0));
  CHECK(g(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(g(0, 1)) < 1e-14);
  // the axis is fixed by the rotation
  const std::vector<double> axis = {1, -1, 1};
  const auto ra = r * std::span<const double>(axis);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ra[i] == doctest::Approx(axis[i]));
  CHECK_THROWS_AS(data::linear_embedding(0.0), ConfigError);
}

TEST_CASE("linear dataset: factors, inputs and covariance") {
  const auto ds = data::generate_linear(0);
  REQUIRE(ds.size() == 50000);
  CHECK(ds.inputs.cols() == 3);
  CHECK(ds.factors.cols() == 2);
  const auto [lo, hi] = std::ranges::minmax(ds.factors.values());
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);

  const auto eig = linalg::symmetric_eigen(covariance(ds.inputs));
  std::vector<double> ev = eig.values;
  std::ranges::sort(ev, std::greater<>());
  CHECK(ev[0] == doctest::Approx(4.0 / 12.0).epsilon(0.03));
  CHECK(ev[1] == doctest::Approx(1.0 / 12.0).epsilon(0.03));
  CHECK(std::abs(ev[2]) < 1e-12);

  const Matrix e = data::linear_embedding(2.0);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto x = e * ds.factors.row(i);
    for (std::size_t j = 0; j < 3; ++j) CHECK(ds.inputs(i, j) == doctest::Approx(x[j]));
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = data::generate_linear(5, 1.5, 1000);
  const auto b = data::generate_linear(5, 1.5, 1000);
  const auto c = data::generate_linear(6, 1.5, 1000);
  CHECK(a.inputs == b.inputs);
  CHECK_FALSE(a.inputs == c.inputs);
  const auto n1 = data::generate_nonlinear(3, 500);
  const auto n2 = data::generate_nonlinear(3, 500);
  CHECK(n1.inputs == n2.inputs);
  CHECK(n1.generator == n2.generator);
}

TEST_CASE("nonlinear dataset") {
  const auto ds = data::generate_nonlinear(0, 2000);
  CHECK(ds.inputs.cols() == 6);
  CHECK(ds.generator.input_dim() == 2);
  CHECK(ds.generator.output_dim() == 6);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto y = ds.generator.forward(ds.factors.row(i));
    for (std::size_t j = 0; j < 6; ++j) CHECK(ds.inputs(i, j) == doctest::Approx(y[j]).epsilon(1e-13));
    const auto s = linalg::singular_values(ds.generator.jacobian(ds.factors.row(i)));
    CHECK(s.size() == 2);
    CHECK(s[1] > 1e-6 * s[0]);
  }
}

TEST_CASE("splits") {
  const auto idx = data::split_indices(50000, {0.8, 0.1, 0.1}, 0);
  CHECK(idx.train.size() == 40000);
  CHECK(idx.eval.size() == 5000);
  CHECK(idx.test.size() == 5000);
  std::set<std::size_t> all(idx.train.begin(), idx.train.end());
  all.insert(idx.eval.begin(), idx.eval.end());
  all.insert(idx.test.begin(), idx.test.end());
  CHECK(all.size() == 50000);
  CHECK(*all.rbegin() == 49999);

  const auto again = data::split_indices(50000, {0.8, 0.1, 0.1}, 0);
  CHECK(again.train == idx.train);
  CHECK(data::split_indices(50000, {0.8, 0.1, 0.1}, 1).train != idx.train);

  const auto odd = data::split_indices(7, {0.5, 0.25, 0.25}, 2);
  CHECK(odd.train.size() == 3);
  CHECK(odd.eval.size() == 1);
  CHECK(odd.test.size() == 3);
  CHECK_THROWS_AS(data::split_indices(10, {0.5, 0.5, 0.5}, 0), ConfigError);

  const auto ds = data::generate_linear(1, 2.0, 100);
  const auto parts = data::split(ds);
  CHECK(parts.train.size() + parts.eval.size() + parts.test.size() == 100);
  const auto sub = data::subset(ds, {3, 7});
  CHECK(sub.inputs.row(1)[2] == ds.inputs.row(7)[2]);
  CHECK_THROWS_AS(data::subset(ds, {100}), ShapeError);
}

TEST_CASE("csv round trip") {
  TempDir dir;
  SUBCASE("linear") {
    const auto ds = data::generate_linear(2, 1.5, 300);
    const auto path = dir.path / "lin.csv";
    data::write_dataset(path, ds);
    CHECK(std::filesystem::exists(data::sidecar_path(path)));
    const auto back = data::read_dataset(path);
    CHECK(back.inputs == ds.inputs);
    CHECK(back.factors == ds.factors);
    CHECK(back.spec.kind == data::DatasetKind::linear);
    CHECK(back.spec.ratio == 1.5);
  }
  SUBCASE("nonlinear keeps its generator") {
    const auto ds = data::generate_nonlinear(4, 200);
    const auto path = dir.path / "nonlin.csv";
    data::write_dataset(path, ds);
    const auto back = data::read_dataset(path);
    CHECK(back.inputs == ds.inputs);
    CHECK(back.generator == ds.generator);
  }
  SUBCASE("malformed files") {
    CHECK_THROWS(data::read_dataset(dir.path / "missing.csv"));
  }
}
