#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "orthovae/experiment.hpp"
#include "orthovae/linalg.hpp"
#include "orthovae/rng.hpp"
#include "orthovae/theory.hpp"

namespace orthovae::experiment {

namespace {

using linalg::Matrix;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool close(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::max(1.0, std::abs(want));
}

Matrix m1() { return Matrix::from_rows({{4.0, 1.0}, {-3.0, 1.0}, {5.0, -1.0}}); }

Matrix rotation45() {
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  return Matrix::from_rows({{c, -s}, {s, c}});
}

}  // namespace

std::vector<CheckLine> theory_check(std::size_t random_problems, std::uint64_t seed) {
  std::vector<CheckLine> lines;
  const double c = 0.7;  // any budget works; the minima scale as e^{-C}
  const double unit[] = {1.0, 0.0};
  const double unit2[] = {0.0, 1.0};

  const Matrix a = m1();
  const Matrix b = a * rotation45().transpose();

  {
    const double cx = theory::expected_stochastic_loss(a, unit);
    const double cy = theory::expected_stochastic_loss(a, unit2);
    lines.push_back({"M1 coefficients (50, 3)", close(cx, 50, 1e-12) && close(cy, 3, 1e-12),
                     fmt("got (%.12g, %.12g)", cx, cy)});
    const double min = theory::optimal_sigmas(a, theory::Budget::on_log_std(c)).minimum;
    const double want = 2.0 * std::sqrt(150.0) * std::exp(-c);
    lines.push_back({"M1 minimum 2 sqrt(150) e^-C", close(min, want, 1e-9),
                     fmt("got %.12g e^-C, want %.12g e^-C", min * std::exp(c), want * std::exp(c))});
  }
  {
    const double cx = theory::expected_stochastic_loss(b, unit);
    const double cy = theory::expected_stochastic_loss(b, unit2);
    lines.push_back({"M2 coefficients (61/2, 45/2)",
                     close(cx, 30.5, 1e-12) && close(cy, 22.5, 1e-12),
                     fmt("got (%.12g, %.12g)", cx, cy)});
    const double min = theory::optimal_sigmas(b, theory::Budget::on_log_std(c)).minimum;
    const double want = std::sqrt(2745.0) * std::exp(-c);
    lines.push_back({"M2 minimum sqrt(2745) e^-C", close(min, want, 1e-9),
                     fmt("got %.12g e^-C, want %.12g e^-C", min * std::exp(c), want * std::exp(c))});
  }
  {
    // Orthogonalizing the columns lowers the column-norm product to psdet.
    const auto rot = theory::orthogonalizing_rotation(a);
    const Matrix ortho = a * rot.v.transpose();
    const double col = theory::column_norm_product(ortho);
    const double psdet = linalg::psdet(a);
    lines.push_back({"col(M1 V^T) equals psdet(M1) = sqrt(134)",
                     close(col, std::sqrt(134.0), 1e-9) && close(psdet, std::sqrt(134.0), 1e-9),
                     fmt("col %.12g, psdet %.12g", col, psdet)});
    const auto ap = theory::axes_preserving_check(a);
    lines.push_back({"M1 not axes-preserving", ap == theory::AxesPreserving::no,
                     theory::axes_preserving_name(ap)});
  }
  {
    // Single-sample problem on M1: the improvement loop reaches the bound,
    // which sits below the unrotated optimum.
    const theory::IsolatedProblem p({a}, theory::Budget::on_log_std(c).log_variance_total());
    auto asg = theory::random_start(p, seed);
    const auto run = theory::improve_until_optimal(p, asg);
    const double bound = theory::global_lower_bound(p);
    const double want = std::log(2.0 * std::sqrt(134.0) * std::exp(-c));
    const double unrotated = std::log(2.0 * std::sqrt(150.0) * std::exp(-c));
    lines.push_back({"M1 isolated problem reaches the bound",
                     run.status == theory::StepStatus::optimal && close(bound, want, 1e-12) &&
                         close(run.objective, bound, 1e-7) && bound < unrotated,
                     fmt("objective %.12g, bound %.12g", run.objective, bound)});
  }

  // Random problems, each from several random starts.
  Rng rng(derive_seed(seed, stream::kData));
  std::size_t certified = 0, total = 0;
  double worst_gap = 0.0, worst_cos = 0.0;
  std::size_t not_axes = 0;
  for (std::size_t k = 0; k < random_problems; ++k) {
    const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(d, 8)(rng);
    const std::size_t samples = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    const auto p = theory::random_problem(samples, n, d, rng());
    const double bound = theory::global_lower_bound(p);
    for (std::size_t s = 0; s < 20; ++s) {
      auto asg = theory::random_start(p, rng());
      const auto run = theory::improve_until_optimal(p, asg);
      ++total;
      const double gap = std::abs(run.objective - bound) / std::max(1.0, std::abs(bound));
      worst_gap = std::max(worst_gap, gap);
      bool axes = true;
      for (std::size_t i = 0; i < p.samples(); ++i) {
        const Matrix jr = p.jacobians()[i] * asg.rotations[i];
        worst_cos = std::max(worst_cos, theory::max_column_cosine(jr));
        if (theory::axes_preserving_check(jr, 1e-6) != theory::AxesPreserving::yes) axes = false;
      }
      if (!axes) ++not_axes;
      if (run.status == theory::StepStatus::optimal && gap <= 1e-5 && axes &&
          theory::is_feasible(p, asg)) {
        ++certified;
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu/%zu runs certified, worst gap %.3g, worst |cos| %.3g", certified,
                total, worst_gap, worst_cos);
  lines.push_back({"random problems converge to the bound", certified == total, buf});
  std::snprintf(buf, sizeof buf, "%zu runs with a non axes-preserving J R", not_axes);
  lines.push_back({"converged J R are axes-preserving", not_axes == 0, buf});
  return lines;
}

}  // namespace orthovae::experiment
