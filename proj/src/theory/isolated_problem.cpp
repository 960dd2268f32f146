#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "orthovae/errors.hpp"
#include "orthovae/rng.hpp"
#include "orthovae/theory.hpp"
#include "orthovae/tolerances.hpp"

namespace orthovae::theory {

namespace {

// Per-sample quantities the lemma moves look at.
struct SampleState {
  Matrix m;                    // J_i R_i
  std::vector<double> norms2;  // |c_j|^2
  std::vector<double> terms;   // a_j = |c_j|^2 s2_j
  double amgm_slack = 0.0;     // log mean(a) - mean log(a)
  double hadamard_slack = 0.0; // (2/d)(log prod |c_j| - log psdet)
  double max_cos = 0.0;
  std::size_t pair_j = 0;
  std::size_t pair_k = 0;
  double log_objective = 0.0;  // log sum_j a_j
};

double column_dot(const Matrix& m, std::size_t j, std::size_t k) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, j) * m(r, k);
  return s;
}

SampleState sample_state(const IsolatedProblem& p, const Assignment& a, std::size_t i) {
  SampleState st;
  st.m = p.jacobians()[i] * a.rotations[i];
  const std::size_t d = st.m.cols();
  st.norms2 = column_norms_squared(st.m);
  st.terms.resize(d);
  double sum = 0.0;
  double log_sum = 0.0;
  double log_norms = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    st.terms[j] = st.norms2[j] * a.sigmas2[i][j];
    sum += st.terms[j];
    log_sum += std::log(st.terms[j]);
    log_norms += std::log(st.norms2[j]);
  }
  const double dd = static_cast<double>(d);
  st.log_objective = std::log(sum);
  st.amgm_slack = std::max(0.0, std::log(sum / dd) - log_sum / dd);
  st.hadamard_slack = std::max(0.0, (log_norms - 2.0 * p.log_psdet(i)) / dd);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      const double c =
          std::abs(column_dot(st.m, j, k)) / std::sqrt(st.norms2[j] * st.norms2[k]);
      if (c > st.max_cos) {
        st.max_cos = c;
        st.pair_j = j;
        st.pair_k = k;
      }
    }
  }
  return st;
}

double sample_log_objective(const Matrix& m, std::span<const double> s2) {
  return std::log(expected_stochastic_loss(m, s2));
}

void rotate_columns(Matrix& r, std::size_t j, std::size_t k, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t row = 0; row < r.rows(); ++row) {
    const double a = r(row, j);
    const double b = r(row, k);
    r(row, j) = c * a + s * b;
    r(row, k) = -s * a + c * b;
  }
}

// Variances s2_j proportional to 1/|c_j|^2 with the sample's product kept.
std::vector<double> rebalanced(const Matrix& m, std::span<const double> s2) {
  const auto n2 = column_norms_squared(m);
  double log_total = 0.0;
  for (std::size_t j = 0; j < n2.size(); ++j) log_total += std::log(n2[j]) + std::log(s2[j]);
  const double log_lambda = log_total / static_cast<double>(n2.size());
  std::vector<double> out(n2.size());
  for (std::size_t j = 0; j < n2.size(); ++j) out[j] = std::exp(log_lambda - std::log(n2[j]));
  return out;
}

bool try_am_gm(const SampleState& st, std::vector<double>& s2, StepResult& r) {
  const auto [lo, hi] = std::minmax_element(st.terms.begin(), st.terms.end());
  const auto i_min = static_cast<std::size_t>(lo - st.terms.begin());
  const auto i_max = static_cast<std::size_t>(hi - st.terms.begin());
  if (i_min == i_max) return false;
  for (double delta = tol::kImprovementInitialStep; delta >= tol::kImprovementMinStep;
       delta *= 0.5) {
    if (!(st.terms[i_max] > st.terms[i_min] * (1.0 + delta))) continue;
    std::vector<double> trial = s2;
    trial[i_max] /= 1.0 + delta;
    trial[i_min] *= 1.0 + delta;
    const double after = sample_log_objective(st.m, trial);
    if (after < st.log_objective) {
      s2 = std::move(trial);
      r.delta = delta;
      return true;
    }
  }
  return false;
}

bool try_hadamard(const SampleState& st, Matrix& rotation, std::vector<double>& s2,
                  StepResult& r) {
  if (st.max_cos == 0.0) return false;
  const double ip = std::abs(column_dot(st.m, st.pair_j, st.pair_k));
  for (double delta = tol::kImprovementInitialStep; delta >= tol::kImprovementMinStep;
       delta *= 0.5) {
    for (double sign : {1.0, -1.0}) {
      Matrix m = st.m;
      rotate_columns(m, st.pair_j, st.pair_k, sign * delta);
      if (!(std::abs(column_dot(m, st.pair_j, st.pair_k)) < ip)) continue;
      const auto trial = rebalanced(m, s2);
      const double after = sample_log_objective(m, trial);
      // The pair product strictly drops; the objective may only tie at
      // rounding level once the columns are nearly orthogonal.
      if (after <= st.log_objective + 4.0 * std::numeric_limits<double>::epsilon() *
                                          std::max(1.0, std::abs(st.log_objective))) {
        rotate_columns(rotation, st.pair_j, st.pair_k, sign * delta);
        s2 = trial;
        r.delta = sign * delta;
        return true;
      }
    }
  }
  return false;
}

}  // namespace

double expected_stochastic_loss(const Matrix& j, std::span<const double> sigmas2) {
  if (sigmas2.size() != j.cols()) throw ShapeError("expected_stochastic_loss: sigma count");
  const auto n2 = column_norms_squared(j);
  double s = 0.0;
  for (std::size_t c = 0; c < n2.size(); ++c) s += n2[c] * sigmas2[c];
  return s;
}

std::vector<double> column_norms_squared(const Matrix& j) {
  std::vector<double> out(j.cols(), 0.0);
  for (std::size_t r = 0; r < j.rows(); ++r) {
    for (std::size_t c = 0; c < j.cols(); ++c) out[c] += j(r, c) * j(r, c);
  }
  return out;
}

double column_norm_product(const Matrix& j) {
  double p = 1.0;
  for (double v : column_norms_squared(j)) p *= std::sqrt(v);
  return p;
}

SigmaAllocation optimal_sigmas(const Matrix& j, Budget budget) {
  const auto n2 = column_norms_squared(j);
  double log_prod = 0.0;
  for (std::size_t c = 0; c < n2.size(); ++c) {
    if (!(n2[c] > 0.0)) {
      throw DegenerateError("optimal_sigmas: column " + std::to_string(c) +
                            " is zero; its precision is unbounded");
    }
    log_prod += std::log(n2[c]);
  }
  const double d = static_cast<double>(n2.size());
  const double log_lambda = (log_prod - budget.log_variance_total()) / d;
  SigmaAllocation out;
  out.sigmas2.resize(n2.size());
  for (std::size_t c = 0; c < n2.size(); ++c) {
    out.sigmas2[c] = std::exp(log_lambda - std::log(n2[c]));
  }
  out.minimum = d * std::exp(log_lambda);
  return out;
}

OrthogonalizingRotation orthogonalizing_rotation(const Matrix& j) {
  const auto f = linalg::svd(j);
  if (f.sigma.back() <= tol::kRankRelative * f.sigma.front()) {
    throw DegenerateError("orthogonalizing_rotation: matrix is not of full column rank");
  }
  OrthogonalizingRotation out;
  out.v = f.v.transpose();
  for (std::size_t k = 0; k + 1 < f.sigma.size(); ++k) {
    if (f.sigma[k] - f.sigma[k + 1] <= tol::kDegenerateSingular * f.sigma[k]) {
      out.degenerate = true;
    }
  }
  return out;
}

const char* axes_preserving_name(AxesPreserving a) noexcept {
  switch (a) {
    case AxesPreserving::yes:
      return "yes";
    case AxesPreserving::no:
      return "no";
    case AxesPreserving::degenerate:
      return "degenerate";
  }
  return "no";
}

AxesPreserving axes_preserving_check(const Matrix& m, double tolerance) {
  const auto s = linalg::singular_values(m);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    if (s[k] - s[k + 1] <= tol::kDegenerateSingular * s[k]) return AxesPreserving::degenerate;
  }
  const Matrix g = linalg::gram(m);
  for (std::size_t j = 0; j < g.rows(); ++j) {
    for (std::size_t k = j + 1; k < g.cols(); ++k) {
      if (std::abs(g(j, k)) > tolerance * std::sqrt(g(j, j) * g(k, k))) return AxesPreserving::no;
    }
  }
  return AxesPreserving::yes;
}

double max_column_cosine(const Matrix& m) {
  const auto n2 = column_norms_squared(m);
  double best = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t k = j + 1; k < m.cols(); ++k) {
      const double denom = std::sqrt(n2[j] * n2[k]);
      if (denom > 0.0) best = std::max(best, std::abs(column_dot(m, j, k)) / denom);
    }
  }
  return best;
}

IsolatedProblem::IsolatedProblem(std::vector<Matrix> jacobians, double c1)
    : jacobians_(std::move(jacobians)), c1_(c1) {
  if (jacobians_.empty()) throw ShapeError("IsolatedProblem: no samples");
  if (!std::isfinite(c1_)) throw ConfigError("IsolatedProblem: budget must be finite");
  const std::size_t d = jacobians_.front().cols();
  for (const auto& j : jacobians_) {
    if (j.cols() != d) throw ShapeError("IsolatedProblem: Jacobians differ in width");
    if (j.rows() < d) throw ShapeError("IsolatedProblem: Jacobian has fewer rows than columns");
    log_psdet_.push_back(std::log(linalg::psdet(j)));
  }
}

double objective(const IsolatedProblem& p, const Assignment& a) {
  if (a.rotations.size() != p.samples() || a.sigmas2.size() != p.samples()) {
    throw ShapeError("objective: assignment does not match the problem");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.samples(); ++i) {
    total += sample_log_objective(p.jacobians()[i] * a.rotations[i], a.sigmas2[i]);
  }
  return total;
}

double global_lower_bound(const IsolatedProblem& p) {
  const double d = static_cast<double>(p.latent_dim());
  double s = 0.0;
  for (std::size_t i = 0; i < p.samples(); ++i) s += p.log_psdet(i);
  return static_cast<double>(p.samples()) * std::log(d) - p.c1() / d + 2.0 / d * s;
}

bool is_feasible(const IsolatedProblem& p, const Assignment& a) {
  if (a.rotations.size() != p.samples() || a.sigmas2.size() != p.samples()) return false;
  double neg_log = 0.0;
  for (std::size_t i = 0; i < p.samples(); ++i) {
    if (linalg::orthogonality_defect(a.rotations[i]) > 1e-9) return false;
    for (double s : a.sigmas2[i]) {
      if (!(s > 0.0)) return false;
      neg_log -= std::log(s);
    }
  }
  return std::abs(neg_log - p.c1()) <= 1e-9 * std::max(1.0, std::abs(p.c1()));
}

Assignment random_start(const IsolatedProblem& p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 2.0);
  const std::size_t d = p.latent_dim();
  Assignment a;
  double neg_log = 0.0;
  for (std::size_t i = 0; i < p.samples(); ++i) {
    a.rotations.push_back(linalg::random_orthogonal(d, rng()));
    std::vector<double> logs(d);
    for (double& l : logs) {
      l = normal(rng);
      neg_log -= l;
    }
    a.sigmas2.push_back(std::move(logs));
  }
  const double shift = (neg_log - p.c1()) / static_cast<double>(p.samples() * d);
  for (auto& s : a.sigmas2) {
    for (double& v : s) v = std::exp(v + shift);
  }
  return a;
}

IsolatedProblem random_problem(std::size_t samples, std::size_t n, std::size_t d,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Matrix> js;
  for (std::size_t i = 0; i < samples; ++i) {
    Matrix j(n, d);
    for (double& v : j.values()) v = normal(rng);
    js.push_back(std::move(j));
  }
  const double range = static_cast<double>(d * samples);
  std::uniform_real_distribution<double> budget(-range, range);
  return IsolatedProblem(std::move(js), budget(rng));
}

const char* step_status_name(StepStatus s) noexcept {
  switch (s) {
    case StepStatus::improved:
      return "improved";
    case StepStatus::optimal:
      return "optimal";
    case StepStatus::stalled:
      return "stalled";
  }
  return "stalled";
}

StepResult local_improvement_step(const IsolatedProblem& p, Assignment& a, MoveKind preferred) {
  StepResult r;
  const double bound = global_lower_bound(p);
  std::vector<SampleState> states;
  double total = 0.0;
  double worst_cos = 0.0;
  for (std::size_t i = 0; i < p.samples(); ++i) {
    states.push_back(sample_state(p, a, i));
    total += states.back().log_objective;
    worst_cos = std::max(worst_cos, states.back().max_cos);
  }
  r.objective_before = total;
  r.objective_after = total;
  if (total - bound <= tol::kOptimalityRelative * std::max(std::abs(bound), 1.0) &&
      worst_cos <= tol::kColumnCosineSlack) {
    r.status = StepStatus::optimal;
    return r;
  }

  struct Candidate {
    double slack;
    std::size_t sample;
    MoveKind kind;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& st = states[i];
    const auto [lo, hi] = std::minmax_element(st.terms.begin(), st.terms.end());
    if (preferred != MoveKind::hadamard && *hi > *lo * (1.0 + tol::kBalanceSlack)) {
      candidates.push_back({st.amgm_slack, i, MoveKind::am_gm});
    }
    if (preferred != MoveKind::am_gm && st.max_cos > tol::kColumnCosineSlack) {
      candidates.push_back({st.hadamard_slack, i, MoveKind::hadamard});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.slack > y.slack; });

  for (const auto& c : candidates) {
    const auto& st = states[c.sample];
    const bool moved = c.kind == MoveKind::am_gm
                           ? try_am_gm(st, a.sigmas2[c.sample], r)
                           : try_hadamard(st, a.rotations[c.sample], a.sigmas2[c.sample], r);
    if (moved) {
      r.status = StepStatus::improved;
      r.move = c.kind;
      r.sample = c.sample;
      r.objective_after =
          total - st.log_objective +
          sample_log_objective(p.jacobians()[c.sample] * a.rotations[c.sample],
                               a.sigmas2[c.sample]);
      return r;
    }
  }
  r.status = StepStatus::stalled;
  return r;
}

ImprovementRun improve_until_optimal(const IsolatedProblem& p, Assignment& a,
                                     std::size_t max_steps) {
  ImprovementRun run;
  run.lower_bound = global_lower_bound(p);
  for (; run.steps < max_steps; ++run.steps) {
    const StepResult r = local_improvement_step(p, a);
    if (r.status != StepStatus::improved) {
      run.status = r.status;
      break;
    }
  }
  run.objective = objective(p, a);
  if (run.steps == max_steps) run.status = StepStatus::stalled;
  return run;
}

std::string certificate_json(const IsolatedProblem& p, const Assignment& a) {
  nlohmann::json out;
  out["objective"] = objective(p, a);
  out["lower_bound"] = global_lower_bound(p);
  out["c1"] = p.c1();
  out["feasible"] = is_feasible(p, a);
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < p.samples(); ++i) {
    const Matrix m = p.jacobians()[i] * a.rotations[i];
    samples.push_back({
        {"sigmas2", a.sigmas2[i]},
        {"rotation", std::vector<double>(a.rotations[i].values().begin(),
                                         a.rotations[i].values().end())},
        {"max_column_cosine", max_column_cosine(m)},
        {"axes_preserving", axes_preserving_name(axes_preserving_check(m))},
    });
  }
  out["samples"] = std::move(samples);
  return out.dump(2);
}

}  // namespace orthovae::theory
