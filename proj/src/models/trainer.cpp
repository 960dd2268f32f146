#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/models.hpp"
#include "orthovae/text_io.hpp"

namespace orthovae::models {

namespace {

Matrix leading_rows(const Matrix& x, std::size_t n) {
  n = std::min(n, x.rows());
  Matrix out(n, x.cols());
  std::copy_n(x.data(), n * x.cols(), out.data());
  return out;
}

TraceRow evaluate_row(const Autoencoder& model, const Matrix& eval_x, const Matrix& eval_noise,
                      std::size_t step) {
  TraceRow row;
  row.step = step;
  row.loss = model.evaluate(eval_x, eval_noise);
  if (model.posterior() == PosteriorKind::diagonal) {
    row.delta_kl = delta_kl(row.loss.kl, row.loss.kl_approx);
  }
  return row;
}

}  // namespace

TrainResult train(Autoencoder& model, const Matrix& train_x, const Matrix& eval_x,
                  const TrainConfig& config) {
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (config.eval_every == 0) throw ConfigError("train: eval_every must be positive");
  if (train_x.cols() != model.input_dim()) throw ShapeError("train: data width mismatch");
  if (model.covariance_rotation()) {
    throw ConfigError("train: rotated full-covariance models are evaluation-only");
  }

  TrainResult result;
  nets::OptimizerState opt(config.optimizer, model.param_count());
  Rng shuffle_rng(derive_seed(config.seed, stream::kShuffle));
  Rng noise_rng(derive_seed(config.seed, stream::kNoise));
  std::normal_distribution<double> normal;

  const bool have_eval = !eval_x.empty() && eval_x.rows() >= 2;
  Matrix eval_subset;
  Matrix eval_noise;
  if (have_eval) {
    eval_subset = leading_rows(eval_x, std::max<std::size_t>(config.eval_samples, 2));
    eval_noise = Matrix(eval_subset.rows(), model.latent_dim());
    Rng eval_rng(derive_seed(config.seed, stream::kMetrics));
    for (double& v : eval_noise.values()) v = normal(eval_rng);
  }

  const std::size_t n = train_x.rows();
  const std::size_t d = model.latent_dim();
  const std::size_t width = train_x.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainWorkspace ws;
  std::vector<double> params;
  std::vector<double> good;
  model.copy_params_to(good);
  Matrix batch;
  Matrix noise;

  for (std::size_t epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      batch.resize(b, width);
      noise.resize(b, d);
      for (std::size_t i = 0; i < b; ++i) {
        const auto src = train_x.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
      }
      for (double& v : noise.values()) v = normal(noise_rng);

      const LossBreakdown loss = model.loss_and_gradient(batch, noise, ws);
      if (!std::isfinite(loss.objective())) {
        model.set_params(good);
        result.diverged = true;
        result.divergence = "non-finite loss at step " + std::to_string(result.steps + 1);
        break;
      }
      model.copy_params_to(params);
      good = params;
      try {
        opt.step(params, ws.grad);
      } catch (const NumericalError& e) {
        result.diverged = true;
        result.divergence = e.what();
        break;
      }
      model.set_params(params);
      ++result.steps;

      if (have_eval && result.steps % config.eval_every == 0) {
        result.trace.push_back(evaluate_row(model, eval_subset, eval_noise, result.steps));
      }
    }
    if (result.diverged) break;
    result.epochs_completed = epoch + 1;
    if (std::find(config.snapshot_epochs.begin(), config.snapshot_epochs.end(),
                  result.epochs_completed) != config.snapshot_epochs.end()) {
      result.snapshots.emplace_back(result.epochs_completed, model);
    }
  }
  return result;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "step,rec_total,rec_det,rec_stoch,kl,kl_approx,delta_kl\n";
  for (const auto& r : trace) {
    out << r.step << ',' << text::format_double(r.loss.rec_total) << ','
        << text::format_double(r.loss.rec_det) << ',' << text::format_double(r.loss.rec_stoch)
        << ',' << text::format_double(r.loss.kl) << ',' << text::format_double(r.loss.kl_approx)
        << ','
        << text::format_double(r.delta_kl ? *r.delta_kl
                                          : std::numeric_limits<double>::quiet_NaN())
        << '\n';
  }
  return out.str();
}

}  // namespace orthovae::models
