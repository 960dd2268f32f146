#pragma once

// Autoencoder variants with a Gaussian encoder and a square-loss decoder.
//
// Loss convention: per sample, the reconstruction error is the unreduced sum
// of squares over output coordinates and the KL term is the closed form; the
// batch objective is the batch mean of (rec + beta * kl).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthovae/linalg.hpp"
#include "orthovae/nets.hpp"
#include "orthovae/rng.hpp"

namespace orthovae::models {

using linalg::Matrix;

enum class ModelKind { ae, vae, beta_vae, beta_vae_full };

std::string_view model_kind_name(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view name);

enum class PosteriorKind { point, diagonal, full };
PosteriorKind posterior_kind(ModelKind k) noexcept;

// ---------------------------------------------------------------------------
// Posteriors and KL terms

struct GaussianPosterior {
  std::vector<double> mean;
  std::vector<double> logvar;  // diagonal case
  Matrix factor;               // full case: lower-triangular, positive diagonal

  static GaussianPosterior diagonal(std::vector<double> mean, std::vector<double> logvar);
  /// Throws ShapeError for a non-square or non-lower-triangular factor and
  /// DegenerateError for a non-positive diagonal entry.
  static GaussianPosterior full(std::vector<double> mean, Matrix factor);

  std::size_t dim() const noexcept { return mean.size(); }
  bool is_full() const noexcept { return !factor.empty(); }
  /// Marginal variances (diagonal of the covariance).
  std::vector<double> variances() const;
  Matrix covariance() const;
};

/// 1/2 sum_j (mu_j^2 + s2_j - log s2_j - 1)
double kl_diagonal(const GaussianPosterior& p);
/// 1/2 (|mu|^2 + tr(L L^T) - 2 sum log L_jj - d)
double kl_full(const GaussianPosterior& p);
double kl(const GaussianPosterior& p);
/// Polarized-regime approximation: 1/2 sum_{j in active} (mu_j^2 - log s2_j - 1).
double kl_approx_polarized(const GaussianPosterior& p, std::span<const std::size_t> active);

/// |kl - kl_approx| / kl; empty when kl is not positive.
std::optional<double> delta_kl(double kl, double kl_approx);

/// Indices whose empirical standard deviation over the rows of `means`
/// exceeds `threshold`. Needs at least two rows.
std::vector<std::size_t> active_variables(const Matrix& means, double threshold = 0.5);

/// Diagonal posterior whose marginals match those of diag(exp(logvar))
/// rotated by q (mean q*mu, variances diag(q S q^T)). The rotated
/// distribution itself is not diagonal; this is its closest diagonal member.
GaussianPosterior rotate_diagonal_marginals(const GaussianPosterior& p, const Matrix& q);

// ---------------------------------------------------------------------------
// Losses

struct LossBreakdown {
  double rec_total = 0.0;
  double rec_det = 0.0;    // |Dec(mu) - x|^2
  double rec_stoch = 0.0;  // |Dec(z) - Dec(mu)|^2
  double kl = 0.0;
  double kl_approx = 0.0;
  double beta = 0.0;

  double objective() const noexcept { return rec_total + beta * kl; }
};

struct ModelSpec {
  ModelKind kind = ModelKind::beta_vae;
  std::size_t input_dim = 3;
  std::size_t latent_dim = 2;
  std::vector<std::size_t> encoder_hidden;
  std::vector<std::size_t> decoder_hidden;
  nets::Activation activation = nets::Activation::tanh;
  double beta = 1.0;  // forced to 0 for ae and 1 for vae
};

struct TrainWorkspace {
  nets::BatchWorkspace enc;
  nets::BatchWorkspace dec;
  Matrix latent;
  Matrix noise;
  Matrix enc_upstream;
  Matrix dec_upstream;
  std::vector<double> grad;
};

class Autoencoder {
 public:
  Autoencoder() = default;
  explicit Autoencoder(const ModelSpec& spec);
  Autoencoder(const ModelSpec& spec, nets::Mlp encoder, nets::Mlp decoder);

  void init(Rng& rng);

  const ModelSpec& spec() const noexcept { return spec_; }
  ModelKind kind() const noexcept { return spec_.kind; }
  PosteriorKind posterior() const noexcept { return posterior_kind(spec_.kind); }
  std::size_t latent_dim() const noexcept { return spec_.latent_dim; }
  std::size_t input_dim() const noexcept { return spec_.input_dim; }
  double beta() const noexcept { return spec_.beta; }
  /// Encoder output width for the posterior family.
  static std::size_t head_width(PosteriorKind kind, std::size_t latent_dim) noexcept;

  const nets::Mlp& encoder() const noexcept { return encoder_; }
  const nets::Mlp& decoder() const noexcept { return decoder_; }
  nets::Mlp& encoder() noexcept { return encoder_; }
  nets::Mlp& decoder() noexcept { return decoder_; }
  /// Covariance rotation applied after encoding (full models only).
  const std::optional<Matrix>& covariance_rotation() const noexcept { return cov_rotation_; }

  GaussianPosterior encode(std::span<const double> x) const;
  /// Posterior means for every row of `x`.
  Matrix encode_means(const Matrix& x) const;
  std::vector<double> decode(std::span<const double> z) const;
  Matrix decoder_jacobian(std::span<const double> z) const;

  /// Latent sample mu + scale * eps for one posterior.
  static std::vector<double> reparametrize(const GaussianPosterior& p, std::span<const double> eps);

  /// One-sample losses for a single input; noise drawn from `rng`.
  LossBreakdown reconstruction_losses(std::span<const double> x, Rng& rng) const;
  /// Same with explicit standard-normal noise (length latent_dim).
  LossBreakdown reconstruction_losses(std::span<const double> x, std::span<const double> eps) const;

  /// Batch-mean losses with explicit noise (rows x latent_dim; ignored for
  /// ae). kl_approx uses `active` when given, otherwise the batch's own
  /// active set.
  LossBreakdown evaluate(const Matrix& x, const Matrix& noise,
                         std::optional<std::span<const std::size_t>> active = std::nullopt) const;
  LossBreakdown evaluate(const Matrix& x, Rng& rng) const;

  /// Batch objective and its gradient. On return ws.grad holds
  /// [encoder params | decoder params]. rec_det, rec_stoch and kl_approx are
  /// left NaN; use evaluate() for the full breakdown.
  LossBreakdown loss_and_gradient(const Matrix& x, const Matrix& noise, TrainWorkspace& ws) const;

  std::size_t param_count() const noexcept {
    return encoder_.param_count() + decoder_.param_count();
  }
  void copy_params_to(std::vector<double>& out) const;
  void set_params(std::span<const double> p);

  enum class RotationMode { exact, mean_only };
  /// Enc(x) -> q Enc(x) and Dec(z) -> Dec(q^T z). Exact mode rotates the
  /// whole posterior and is only available for full-covariance models (the
  /// diagonal family is not closed under rotation; throws ConfigError).
  /// mean_only rotates the encoder means and leaves log-variances as they
  /// are. Point models accept either mode.
  void apply_latent_rotation(const Matrix& q, RotationMode mode = RotationMode::exact);

 private:
  friend Autoencoder from_model_text(std::string_view text);
  GaussianPosterior posterior_from_head(std::span<const double> head) const;

  ModelSpec spec_;
  nets::Mlp encoder_;
  nets::Mlp decoder_;
  std::optional<Matrix> cov_rotation_;
};

// Model files: a small header followed by the two network checkpoints.
std::string to_model_text(const Autoencoder& m);
Autoencoder from_model_text(std::string_view text);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  nets::OptimizerConfig optimizer;
  std::size_t epochs = 600;
  std::size_t batch_size = 64;
  std::size_t eval_every = 500;     // batches between evaluations
  std::size_t eval_samples = 2000;  // cap on evaluation rows
  std::uint64_t seed = 0;
  /// Epoch counts after which a copy of the model is kept.
  std::vector<std::size_t> snapshot_epochs;
};

struct TraceRow {
  std::size_t step = 0;
  LossBreakdown loss;
  std::optional<double> delta_kl;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::size_t steps = 0;
  std::size_t epochs_completed = 0;
  bool diverged = false;
  std::string divergence;
  std::vector<std::pair<std::size_t, Autoencoder>> snapshots;
};

/// Minibatch training with seeded shuffling. On a non-finite loss or
/// gradient the model is restored to the last parameters that produced a
/// finite loss and the result is marked diverged.
TrainResult train(Autoencoder& model, const Matrix& train_x, const Matrix& eval_x,
                  const TrainConfig& config);

/// Trace as CSV: step,rec_total,rec_det,rec_stoch,kl,kl_approx,delta_kl
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace orthovae::models
