#pragma once

// Config-driven runs: dataset generation, multi-seed training, metrics and
// aggregation, beta sweeps and the theory self-check.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orthovae/data.hpp"
#include "orthovae/metrics.hpp"
#include "orthovae/models.hpp"
#include "orthovae/nets.hpp"

namespace orthovae::experiment {

struct DatasetConfig {
  data::DatasetKind kind = data::DatasetKind::linear;
  std::uint64_t seed = 0;
  double ratio = data::kDefaultRatio;
  std::size_t samples = data::kDefaultSamples;
  std::string path;  // CSV to read; generated in memory when empty

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  models::ModelKind model = models::ModelKind::beta_vae;
  std::size_t latent_dim = 2;
  std::vector<std::size_t> encoder_hidden;
  std::vector<std::size_t> decoder_hidden;
  nets::Activation activation = nets::Activation::tanh;
  nets::OptimizerKind optimizer = nets::OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta = 1e-4;
  std::size_t epochs = 600;
  std::size_t batch_size = 64;
  std::size_t eval_every = 500;
  std::size_t eval_samples = 2000;
  std::size_t dto_samples = 256;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::size_t> snapshot_epochs;
  std::vector<double> beta_sweep;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Training defaults for the two synthetic tasks: Adam at 1e-3, 600
/// epochs, latent size 2; linear encoder/decoder with beta 1e-4 on the
/// linear task, 60-40-20 tanh hidden layers on both sides with beta 1e-3 on
/// the nonlinear one.
ExperimentConfig default_config(data::DatasetKind kind);

/// JSON text. Missing keys take the defaults of the dataset kind; unknown
/// keys and invalid values throw ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
std::string config_to_json(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);

models::ModelSpec model_spec(const ExperimentConfig& c, std::size_t input_dim);
models::TrainConfig train_config(const ExperimentConfig& c, std::uint64_t seed);

data::SyntheticDataset load_dataset(const DatasetConfig& c);
data::DatasetSplits load_splits(const DatasetConfig& c);

/// Metrics of a trained model on the test split. Point models treat every
/// latent coordinate as active.
metrics::MetricsReport evaluate_model(const models::Autoencoder& model,
                                      const data::SyntheticDataset& test,
                                      const std::vector<models::TraceRow>& trace,
                                      std::uint64_t seed, std::size_t dto_samples);

/// DtO of an untrained model of the same architecture, all coordinates
/// active, latents from its own encoder.
double random_decoder_dto(const ExperimentConfig& c, const data::SyntheticDataset& test,
                          std::uint64_t seed);

struct SnapshotOutcome {
  std::size_t epochs = 0;
  metrics::MetricsReport report;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t steps = 0;
  bool diverged = false;
  std::string divergence;
  metrics::MetricsReport report;
  double random_dto = 0.0;
  std::vector<SnapshotOutcome> snapshots;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t count = 0;
};
/// Mean and standard deviation of the finite values.
Aggregate aggregate(const std::vector<double>& values);

struct RunSummary {
  ExperimentConfig config;
  std::vector<SeedOutcome> seeds;
  Aggregate dto;
  Aggregate disentanglement;
  Aggregate polarized_fraction;
  Aggregate active_count;
  Aggregate random_dto;
};

RunSummary summarize(const ExperimentConfig& c, std::vector<SeedOutcome> seeds);

/// Trains one seed; when `seed_dir` is given writes model.ckpt, trace.csv,
/// train.json, metrics.json and one model_e<k>.ckpt per snapshot there.
SeedOutcome run_seed(const ExperimentConfig& c, const data::DatasetSplits& splits,
                     std::uint64_t seed, const std::optional<std::filesystem::path>& seed_dir);

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> out;  // runs root; the run lands in out/<name>
  bool overwrite = false;
  std::ostream* log = nullptr;
};

/// All seeds of a config, up to `jobs` at a time, then summary.{json,csv}.
RunSummary run_experiment(const ExperimentConfig& c, const RunOptions& options);

/// Recomputes metrics for every seed directory of a finished run.
RunSummary recompute_metrics(const std::filesystem::path& run_dir, const RunOptions& options);

std::string summary_json(const RunSummary& s);
/// seed,epochs,dto,disent,polarized_fraction,active_count,random_dto
/// per seed, then mean and std rows.
std::string summary_csv(const RunSummary& s);
/// Per-seed metrics including snapshots and the random-decoder baseline.
/// The "timestamp" field is the only part that varies between identical runs.
std::string metrics_json(const SeedOutcome& s);

struct SweepPoint {
  double beta = 0.0;
  RunSummary summary;
  bool overpruned = false;  // mean active count below the factor count
};

/// One run per beta (config.beta_sweep), named <name>_beta<value>; writes
/// sweep_disent.dat, sweep_dto.dat and sweep.gp to out/<name>_sweep.
std::vector<SweepPoint> sweep_beta(const ExperimentConfig& c, const RunOptions& options);

/// Text table over every summary.json found under `runs_root`.
std::string report(const std::filesystem::path& runs_root);

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Worked examples, bound tightness and improvement-loop convergence on
/// random problems.
std::vector<CheckLine> theory_check(std::size_t random_problems = 20, std::uint64_t seed = 1);

}  // namespace orthovae::experiment
