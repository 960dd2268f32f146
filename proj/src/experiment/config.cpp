#include <cmath>
#include <set>
#include <string>

#include <json.hpp>

#include "orthovae/errors.hpp"
#include "orthovae/experiment.hpp"

namespace orthovae::experiment {

using nlohmann::json;

ExperimentConfig default_config(data::DatasetKind kind) {
  ExperimentConfig c;
  c.dataset.kind = kind;
  if (kind == data::DatasetKind::linear) {
    c.name = "synth_lin";
    c.activation = nets::Activation::linear;
    c.beta = 1e-4;
  } else {
    c.name = "synth_nonlin";
    c.encoder_hidden = {60, 40, 20};
    c.decoder_hidden = {60, 40, 20};
    c.beta = 1e-3;
  }
  return c;
}

namespace {

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError(std::string("unknown ") + where + " key '" + key + "'");
    }
  }
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.name.empty() || c.name.find('/') != std::string::npos) {
    throw ConfigError("config: name must be a non-empty single path component");
  }
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ConfigError("config: beta must be >= 0");
  if (c.epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (c.latent_dim < 1) throw ConfigError("config: latent_dim must be >= 1");
  if (c.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (c.eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
  if (c.dto_samples < 1) throw ConfigError("config: dto_samples must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
  if (c.seeds.empty()) throw ConfigError("config: seeds must not be empty");
  if (!(c.dataset.ratio > 0.0)) throw ConfigError("config: dataset ratio must be positive");
  if (c.dataset.samples < 10) throw ConfigError("config: dataset needs at least 10 samples");
  for (std::size_t w : c.encoder_hidden) {
    if (w == 0) throw ConfigError("config: hidden widths must be positive");
  }
  for (std::size_t w : c.decoder_hidden) {
    if (w == 0) throw ConfigError("config: hidden widths must be positive");
  }
  for (double b : c.beta_sweep) {
    if (!(b >= 0.0)) throw ConfigError("config: beta_sweep values must be >= 0");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "dataset", "model", "latent_dim", "encoder_hidden", "decoder_hidden",
                  "activation", "optimizer", "learning_rate", "beta", "epochs", "batch_size",
                  "eval_every", "eval_samples", "dto_samples", "seeds", "snapshot_epochs",
                  "beta_sweep"},
                 "config");

  data::DatasetKind kind = data::DatasetKind::linear;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (!d.is_object()) throw ConfigError("config: dataset must be an object");
    reject_unknown(d, {"kind", "seed", "ratio", "samples", "path"}, "dataset");
    if (d.contains("kind")) kind = data::parse_dataset_kind(get<std::string>(d, "kind"));
  }
  ExperimentConfig c = default_config(kind);
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (d.contains("seed")) c.dataset.seed = get<std::uint64_t>(d, "seed");
    if (d.contains("ratio")) c.dataset.ratio = get<double>(d, "ratio");
    if (d.contains("samples")) c.dataset.samples = get<std::size_t>(d, "samples");
    if (d.contains("path")) c.dataset.path = get<std::string>(d, "path");
  }
  if (j.contains("name")) c.name = get<std::string>(j, "name");
  if (j.contains("model")) c.model = models::parse_model_kind(get<std::string>(j, "model"));
  if (j.contains("latent_dim")) c.latent_dim = get<std::size_t>(j, "latent_dim");
  if (j.contains("encoder_hidden")) {
    c.encoder_hidden = get<std::vector<std::size_t>>(j, "encoder_hidden");
  }
  if (j.contains("decoder_hidden")) {
    c.decoder_hidden = get<std::vector<std::size_t>>(j, "decoder_hidden");
  }
  if (j.contains("activation")) {
    c.activation = nets::parse_activation(get<std::string>(j, "activation"));
  }
  if (j.contains("optimizer")) {
    c.optimizer = nets::parse_optimizer(get<std::string>(j, "optimizer"));
  }
  if (j.contains("learning_rate")) c.learning_rate = get<double>(j, "learning_rate");
  if (j.contains("beta")) c.beta = get<double>(j, "beta");
  if (j.contains("epochs")) c.epochs = get<std::size_t>(j, "epochs");
  if (j.contains("batch_size")) c.batch_size = get<std::size_t>(j, "batch_size");
  if (j.contains("eval_every")) c.eval_every = get<std::size_t>(j, "eval_every");
  if (j.contains("eval_samples")) c.eval_samples = get<std::size_t>(j, "eval_samples");
  if (j.contains("dto_samples")) c.dto_samples = get<std::size_t>(j, "dto_samples");
  if (j.contains("seeds")) c.seeds = get<std::vector<std::uint64_t>>(j, "seeds");
  if (j.contains("snapshot_epochs")) {
    c.snapshot_epochs = get<std::vector<std::size_t>>(j, "snapshot_epochs");
  }
  if (j.contains("beta_sweep")) c.beta_sweep = get<std::vector<double>>(j, "beta_sweep");
  validate(c);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j = {
      {"name", c.name},
      {"dataset",
       {{"kind", data::dataset_kind_name(c.dataset.kind)},
        {"seed", c.dataset.seed},
        {"ratio", c.dataset.ratio},
        {"samples", c.dataset.samples},
        {"path", c.dataset.path}}},
      {"model", models::model_kind_name(c.model)},
      {"latent_dim", c.latent_dim},
      {"encoder_hidden", c.encoder_hidden},
      {"decoder_hidden", c.decoder_hidden},
      {"activation", nets::activation_name(c.activation)},
      {"optimizer", nets::optimizer_name(c.optimizer)},
      {"learning_rate", c.learning_rate},
      {"beta", c.beta},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"eval_every", c.eval_every},
      {"eval_samples", c.eval_samples},
      {"dto_samples", c.dto_samples},
      {"seeds", c.seeds},
      {"snapshot_epochs", c.snapshot_epochs},
      {"beta_sweep", c.beta_sweep},
  };
  return j.dump(2) + "\n";
}

models::ModelSpec model_spec(const ExperimentConfig& c, std::size_t input_dim) {
  models::ModelSpec s;
  s.kind = c.model;
  s.input_dim = input_dim;
  s.latent_dim = c.latent_dim;
  s.encoder_hidden = c.encoder_hidden;
  s.decoder_hidden = c.decoder_hidden;
  s.activation = c.activation;
  s.beta = c.model == models::ModelKind::ae ? 0.0 : c.model == models::ModelKind::vae ? 1.0 : c.beta;
  return s;
}

models::TrainConfig train_config(const ExperimentConfig& c, std::uint64_t seed) {
  models::TrainConfig t;
  t.optimizer.kind = c.optimizer;
  t.optimizer.learning_rate = c.learning_rate;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.eval_every = c.eval_every;
  t.eval_samples = c.eval_samples;
  t.seed = seed;
  t.snapshot_epochs = c.snapshot_epochs;
  return t;
}

data::SyntheticDataset load_dataset(const DatasetConfig& c) {
  if (!c.path.empty()) return data::read_dataset(c.path);
  return data::generate({c.kind, c.seed, c.ratio, c.samples});
}

data::DatasetSplits load_splits(const DatasetConfig& c) {
  return data::split(load_dataset(c), {0.8, 0.1, 0.1}, c.seed);
}

}  // namespace orthovae::experiment
