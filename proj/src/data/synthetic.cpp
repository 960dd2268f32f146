#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "orthovae/data.hpp"
#include "orthovae/errors.hpp"
#include "orthovae/rng.hpp"
#include "orthovae/text_io.hpp"

namespace orthovae::data {

namespace {

Matrix uniform_square(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, stream::kData));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix w(n, 2);
  for (double& v : w.values()) v = u(rng);
  return w;
}

std::filesystem::path generator_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".generator.ckpt");
  return p;
}

}  // namespace

std::string_view dataset_kind_name(DatasetKind k) noexcept {
  return k == DatasetKind::linear ? "linear" : "nonlinear";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "linear") return DatasetKind::linear;
  if (name == "nonlinear") return DatasetKind::nonlinear;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

Matrix linear_embedding(double ratio) {
  if (!(ratio > 0.0)) throw ConfigError("linear_embedding: ratio must be positive");
  const double axis[3] = {1.0, -1.0, 1.0};
  const Matrix rot = linalg::rotation_about_axis(axis, std::numbers::pi / 4.0);
  Matrix embed(3, 2);
  embed(0, 0) = ratio;
  embed(1, 1) = 1.0;
  return rot * embed;
}

SyntheticDataset generate_linear(std::uint64_t seed, double ratio, std::size_t samples) {
  if (samples == 0) throw ConfigError("generate_linear: need at least one sample");
  const Matrix map = linear_embedding(ratio);
  SyntheticDataset ds;
  ds.spec = {DatasetKind::linear, seed, ratio, samples};
  ds.factors = uniform_square(samples, seed);
  ds.factor_kinds.assign(2, FactorKind::continuous);
  ds.inputs = ds.factors * map.transpose();
  return ds;
}

nets::Mlp nonlinear_generator(std::uint64_t seed) {
  nets::Mlp net(2, {10}, 6, nets::Activation::tanh);
  Rng rng(derive_seed(seed, stream::kGenerator));
  net.init_glorot(rng);
  return net;
}

SyntheticDataset generate_nonlinear(std::uint64_t seed, std::size_t samples) {
  if (samples == 0) throw ConfigError("generate_nonlinear: need at least one sample");
  SyntheticDataset ds;
  ds.spec = {DatasetKind::nonlinear, seed, 1.0, samples};
  ds.factors = uniform_square(samples, seed);
  ds.factor_kinds.assign(2, FactorKind::continuous);
  ds.generator = nonlinear_generator(seed);
  nets::BatchWorkspace ws;
  ds.generator.forward(ds.factors, ws);
  ds.inputs = ws.output();
  return ds;
}

SyntheticDataset generate(const GeneratorSpec& spec) {
  return spec.kind == DatasetKind::linear ? generate_linear(spec.seed, spec.ratio, spec.samples)
                                          : generate_nonlinear(spec.seed, spec.samples);
}

SplitIndices split_indices(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, stream::kSplit));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(fractions[0] * static_cast<double>(n)));
  const auto n_eval = std::min(
      n - n_train, static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n))));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                  order.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval), order.end());
  return out;
}

SyntheticDataset subset(const SyntheticDataset& ds, const std::vector<std::size_t>& rows) {
  SyntheticDataset out;
  out.spec = ds.spec;
  out.factor_kinds = ds.factor_kinds;
  out.generator = ds.generator;
  if (rows.empty()) return out;
  out.inputs = Matrix(rows.size(), ds.inputs.cols());
  out.factors = Matrix(rows.size(), ds.factors.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= ds.size()) throw ShapeError("subset: row index out of range");
    std::ranges::copy(ds.inputs.row(rows[i]), out.inputs.row(i).begin());
    std::ranges::copy(ds.factors.row(rows[i]), out.factors.row(i).begin());
  }
  return out;
}

DatasetSplits split(const SyntheticDataset& ds, std::array<double, 3> fractions,
                    std::uint64_t seed) {
  const auto idx = split_indices(ds.size(), fractions, seed);
  return {subset(ds, idx.train), subset(ds, idx.eval), subset(ds, idx.test)};
}

std::string to_csv(const SyntheticDataset& ds) {
  std::string out;
  out.reserve(ds.size() * 16 * (ds.inputs.cols() + ds.factors.cols()));
  for (std::size_t j = 0; j < ds.factors.cols(); ++j) {
    out += (j ? ",w" : "w") + std::to_string(j + 1);
  }
  for (std::size_t j = 0; j < ds.inputs.cols(); ++j) out += ",x" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.factors.cols(); ++j) {
      if (j) out += ',';
      out += text::format_double(ds.factors(i, j));
    }
    for (double v : ds.inputs.row(i)) {
      out += ',';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const std::filesystem::path& csv_path, const SyntheticDataset& ds) {
  text::write_file(csv_path, to_csv(ds));
  nlohmann::json side = {
      {"kind", dataset_kind_name(ds.spec.kind)},
      {"seed", ds.spec.seed},
      {"ratio", ds.spec.ratio},
      {"N", ds.spec.samples},
      {"stretched_factor", "w1"},
  };
  if (ds.spec.kind == DatasetKind::nonlinear) {
    const auto gp = generator_path(csv_path);
    text::write_file(gp, nets::to_checkpoint_text(ds.generator));
    side["mlp_checkpoint"] = gp.filename().string();
  } else {
    side["mlp_checkpoint"] = nullptr;
  }
  text::write_file(sidecar_path(csv_path), side.dump(2) + "\n");
}

SyntheticDataset read_dataset(const std::filesystem::path& csv_path) {
  SyntheticDataset ds;
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(text::read_file(sidecar_path(csv_path)));
    ds.spec.kind = parse_dataset_kind(side.at("kind").get<std::string>());
    ds.spec.seed = side.at("seed").get<std::uint64_t>();
    ds.spec.ratio = side.at("ratio").get<double>();
    ds.spec.samples = side.at("N").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("dataset sidecar " + sidecar_path(csv_path).string() + ": " + e.what());
  }
  if (ds.spec.kind == DatasetKind::nonlinear && side.contains("mlp_checkpoint") &&
      side["mlp_checkpoint"].is_string()) {
    ds.generator = nets::from_checkpoint_text(text::read_file(
        csv_path.parent_path() / side["mlp_checkpoint"].get<std::string>()));
  }

  const std::string contents = text::read_file(csv_path);
  std::istringstream in(contents);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty file");
  std::size_t n_factors = 0;
  std::size_t n_inputs = 0;
  for (auto h : text::split(line, ',')) {
    if (!h.empty() && h.front() == 'w') {
      ++n_factors;
    } else if (!h.empty() && h.front() == 'x') {
      ++n_inputs;
    } else {
      throw ConfigError("dataset: unexpected column '" + std::string(h) + "'");
    }
  }
  if (n_factors == 0 || n_inputs == 0) throw ConfigError("dataset: missing columns");
  std::vector<double> w;
  std::vector<double> x;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != n_factors + n_inputs) {
      throw ConfigError("dataset: row " + std::to_string(rows + 1) + " has the wrong width");
    }
    for (std::size_t j = 0; j < n_factors; ++j) w.push_back(text::parse_double(cells[j]));
    for (std::size_t j = n_factors; j < cells.size(); ++j) x.push_back(text::parse_double(cells[j]));
    ++rows;
  }
  if (rows == 0) throw ConfigError("dataset: no rows");
  ds.factors = Matrix(rows, n_factors, std::move(w));
  ds.inputs = Matrix(rows, n_inputs, std::move(x));
  ds.factor_kinds.assign(n_factors, FactorKind::continuous);
  return ds;
}

}  // namespace orthovae::data
