#pragma once

// Synthetic datasets: unit-square factors pushed through a fixed linear
// embedding into R^3 or a random tanh network into R^6.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "orthovae/linalg.hpp"
#include "orthovae/nets.hpp"

namespace orthovae::data {

using linalg::Matrix;

enum class DatasetKind { linear, nonlinear };
enum class FactorKind { continuous, discrete };

std::string_view dataset_kind_name(DatasetKind k) noexcept;
DatasetKind parse_dataset_kind(std::string_view name);

inline constexpr std::size_t kDefaultSamples = 50000;
inline constexpr double kDefaultRatio = 2.0;

struct GeneratorSpec {
  DatasetKind kind = DatasetKind::linear;
  std::uint64_t seed = 0;
  double ratio = kDefaultRatio;  // stretch of the first factor (linear only)
  std::size_t samples = kDefaultSamples;
};

struct SyntheticDataset {
  Matrix inputs;   // N x n
  Matrix factors;  // N x F, raw unit-square coordinates
  std::vector<FactorKind> factor_kinds;
  GeneratorSpec spec;
  nets::Mlp generator;  // nonlinear datasets only

  std::size_t size() const noexcept { return inputs.rows(); }
};

/// The 3x2 map of the linear dataset: stretch diag(ratio, 1), embed as
/// (x, y, 0), then rotate 45 degrees (right-handed) about (1, -1, 1).
Matrix linear_embedding(double ratio);

SyntheticDataset generate_linear(std::uint64_t seed, double ratio = kDefaultRatio,
                                 std::size_t samples = kDefaultSamples);

/// 2 -> 10 (tanh) -> 6 network with standard init drawn from the seed.
nets::Mlp nonlinear_generator(std::uint64_t seed);
SyntheticDataset generate_nonlinear(std::uint64_t seed, std::size_t samples = kDefaultSamples);

SyntheticDataset generate(const GeneratorSpec& spec);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
  std::vector<std::size_t> test;
};

/// Seeded random partition. The first two parts get floor(fraction * N)
/// rows and the last part takes the remainder. Fractions must sum to 1.
SplitIndices split_indices(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed);

SyntheticDataset subset(const SyntheticDataset& ds, const std::vector<std::size_t>& rows);

struct DatasetSplits {
  SyntheticDataset train;
  SyntheticDataset eval;
  SyntheticDataset test;
};

DatasetSplits split(const SyntheticDataset& ds, std::array<double, 3> fractions = {0.8, 0.1, 0.1},
                    std::uint64_t seed = 0);

// Files: <name>.csv with header w1,w2,x1..xn, and <name>.json describing the
// generator. Nonlinear datasets also write <name>.generator.ckpt.
std::string to_csv(const SyntheticDataset& ds);
void write_dataset(const std::filesystem::path& csv_path, const SyntheticDataset& ds);
SyntheticDataset read_dataset(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace orthovae::data
