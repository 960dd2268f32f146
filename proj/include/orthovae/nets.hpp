#pragma once

// Fully connected networks with hand-written reverse-mode gradients.
//
// Parameters live in one flat buffer (layer by layer: weight rows, then
// bias) so optimizers and checkpoints treat a network as a single vector.
// Activations are applied in hidden layers only; the last layer is affine.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthovae/linalg.hpp"
#include "orthovae/rng.hpp"

namespace orthovae::nets {

using linalg::Matrix;

enum class Activation { linear, tanh, relu };

std::string_view activation_name(Activation a) noexcept;
/// Throws ConfigError for unknown names.
Activation parse_activation(std::string_view name);

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::linear;
  std::size_t weight_offset = 0;  // out x in block, row-major
  std::size_t bias_offset = 0;    // out entries

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Per-batch scratch for forward and backward passes. Reused across calls
/// to avoid reallocations in the training loop.
struct BatchWorkspace {
  std::vector<Matrix> activations;  // [0] = input, [l + 1] = output of layer l
  std::vector<Matrix> deltas;       // gradient w.r.t. layer inputs
  Matrix input_grad;

  const Matrix& output() const { return activations.back(); }
};

class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network. `hidden` lists hidden widths in order.
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
      Activation hidden_activation);
  /// Layer activations as given; throws ShapeError unless shapes chain and
  /// the final activation is linear.
  Mlp(std::vector<LayerShape> layers, std::vector<double> params);

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  void init_glorot(Rng& rng);

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t param_count() const noexcept { return params_.size(); }
  const std::vector<LayerShape>& layers() const noexcept { return layers_; }
  std::vector<std::size_t> hidden_widths() const;

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> weights(std::size_t l);
  std::span<const double> weights(std::size_t l) const;
  std::span<double> bias(std::size_t l);
  std::span<const double> bias(std::size_t l) const;
  Matrix weight_matrix(std::size_t l) const;
  void set_weight_matrix(std::size_t l, const Matrix& w);

  std::vector<double> forward(std::span<const double> x) const;
  /// Batch forward; rows of `x` are samples. Result in ws.output().
  void forward(const Matrix& x, BatchWorkspace& ws) const;

  /// Reverse pass for the batch last passed to forward(). Adds parameter
  /// gradients into `param_grad` (size param_count()); when `want_input_grad`
  /// is set, ws.input_grad receives d(loss)/d(input).
  void backward(BatchWorkspace& ws, const Matrix& upstream, std::span<double> param_grad,
                bool want_input_grad) const;

  /// Exact Jacobian d(output)/d(input) at `z`, output_dim x input_dim.
  Matrix jacobian(std::span<const double> z) const;

  /// First layer W <- W * r; the network becomes x -> net(r x).
  void compose_input(const Matrix& r);
  /// Rows [first, first + q.rows()) of the final layer (weights and bias)
  /// are replaced by q times themselves.
  void transform_output_rows(std::size_t first, const Matrix& q);

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

/// Gradients of a scalar loss for one sample.
struct SampleGradients {
  std::vector<double> params;
  std::vector<double> input;
};

SampleGradients backward(const Mlp& net, std::span<const double> x,
                         std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { adam, adagrad };

std::string_view optimizer_name(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(OptimizerConfig config, std::size_t param_count);

  /// One update. Throws NumericalError (with the offending index) if any
  /// gradient entry is non-finite; parameters are left untouched then.
  void step(std::span<double> params, std::span<const double> grads);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::span<const double> first_moment() const noexcept { return first_; }
  std::span<const double> second_moment() const noexcept { return second_; }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<double> first_;   // Adam m
  std::vector<double> second_;  // Adam v, or AdaGrad squared-gradient sum
};

// ---------------------------------------------------------------------------
// Checkpoints: a line-oriented text format, exact double round-trip.
//
//   orthovae-mlp 1
//   layers <L>
//   layer <in> <out> <activation>      (L lines)
//   params <count>
//   <value>                            (count lines)

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);
std::string to_checkpoint_text(const Mlp& net);
Mlp from_checkpoint_text(std::string_view text);

}  // namespace orthovae::nets
