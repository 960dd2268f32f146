#include <algorithm>
#include <cmath>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/kernels.hpp"
#include "orthovae/nets.hpp"

namespace orthovae::nets {

namespace {

std::vector<LayerShape> chain_layers(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                     std::size_t output_dim, Activation hidden_activation) {
  std::vector<LayerShape> layers;
  std::size_t offset = 0;
  std::size_t in = input_dim;
  auto push = [&](std::size_t out, Activation act) {
    LayerShape s{in, out, act, offset, offset + in * out};
    offset += in * out + out;
    layers.push_back(s);
    in = out;
  };
  for (std::size_t h : hidden) push(h, hidden_activation);
  push(output_dim, Activation::linear);
  return layers;
}

std::size_t total_params(const std::vector<LayerShape>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.in * l.out + l.out;
  return n;
}

void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::tanh:
      for (double& v : m.values()) v = std::tanh(v);
      return;
    case Activation::relu:
      for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
      return;
  }
}

// delta *= act'(pre), written in terms of the post-activation value y.
void multiply_derivative(Activation act, const Matrix& y, Matrix& delta) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::tanh:
      for (std::size_t k = 0; k < delta.size(); ++k) {
        const double t = y.values()[k];
        delta.values()[k] *= 1.0 - t * t;
      }
      return;
    case Activation::relu:
      for (std::size_t k = 0; k < delta.size(); ++k) {
        if (!(y.values()[k] > 0.0)) delta.values()[k] = 0.0;
      }
      return;
  }
}

double derivative_at(Activation act, double y) {
  switch (act) {
    case Activation::linear:
      return 1.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

std::string_view activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::linear:
      return "linear";
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "linear" || name == "lin") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
         Activation hidden_activation)
    : layers_(chain_layers(input_dim, hidden, output_dim, hidden_activation)),
      params_(total_params(layers_), 0.0) {
  if (input_dim == 0 || output_dim == 0 ||
      std::any_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h == 0; })) {
    throw ShapeError("Mlp: layer widths must be positive");
  }
}

Mlp::Mlp(std::vector<LayerShape> layers, std::vector<double> params)
    : layers_(std::move(layers)), params_(std::move(params)) {
  if (layers_.empty()) throw ShapeError("Mlp: no layers");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& s = layers_[l];
    if (s.in == 0 || s.out == 0) throw ShapeError("Mlp: layer widths must be positive");
    if (l > 0 && layers_[l - 1].out != s.in) throw ShapeError("Mlp: layer shapes do not chain");
    s.weight_offset = offset;
    s.bias_offset = offset + s.in * s.out;
    offset += s.in * s.out + s.out;
  }
  if (layers_.back().activation != Activation::linear) {
    throw ShapeError("Mlp: the output layer must be linear");
  }
  if (params_.size() != offset) throw ShapeError("Mlp: parameter count does not match layers");
}

void Mlp::init_glorot(Rng& rng) {
  for (const auto& s : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < s.in * s.out; ++k) params_[s.weight_offset + k] = dist(rng);
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset), s.out, 0.0);
  }
}

std::vector<std::size_t> Mlp::hidden_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w.push_back(layers_[l].out);
  return w;
}

std::span<double> Mlp::weights(std::size_t l) {
  const auto& s = layers_.at(l);
  return {params_.data() + s.weight_offset, s.in * s.out};
}
std::span<const double> Mlp::weights(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {params_.data() + s.weight_offset, s.in * s.out};
}
std::span<double> Mlp::bias(std::size_t l) {
  const auto& s = layers_.at(l);
  return {params_.data() + s.bias_offset, s.out};
}
std::span<const double> Mlp::bias(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {params_.data() + s.bias_offset, s.out};
}

Matrix Mlp::weight_matrix(std::size_t l) const {
  const auto& s = layers_.at(l);
  auto w = weights(l);
  return Matrix(s.out, s.in, std::vector<double>(w.begin(), w.end()));
}

void Mlp::set_weight_matrix(std::size_t l, const Matrix& w) {
  const auto& s = layers_.at(l);
  if (w.rows() != s.out || w.cols() != s.in) throw ShapeError("set_weight_matrix: shape mismatch");
  std::copy(w.values().begin(), w.values().end(), weights(l).begin());
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("forward: input has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim()));
  }
  std::vector<double> a(x.begin(), x.end());
  for (const auto& s : layers_) {
    std::vector<double> next(s.out);
    const double* w = params_.data() + s.weight_offset;
    const double* b = params_.data() + s.bias_offset;
    for (std::size_t o = 0; o < s.out; ++o) {
      double v = b[o];
      for (std::size_t i = 0; i < s.in; ++i) v += w[o * s.in + i] * a[i];
      switch (s.activation) {
        case Activation::linear:
          break;
        case Activation::tanh:
          v = std::tanh(v);
          break;
        case Activation::relu:
          v = v > 0.0 ? v : 0.0;
          break;
      }
      next[o] = v;
    }
    a = std::move(next);
  }
  return a;
}

void Mlp::forward(const Matrix& x, BatchWorkspace& ws) const {
  if (x.cols() != input_dim()) throw ShapeError("forward: batch width does not match input_dim");
  const std::size_t batch = x.rows();
  ws.activations.resize(layers_.size() + 1);
  ws.activations[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const Matrix& in = ws.activations[l];
    Matrix& out = ws.activations[l + 1];
    out.resize(batch, s.out);
    const double* b = params_.data() + s.bias_offset;
    kernels::gemm_nt(batch, s.out, s.in, in.data(), s.in, params_.data() + s.weight_offset, s.in,
                     out.data(), s.out, false);
    for (std::size_t r = 0; r < batch; ++r) {
      double* row = out.data() + r * s.out;
      for (std::size_t o = 0; o < s.out; ++o) row[o] += b[o];
    }
    apply_activation(s.activation, out);
  }
}

void Mlp::backward(BatchWorkspace& ws, const Matrix& upstream, std::span<double> param_grad,
                   bool want_input_grad) const {
  if (ws.activations.size() != layers_.size() + 1) {
    throw ShapeError("backward: forward() was not called with this workspace");
  }
  const std::size_t batch = ws.activations[0].rows();
  if (upstream.rows() != batch || upstream.cols() != output_dim()) {
    throw ShapeError("backward: upstream gradient shape mismatch");
  }
  if (param_grad.size() != params_.size()) throw ShapeError("backward: gradient buffer size");

  ws.deltas.resize(layers_.size() + 1);
  ws.deltas[layers_.size()] = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& s = layers_[l];
    Matrix& delta = ws.deltas[l + 1];
    multiply_derivative(s.activation, ws.activations[l + 1], delta);

    // dW += delta^T a_l ; db += column sums of delta
    kernels::gemm_tn_acc(s.out, s.in, batch, delta.data(), s.out, ws.activations[l].data(), s.in,
                         param_grad.data() + s.weight_offset, s.in);
    double* db = param_grad.data() + s.bias_offset;
    for (std::size_t r = 0; r < batch; ++r) {
      const double* row = delta.data() + r * s.out;
      for (std::size_t o = 0; o < s.out; ++o) db[o] += row[o];
    }

    if (l > 0 || want_input_grad) {
      Matrix& prev = ws.deltas[l];
      prev.resize(batch, s.in);
      std::fill(prev.values().begin(), prev.values().end(), 0.0);
      kernels::gemm_nn_acc(batch, s.in, s.out, delta.data(), s.out,
                           params_.data() + s.weight_offset, s.in, prev.data(), s.in);
    }
  }
  if (want_input_grad) ws.input_grad = ws.deltas[0];
}

Matrix Mlp::jacobian(std::span<const double> z) const {
  if (z.size() != input_dim()) throw ShapeError("jacobian: input length mismatch");
  std::vector<double> a(z.begin(), z.end());
  Matrix jac;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const Matrix w = weight_matrix(l);
    const auto b = bias(l);
    std::vector<double> pre = w * std::span<const double>(a);
    for (std::size_t o = 0; o < s.out; ++o) pre[o] += b[o];
    jac = l == 0 ? w : w * jac;
    std::vector<double> post(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      double y = pre[o];
      if (s.activation == Activation::tanh) y = std::tanh(y);
      if (s.activation == Activation::relu) y = y > 0.0 ? y : 0.0;
      post[o] = y;
      const double g = derivative_at(s.activation, y);
      if (g != 1.0) {
        for (std::size_t c = 0; c < jac.cols(); ++c) jac(o, c) *= g;
      }
    }
    a = std::move(post);
  }
  return jac;
}

void Mlp::compose_input(const Matrix& r) {
  if (r.rows() != input_dim() || r.cols() != input_dim()) {
    throw ShapeError("compose_input: transform must be input_dim x input_dim");
  }
  set_weight_matrix(0, weight_matrix(0) * r);
}

void Mlp::transform_output_rows(std::size_t first, const Matrix& q) {
  const std::size_t last = layers_.size() - 1;
  const auto& s = layers_[last];
  if (q.rows() != q.cols() || first + q.rows() > s.out) {
    throw ShapeError("transform_output_rows: block out of range");
  }
  Matrix w = weight_matrix(last);
  Matrix block(q.rows(), s.in);
  std::vector<double> bb(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t c = 0; c < s.in; ++c) block(i, c) = w(first + i, c);
    bb[i] = bias(last)[first + i];
  }
  const Matrix rotated = q * block;
  const std::vector<double> rb = q * std::span<const double>(bb);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t c = 0; c < s.in; ++c) w(first + i, c) = rotated(i, c);
    bias(last)[first + i] = rb[i];
  }
  set_weight_matrix(last, w);
}

SampleGradients backward(const Mlp& net, std::span<const double> x,
                         std::span<const double> upstream) {
  if (x.size() != net.input_dim() || upstream.size() != net.output_dim()) {
    throw ShapeError("backward: sample shape mismatch");
  }
  BatchWorkspace ws;
  net.forward(Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())), ws);
  SampleGradients g{std::vector<double>(net.param_count(), 0.0), {}};
  net.backward(ws, Matrix(1, upstream.size(), std::vector<double>(upstream.begin(), upstream.end())),
               g.params, true);
  g.input.assign(ws.input_grad.values().begin(), ws.input_grad.values().end());
  return g;
}

}  // namespace orthovae::nets
