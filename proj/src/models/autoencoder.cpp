#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/models.hpp"
#include "orthovae/text_io.hpp"

namespace orthovae::models {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double effective_beta(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::ae:
      return 0.0;
    case ModelKind::vae:
      return 1.0;
    default:
      return spec.beta;
  }
}

void check_spec(const ModelSpec& spec) {
  if (spec.input_dim == 0 || spec.latent_dim == 0) {
    throw ConfigError("model: input_dim and latent_dim must be positive");
  }
  if (!(spec.beta >= 0.0) || !std::isfinite(spec.beta)) {
    throw ConfigError("model: beta must be finite and non-negative");
  }
}

std::size_t packed_index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

std::size_t Autoencoder::head_width(PosteriorKind kind, std::size_t d) noexcept {
  switch (kind) {
    case PosteriorKind::point:
      return d;
    case PosteriorKind::diagonal:
      return 2 * d;
    case PosteriorKind::full:
      return d + d * (d + 1) / 2;
  }
  return d;
}

Autoencoder::Autoencoder(const ModelSpec& spec) : spec_(spec) {
  check_spec(spec);
  spec_.beta = effective_beta(spec);
  encoder_ = nets::Mlp(spec.input_dim, spec.encoder_hidden,
                       head_width(posterior(), spec.latent_dim), spec.activation);
  decoder_ = nets::Mlp(spec.latent_dim, spec.decoder_hidden, spec.input_dim, spec.activation);
}

Autoencoder::Autoencoder(const ModelSpec& spec, nets::Mlp encoder, nets::Mlp decoder)
    : spec_(spec), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  check_spec(spec);
  spec_.beta = effective_beta(spec);
  if (encoder_.input_dim() != spec.input_dim ||
      encoder_.output_dim() != head_width(posterior(), spec.latent_dim) ||
      decoder_.input_dim() != spec.latent_dim || decoder_.output_dim() != spec.input_dim) {
    throw ShapeError("Autoencoder: network shapes do not match the model spec");
  }
}

void Autoencoder::init(Rng& rng) {
  encoder_.init_glorot(rng);
  decoder_.init_glorot(rng);
  cov_rotation_.reset();
}

GaussianPosterior Autoencoder::posterior_from_head(std::span<const double> head) const {
  const std::size_t d = spec_.latent_dim;
  std::vector<double> mean(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(d));
  switch (posterior()) {
    case PosteriorKind::point: {
      GaussianPosterior p;
      p.mean = std::move(mean);
      return p;
    }
    case PosteriorKind::diagonal:
      return GaussianPosterior::diagonal(
          std::move(mean),
          std::vector<double>(head.begin() + static_cast<std::ptrdiff_t>(d), head.end()));
    case PosteriorKind::full: {
      Matrix l(d, d);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) l(i, j) = head[d + packed_index(i, j)];
        l(i, i) = std::exp(head[d + packed_index(i, i)]);
      }
      if (cov_rotation_) {
        const Matrix ql = *cov_rotation_ * l;
        l = linalg::cholesky_factor(ql * ql.transpose());
      }
      return GaussianPosterior::full(std::move(mean), std::move(l));
    }
  }
  throw ShapeError("unreachable posterior kind");
}

GaussianPosterior Autoencoder::encode(std::span<const double> x) const {
  return posterior_from_head(encoder_.forward(x));
}

Matrix Autoencoder::encode_means(const Matrix& x) const {
  nets::BatchWorkspace ws;
  encoder_.forward(x, ws);
  const Matrix& head = ws.output();
  Matrix means(x.rows(), spec_.latent_dim);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < spec_.latent_dim; ++j) means(i, j) = head(i, j);
  }
  return means;
}

std::vector<double> Autoencoder::decode(std::span<const double> z) const {
  return decoder_.forward(z);
}

Matrix Autoencoder::decoder_jacobian(std::span<const double> z) const {
  return decoder_.jacobian(z);
}

std::vector<double> Autoencoder::reparametrize(const GaussianPosterior& p,
                                               std::span<const double> eps) {
  std::vector<double> z = p.mean;
  if (p.is_full()) {
    if (eps.size() != p.dim()) throw ShapeError("reparametrize: noise length mismatch");
    for (std::size_t i = 0; i < p.dim(); ++i) {
      for (std::size_t k = 0; k <= i; ++k) z[i] += p.factor(i, k) * eps[k];
    }
  } else if (!p.logvar.empty()) {
    if (eps.size() != p.dim()) throw ShapeError("reparametrize: noise length mismatch");
    for (std::size_t i = 0; i < p.dim(); ++i) z[i] += std::exp(0.5 * p.logvar[i]) * eps[i];
  }
  return z;
}

LossBreakdown Autoencoder::reconstruction_losses(std::span<const double> x, Rng& rng) const {
  std::normal_distribution<double> normal;
  std::vector<double> eps(spec_.latent_dim);
  for (double& e : eps) e = normal(rng);
  return reconstruction_losses(x, eps);
}

LossBreakdown Autoencoder::reconstruction_losses(std::span<const double> x,
                                                 std::span<const double> eps) const {
  if (eps.size() != spec_.latent_dim) throw ShapeError("reconstruction_losses: noise length");
  std::vector<std::size_t> all(spec_.latent_dim);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())),
                  Matrix(1, eps.size(), std::vector<double>(eps.begin(), eps.end())),
                  std::span<const std::size_t>(all));
}

LossBreakdown Autoencoder::evaluate(const Matrix& x, const Matrix& noise,
                                    std::optional<std::span<const std::size_t>> active) const {
  if (x.cols() != spec_.input_dim) throw ShapeError("evaluate: input width mismatch");
  if (posterior() != PosteriorKind::point &&
      (noise.rows() != x.rows() || noise.cols() != spec_.latent_dim)) {
    throw ShapeError("evaluate: noise must be rows x latent_dim");
  }
  const std::size_t b = x.rows();
  const std::size_t d = spec_.latent_dim;

  nets::BatchWorkspace enc_ws;
  encoder_.forward(x, enc_ws);
  std::vector<GaussianPosterior> posts;
  posts.reserve(b);
  Matrix means(b, d);
  Matrix z(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    posts.push_back(posterior_from_head(enc_ws.output().row(i)));
    const auto& p = posts.back();
    std::copy(p.mean.begin(), p.mean.end(), means.row(i).begin());
    const auto zi = posterior() == PosteriorKind::point ? p.mean : reparametrize(p, noise.row(i));
    std::copy(zi.begin(), zi.end(), z.row(i).begin());
  }

  nets::BatchWorkspace dz_ws;
  nets::BatchWorkspace dm_ws;
  decoder_.forward(z, dz_ws);
  decoder_.forward(means, dm_ws);

  LossBreakdown out;
  out.beta = spec_.beta;
  for (std::size_t i = 0; i < b; ++i) {
    out.rec_total += squared_distance(dz_ws.output().row(i), x.row(i));
    out.rec_det += squared_distance(dm_ws.output().row(i), x.row(i));
    out.rec_stoch += squared_distance(dz_ws.output().row(i), dm_ws.output().row(i));
  }

  std::vector<std::size_t> own_active;
  std::span<const std::size_t> act;
  if (active) {
    act = *active;
  } else if (b >= 2) {
    own_active = active_variables(means);
    act = own_active;
  } else {
    own_active.resize(d);
    std::iota(own_active.begin(), own_active.end(), std::size_t{0});
    act = own_active;
  }
  for (const auto& p : posts) {
    switch (posterior()) {
      case PosteriorKind::point:
        break;
      case PosteriorKind::diagonal:
        out.kl += kl_diagonal(p);
        out.kl_approx += kl_approx_polarized(p, act);
        break;
      case PosteriorKind::full:
        out.kl += kl_full(p);
        break;
    }
  }
  if (posterior() == PosteriorKind::full) out.kl_approx = kNaN;

  const double inv = 1.0 / static_cast<double>(b);
  out.rec_total *= inv;
  out.rec_det *= inv;
  out.rec_stoch *= inv;
  out.kl *= inv;
  out.kl_approx *= inv;
  return out;
}

LossBreakdown Autoencoder::evaluate(const Matrix& x, Rng& rng) const {
  Matrix noise(x.rows(), spec_.latent_dim);
  std::normal_distribution<double> normal;
  for (double& v : noise.values()) v = normal(rng);
  return evaluate(x, noise);
}

LossBreakdown Autoencoder::loss_and_gradient(const Matrix& x, const Matrix& noise,
                                             TrainWorkspace& ws) const {
  if (cov_rotation_) {
    throw ConfigError("loss_and_gradient: a rotated full-covariance model is evaluation-only");
  }
  if (x.cols() != spec_.input_dim) throw ShapeError("loss_and_gradient: input width mismatch");
  const std::size_t b = x.rows();
  const std::size_t d = spec_.latent_dim;
  const PosteriorKind kind = posterior();
  if (kind != PosteriorKind::point && (noise.rows() != b || noise.cols() != d)) {
    throw ShapeError("loss_and_gradient: noise must be rows x latent_dim");
  }
  const double beta = spec_.beta;
  const double inv_b = 1.0 / static_cast<double>(b);

  encoder_.forward(x, ws.enc);
  const Matrix& head = ws.enc.output();
  ws.latent.resize(b, d);
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const auto h = head.row(i);
    auto z = ws.latent.row(i);
    switch (kind) {
      case PosteriorKind::point:
        for (std::size_t j = 0; j < d; ++j) z[j] = h[j];
        break;
      case PosteriorKind::diagonal:
        for (std::size_t j = 0; j < d; ++j) {
          const double lv = h[d + j];
          const double var = std::exp(lv);
          z[j] = h[j] + std::sqrt(var) * noise(i, j);
          kl_sum += h[j] * h[j] + var - lv - 1.0;
        }
        break;
      case PosteriorKind::full:
        for (std::size_t r = 0; r < d; ++r) {
          double v = h[r];
          for (std::size_t c = 0; c <= r; ++c) {
            const double raw = h[d + packed_index(r, c)];
            const double l = r == c ? std::exp(raw) : raw;
            v += l * noise(i, c);
            kl_sum += l * l;
          }
          const double raw_diag = h[d + packed_index(r, r)];
          kl_sum += h[r] * h[r] - 2.0 * raw_diag - 1.0;
          z[r] = v;
        }
        break;
    }
  }

  decoder_.forward(ws.latent, ws.dec);
  const Matrix& xhat = ws.dec.output();
  ws.dec_upstream.resize(b, spec_.input_dim);
  double rec = 0.0;
  for (std::size_t k = 0; k < xhat.size(); ++k) {
    const double diff = xhat.values()[k] - x.values()[k];
    rec += diff * diff;
    ws.dec_upstream.values()[k] = 2.0 * diff * inv_b;
  }

  ws.grad.assign(param_count(), 0.0);
  const std::size_t enc_n = encoder_.param_count();
  std::span<double> enc_grad(ws.grad.data(), enc_n);
  std::span<double> dec_grad(ws.grad.data() + enc_n, decoder_.param_count());
  decoder_.backward(ws.dec, ws.dec_upstream, dec_grad, true);
  const Matrix& dz = ws.dec.input_grad;

  ws.enc_upstream.resize(b, head.cols());
  for (std::size_t i = 0; i < b; ++i) {
    const auto h = head.row(i);
    auto g = ws.enc_upstream.row(i);
    const auto dzi = dz.row(i);
    switch (kind) {
      case PosteriorKind::point:
        for (std::size_t j = 0; j < d; ++j) g[j] = dzi[j];
        break;
      case PosteriorKind::diagonal:
        for (std::size_t j = 0; j < d; ++j) {
          const double var = std::exp(h[d + j]);
          const double sd = std::sqrt(var);
          g[j] = dzi[j] + beta * h[j] * inv_b;
          g[d + j] = dzi[j] * noise(i, j) * 0.5 * sd + beta * 0.5 * (var - 1.0) * inv_b;
        }
        break;
      case PosteriorKind::full:
        for (std::size_t r = 0; r < d; ++r) {
          g[r] = dzi[r] + beta * h[r] * inv_b;
          for (std::size_t c = 0; c <= r; ++c) {
            const std::size_t idx = d + packed_index(r, c);
            if (r == c) {
              const double l = std::exp(h[idx]);
              // d/draw of (l eps) is l eps; KL part: (l - 1/l) * l
              g[idx] = dzi[r] * noise(i, c) * l + beta * (l * l - 1.0) * inv_b;
            } else {
              g[idx] = dzi[r] * noise(i, c) + beta * h[idx] * inv_b;
            }
          }
        }
        break;
    }
  }
  encoder_.backward(ws.enc, ws.enc_upstream, enc_grad, false);

  LossBreakdown out;
  out.beta = beta;
  out.rec_total = rec * inv_b;
  out.kl = kind == PosteriorKind::point ? 0.0 : 0.5 * kl_sum * inv_b;
  out.rec_det = kNaN;
  out.rec_stoch = kNaN;
  out.kl_approx = kNaN;
  return out;
}

void Autoencoder::copy_params_to(std::vector<double>& out) const {
  out.resize(param_count());
  const auto e = encoder_.params();
  const auto dd = decoder_.params();
  std::copy(e.begin(), e.end(), out.begin());
  std::copy(dd.begin(), dd.end(), out.begin() + static_cast<std::ptrdiff_t>(e.size()));
}

void Autoencoder::set_params(std::span<const double> p) {
  if (p.size() != param_count()) throw ShapeError("set_params: size mismatch");
  auto e = encoder_.params();
  auto dd = decoder_.params();
  std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(e.size()), e.begin());
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(e.size()), p.end(), dd.begin());
}

void Autoencoder::apply_latent_rotation(const Matrix& q, RotationMode mode) {
  const std::size_t d = spec_.latent_dim;
  if (q.rows() != d || q.cols() != d) throw ShapeError("apply_latent_rotation: q must be d x d");
  if (linalg::orthogonality_defect(q) > 1e-9) {
    throw ShapeError("apply_latent_rotation: q is not orthogonal");
  }
  if (mode == RotationMode::exact && posterior() == PosteriorKind::diagonal) {
    throw ConfigError(
        "apply_latent_rotation: a diagonal posterior is not closed under rotation; use mean_only");
  }
  encoder_.transform_output_rows(0, q);
  decoder_.compose_input(q.transpose());
  if (posterior() == PosteriorKind::full && mode == RotationMode::exact) {
    cov_rotation_ = cov_rotation_ ? q * *cov_rotation_ : q;
  }
}

std::string to_model_text(const Autoencoder& m) {
  std::ostringstream out;
  const auto& s = m.spec();
  auto widths = [](const std::vector<std::size_t>& w) {
    std::string line;
    for (std::size_t v : w) line += ' ' + std::to_string(v);
    return line;
  };
  out << "orthovae-model 1\n";
  out << "kind " << model_kind_name(s.kind) << '\n';
  out << "input_dim " << s.input_dim << '\n';
  out << "latent_dim " << s.latent_dim << '\n';
  out << "beta " << text::format_double(s.beta) << '\n';
  out << "activation " << nets::activation_name(s.activation) << '\n';
  out << "encoder_hidden" << widths(s.encoder_hidden) << '\n';
  out << "decoder_hidden" << widths(s.decoder_hidden) << '\n';
  out << "cov_rotation";
  if (m.covariance_rotation()) {
    for (double v : m.covariance_rotation()->values()) out << ' ' << text::format_double(v);
  }
  out << '\n';
  out << "encoder\n";
  nets::write_mlp(out, m.encoder());
  out << "decoder\n";
  nets::write_mlp(out, m.decoder());
  return out.str();
}

Autoencoder from_model_text(std::string_view contents) {
  std::istringstream in{std::string(contents)};
  auto fields = [&](std::string_view key) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("model file: unexpected end of input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> parts;
    for (auto p : text::split(line, ' ')) {
      if (!p.empty()) parts.emplace_back(p);
    }
    if (parts.empty() || parts[0] != key) {
      throw ConfigError("model file: expected '" + std::string(key) + "'");
    }
    parts.erase(parts.begin());
    return parts;
  };
  auto count = [](const std::string& s) {
    try {
      return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError("model file: bad count '" + s + "'");
    }
  };

  if (const auto h = fields("orthovae-model"); h.size() != 1 || h[0] != "1") {
    throw ConfigError("model file: unsupported header");
  }
  ModelSpec spec;
  spec.kind = parse_model_kind(fields("kind").at(0));
  spec.input_dim = count(fields("input_dim").at(0));
  spec.latent_dim = count(fields("latent_dim").at(0));
  spec.beta = text::parse_double(fields("beta").at(0));
  spec.activation = nets::parse_activation(fields("activation").at(0));
  for (const auto& w : fields("encoder_hidden")) spec.encoder_hidden.push_back(count(w));
  for (const auto& w : fields("decoder_hidden")) spec.decoder_hidden.push_back(count(w));
  const auto rot = fields("cov_rotation");
  fields("encoder");
  nets::Mlp enc = nets::read_mlp(in);
  fields("decoder");
  nets::Mlp dec = nets::read_mlp(in);
  Autoencoder m(spec, std::move(enc), std::move(dec));
  if (!rot.empty()) {
    const std::size_t d = spec.latent_dim;
    if (rot.size() != d * d) throw ConfigError("model file: cov_rotation has the wrong size");
    std::vector<double> vals;
    for (const auto& v : rot) vals.push_back(text::parse_double(v));
    // weights already carry the rotation; only the covariance map is restored
    m.cov_rotation_ = Matrix(d, d, std::move(vals));
  }
  return m;
}

}  // namespace orthovae::models
