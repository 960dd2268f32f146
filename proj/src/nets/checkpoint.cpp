#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "orthovae/errors.hpp"
#include "orthovae/nets.hpp"
#include "orthovae/text_io.hpp"

namespace orthovae::nets {

namespace {

constexpr std::string_view kMagic = "orthovae-mlp";
constexpr int kVersion = 1;

std::string next_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  throw ConfigError("checkpoint: unexpected end of input");
}

std::size_t parse_count(std::string_view s) {
  std::size_t v = 0;
  try {
    v = std::stoull(std::string(s));
  } catch (const std::exception&) {
    throw ConfigError("checkpoint: bad count '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "layers " << net.layer_count() << '\n';
  for (const auto& s : net.layers()) {
    out << "layer " << s.in << ' ' << s.out << ' ' << activation_name(s.activation) << '\n';
  }
  out << "params " << net.param_count() << '\n';
  for (double v : net.params()) out << text::format_double(v) << '\n';
}

Mlp read_mlp(std::istream& in) {
  {
    const auto parts = text::split(next_line(in), ' ');
    if (parts.size() != 2 || parts[0] != kMagic) throw ConfigError("checkpoint: bad header");
    if (parse_count(parts[1]) != kVersion) throw ConfigError("checkpoint: unsupported version");
  }
  std::size_t n_layers = 0;
  {
    const std::string line = next_line(in);
    const auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0] != "layers") throw ConfigError("checkpoint: expected layers");
    n_layers = parse_count(parts[1]);
  }
  std::vector<LayerShape> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::string line = next_line(in);
    const auto parts = text::split(line, ' ');
    if (parts.size() != 4 || parts[0] != "layer") throw ConfigError("checkpoint: bad layer line");
    layers.push_back({parse_count(parts[1]), parse_count(parts[2]), parse_activation(parts[3]), 0, 0});
  }
  std::size_t count = 0;
  {
    const std::string line = next_line(in);
    const auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0] != "params") throw ConfigError("checkpoint: expected params");
    count = parse_count(parts[1]);
  }
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) params[i] = text::parse_double(next_line(in));
  try {
    return Mlp(std::move(layers), std::move(params));
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

std::string to_checkpoint_text(const Mlp& net) {
  std::ostringstream out;
  write_mlp(out, net);
  return out.str();
}

Mlp from_checkpoint_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_mlp(in);
}

}  // namespace orthovae::nets
