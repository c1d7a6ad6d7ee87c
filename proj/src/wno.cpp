#include "nogap/wno.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "nogap/errors.hpp"

namespace nogap::wno {

std::size_t WnoConfig::coarse_positions() const {
  std::size_t p = 1;
  for (std::size_t n : grid) p *= n >> levels;
  return p;
}

void WnoConfig::validate() const {
  if (lift_width < 1 || proj_width < 1 || n_blocks < 1 || levels < 1) {
    throw ConfigError("WNO widths, block count and levels must all be >= 1");
  }
  if (!wavelet::is_supported(wavelet)) throw ConfigError("unsupported wavelet '" + wavelet + "'");
  if (grid.size() != 1 && grid.size() != 2) {
    throw ConfigError("WNO grid must have 1 or 2 axes, got " + shape_to_string(grid));
  }
  if (in_channels < 1) throw ConfigError("WNO needs at least one input channel");
  std::vector<std::size_t> axes(grid.size());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  wavelet::check_divisible(grid, axes, levels);
}

bool operator==(const WnoConfig& a, const WnoConfig& b) {
  return a.lift_width == b.lift_width && a.proj_width == b.proj_width && a.n_blocks == b.n_blocks &&
         a.levels == b.levels && a.wavelet == b.wavelet && a.grid == b.grid &&
         a.in_channels == b.in_channels;
}

std::vector<ParamSpec> param_specs(const WnoConfig& c) {
  std::vector<ParamSpec> specs;
  specs.push_back({"lift.weight", {c.in_channels, c.lift_width}});
  specs.push_back({"lift.bias", {c.lift_width}});
  for (std::size_t j = 0; j < c.n_blocks; ++j) {
    const std::string p = "block" + std::to_string(j) + ".";
    specs.push_back({p + "spectral", {c.lift_width, c.lift_width, c.coarse_positions()}});
    specs.push_back({p + "skip.weight", {c.lift_width, c.lift_width}});
    specs.push_back({p + "skip.bias", {c.lift_width}});
  }
  specs.push_back({"proj1.weight", {c.lift_width, c.proj_width}});
  specs.push_back({"proj1.bias", {c.proj_width}});
  specs.push_back({"proj2.weight", {c.proj_width, 1}});
  specs.push_back({"proj2.bias", {1}});
  return specs;
}

const Tensor& WnoParams::get(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return tensors[i];
  }
  throw LookupError("unknown WNO parameter '" + std::string(name) + "'");
}

std::size_t WnoParams::total_size() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

WnoParams wno_init(const WnoConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  WnoParams p;
  for (const ParamSpec& spec : param_specs(config)) {
    std::vector<double> v(shape_size(spec.shape));
    if (spec.name.ends_with("spectral")) {
      const double s = 1.0 / static_cast<double>(spec.shape[0] * spec.shape[1]);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (double& x : v) x = s * u(rng);
    } else {
      // bias fan-in is that of the matching weight, i.e. the layer input width
      const std::size_t fan_in = spec.name.ends_with("weight") ? spec.shape[0]
                                                                : p.tensors.back().shape()[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& x : v) x = u(rng);
    }
    p.names.push_back(spec.name);
    p.tensors.emplace_back(spec.shape, std::move(v));
  }
  return p;
}

WnoParams wno_zeros(const WnoConfig& config) {
  config.validate();
  WnoParams p;
  for (const ParamSpec& spec : param_specs(config)) {
    p.names.push_back(spec.name);
    p.tensors.push_back(Tensor::zeros(spec.shape));
  }
  return p;
}

std::vector<ad::Var> WnoVars::all() const {
  std::vector<ad::Var> out = {lift_weight, lift_bias};
  for (const Block& b : blocks) {
    out.push_back(b.spectral);
    out.push_back(b.skip_weight);
    out.push_back(b.skip_bias);
  }
  for (const ad::Var& v : {proj1_weight, proj1_bias, proj2_weight, proj2_bias}) out.push_back(v);
  return out;
}

WnoVars bind(ad::Tape& tape, const WnoParams& params, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  const std::size_t n = params.tensors.size();
  if (n < 6 || (n - 6) % 3 != 0) throw ShapeError("WNO parameter set has an unexpected layout");
  WnoVars v;
  v.lift_weight = put(params.tensors[0]);
  v.lift_bias = put(params.tensors[1]);
  const std::size_t blocks = (n - 6) / 3;
  for (std::size_t j = 0; j < blocks; ++j) {
    v.blocks.push_back({put(params.tensors[2 + 3 * j]), put(params.tensors[3 + 3 * j]),
                        put(params.tensors[4 + 3 * j])});
  }
  v.proj1_weight = put(params.tensors[n - 4]);
  v.proj1_bias = put(params.tensors[n - 3]);
  v.proj2_weight = put(params.tensors[n - 2]);
  v.proj2_bias = put(params.tensors[n - 1]);
  return v;
}

WnoParams unflatten(const WnoConfig& config, std::span<const double> flat) {
  WnoParams p;
  std::size_t off = 0;
  for (const ParamSpec& spec : param_specs(config)) {
    const std::size_t n = shape_size(spec.shape);
    if (off + n > flat.size()) throw ShapeError("unflatten: flat vector too short");
    p.names.push_back(spec.name);
    p.tensors.emplace_back(spec.shape, std::vector<double>(flat.begin() + off, flat.begin() + off + n));
    off += n;
  }
  if (off != flat.size()) throw ShapeError("unflatten: flat vector too long");
  return p;
}

std::vector<double> flatten(const WnoParams& params) {
  std::vector<double> flat;
  flat.reserve(params.total_size());
  for (const Tensor& t : params.tensors) flat.insert(flat.end(), t.data().begin(), t.data().end());
  return flat;
}

ad::Var wavelet_block(ad::Var v, const WnoVars::Block& block, const wavelet::WaveletFilter& filter,
                      int levels, std::size_t spatial_dim) {
  const ad::Var coeffs = ad::wavelet_approx(v, filter, levels, spatial_dim);
  const ad::Var mixed = ad::spectral_mix(coeffs, block.spectral);
  const ad::Var kernel_path = ad::wavelet_expand(mixed, filter, levels, spatial_dim);
  const ad::Var skip_path = ad::conv1x1_channels(v, block.skip_weight, block.skip_bias);
  return ad::gelu(ad::add(kernel_path, skip_path));
}

ad::Var wno_forward(const WnoVars& params, const WnoConfig& config, ad::Var inputs) {
  const Shape& s = inputs.shape();
  const std::size_t sd = config.spatial_dim();
  if (s.size() != sd + 2 || !std::equal(config.grid.begin(), config.grid.end(), s.begin() + 1)) {
    throw ShapeError("wno_forward: inputs " + shape_to_string(s) + " do not match grid " +
                     shape_to_string(config.grid));
  }
  if (s.back() != config.in_channels) {
    throw ShapeError("wno_forward: inputs carry " + std::to_string(s.back()) + " channels, config expects " +
                     std::to_string(config.in_channels));
  }
  if (params.blocks.size() != config.n_blocks) throw ShapeError("wno_forward: block count mismatch");
  const auto filter = wavelet::filter_coeffs(config.wavelet);
  ad::Var v = ad::conv1x1_channels(inputs, params.lift_weight, params.lift_bias);
  for (const auto& block : params.blocks) v = wavelet_block(v, block, filter, config.levels, sd);
  const ad::Var hidden = ad::gelu(ad::conv1x1_channels(v, params.proj1_weight, params.proj1_bias));
  return ad::conv1x1_channels(hidden, params.proj2_weight, params.proj2_bias);
}

Tensor wno_apply(const WnoParams& params, const WnoConfig& config, const Tensor& inputs) {
  ad::Tape tape;
  const WnoVars vars = bind(tape, params, false);
  return wno_forward(vars, config, tape.constant(inputs)).value();
}

Tensor with_coordinates(const Tensor& fields, std::size_t spatial_dim) {
  const Shape& s = fields.shape();
  if (s.size() != spatial_dim + 1) {
    throw ShapeError("with_coordinates: expected [batch, grid(" + std::to_string(spatial_dim) +
                     ")], got " + shape_to_string(s));
  }
  const std::size_t channels = 1 + spatial_dim;
  const std::size_t points = shape_size(s) / s[0];
  std::vector<double> out(shape_size(s) * channels);
  std::vector<std::size_t> idx(spatial_dim);
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t p = 0; p < points; ++p) {
      std::size_t rem = p;
      for (std::size_t d = spatial_dim; d-- > 0;) {
        idx[d] = rem % s[d + 1];
        rem /= s[d + 1];
      }
      double* dst = out.data() + (b * points + p) * channels;
      dst[0] = fields[b * points + p];
      for (std::size_t d = 0; d < spatial_dim; ++d) {
        const std::size_t n = s[d + 1];
        dst[1 + d] = n > 1 ? static_cast<double>(idx[d]) / static_cast<double>(n - 1) : 0.0;
      }
    }
  }
  Shape shape = s;
  shape.push_back(channels);
  return Tensor::computed(shape, std::move(out));
}

void put_config(io::Container& c, const WnoConfig& config) {
  c.set_meta("wno.lift_width", std::to_string(config.lift_width));
  c.set_meta("wno.proj_width", std::to_string(config.proj_width));
  c.set_meta("wno.n_blocks", std::to_string(config.n_blocks));
  c.set_meta("wno.levels", std::to_string(config.levels));
  c.set_meta("wno.wavelet", config.wavelet);
  c.set_meta("wno.in_channels", std::to_string(config.in_channels));
  std::ostringstream g;
  for (std::size_t i = 0; i < config.grid.size(); ++i) g << (i ? "x" : "") << config.grid[i];
  c.set_meta("wno.grid", g.str());
}

WnoConfig get_config(const io::Container& c) {
  WnoConfig config;
  try {
    config.lift_width = std::stoul(c.meta("wno.lift_width"));
    config.proj_width = std::stoul(c.meta("wno.proj_width"));
    config.n_blocks = std::stoul(c.meta("wno.n_blocks"));
    config.levels = std::stoi(c.meta("wno.levels"));
    config.wavelet = c.meta("wno.wavelet");
    config.in_channels = std::stoul(c.meta("wno.in_channels"));
    std::istringstream g(c.meta("wno.grid"));
    std::string part;
    while (std::getline(g, part, 'x')) config.grid.push_back(std::stoul(part));
  } catch (const std::logic_error&) {
    throw FormatError("malformed WNO config in checkpoint");
  }
  config.validate();
  return config;
}

void put_params(io::Container& c, const WnoParams& params) {
  for (std::size_t i = 0; i < params.names.size(); ++i) c.add_tensor("wno/" + params.names[i], params.tensors[i]);
}

WnoParams get_params(const io::Container& c, const WnoConfig& config) {
  WnoParams p;
  for (const ParamSpec& spec : param_specs(config)) {
    const Tensor& t = c.tensor("wno/" + spec.name);
    if (t.shape() != spec.shape) {
      throw FormatError("parameter '" + spec.name + "' has shape " + shape_to_string(t.shape()) +
                        ", config implies " + shape_to_string(spec.shape));
    }
    p.names.push_back(spec.name);
    p.tensors.push_back(t);
  }
  return p;
}

void write_checkpoint(const std::filesystem::path& path, const WnoConfig& config, const WnoParams& params) {
  io::Container c;
  c.magic = std::string(io::kCheckpointMagic);
  c.set_meta("kind", "wno");
  put_config(c, config);
  put_params(c, params);
  io::write_file(path, c);
}

std::pair<WnoConfig, WnoParams> read_checkpoint(const std::filesystem::path& path) {
  const io::Container c = io::read_file(path, io::kCheckpointMagic);
  WnoConfig config = get_config(c);
  WnoParams params = get_params(c, config);
  return {std::move(config), std::move(params)};
}

}  // namespace nogap::wno
