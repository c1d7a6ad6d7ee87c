#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nogap/autodiff.hpp"
#include "nogap/container.hpp"
#include "nogap/tensor.hpp"
#include "nogap/wavelet.hpp"

namespace nogap::wno {

/// Architecture of the wavelet neural operator used as the GP mean.
struct WnoConfig {
  std::size_t lift_width = 32;
  std::size_t proj_width = 64;
  std::size_t n_blocks = 2;
  int levels = 1;
  std::string wavelet = "db4";
  /// Spatial grid, one entry per axis (1 or 2 axes).
  Shape grid;
  /// Field channels plus one coordinate channel per spatial axis.
  std::size_t in_channels = 2;

  std::size_t spatial_dim() const noexcept { return grid.size(); }
  /// Number of coarsest-level approximation coefficients per channel.
  std::size_t coarse_positions() const;
  /// Throws ConfigError (or ShapeError for an indivisible grid).
  void validate() const;
};

bool operator==(const WnoConfig& a, const WnoConfig& b);

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Parameter names and shapes in canonical order.
std::vector<ParamSpec> param_specs(const WnoConfig& config);

/// Named parameter tensors in canonical order.
struct WnoParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  const Tensor& get(std::string_view name) const;
  std::size_t total_size() const;
};

/// Dense layers uniform in +-1/sqrt(fan_in); spectral weights
/// 1/(c_in c_out) * U[0, 1). Deterministic in seed.
WnoParams wno_init(const WnoConfig& config, std::uint64_t seed);
WnoParams wno_zeros(const WnoConfig& config);

/// Parameters as tape variables.
struct WnoVars {
  struct Block {
    ad::Var spectral;
    ad::Var skip_weight;
    ad::Var skip_bias;
  };
  ad::Var lift_weight;
  ad::Var lift_bias;
  std::vector<Block> blocks;
  ad::Var proj1_weight;
  ad::Var proj1_bias;
  ad::Var proj2_weight;
  ad::Var proj2_bias;

  /// Same order as WnoParams::names.
  std::vector<ad::Var> all() const;
};

/// Records the parameters as leaves (trainable) or constants.
WnoVars bind(ad::Tape& tape, const WnoParams& params, bool trainable = true);

/// Rebuilds a parameter set from one flat vector (canonical order).
WnoParams unflatten(const WnoConfig& config, std::span<const double> flat);
std::vector<double> flatten(const WnoParams& params);

/// One wavelet integral block: gelu(idwt(W * approx(dwt(v))) + skip(v)).
/// Only the coarsest approximation coefficients enter the kernel path; the
/// detail coefficients are zeroed before the inverse transform.
ad::Var wavelet_block(ad::Var v, const WnoVars::Block& block, const wavelet::WaveletFilter& filter,
                      int levels, std::size_t spatial_dim);

/// lift -> blocks -> dense, gelu, dense. inputs [batch, grid..., in_channels]
/// -> [batch, grid..., 1].
ad::Var wno_forward(const WnoVars& params, const WnoConfig& config, ad::Var inputs);

/// Forward pass without keeping a tape.
Tensor wno_apply(const WnoParams& params, const WnoConfig& config, const Tensor& inputs);

/// Appends linspace(0, 1) coordinate channels to fields [batch, grid...] giving
/// [batch, grid..., 1 + spatial_dim].
Tensor with_coordinates(const Tensor& fields, std::size_t spatial_dim);

/// Config echo as container metadata with "wno." prefixed keys.
void put_config(io::Container& c, const WnoConfig& config);
WnoConfig get_config(const io::Container& c);
void put_params(io::Container& c, const WnoParams& params);
/// Checks names and shapes against the config.
WnoParams get_params(const io::Container& c, const WnoConfig& config);

void write_checkpoint(const std::filesystem::path& path, const WnoConfig& config, const WnoParams& params);
std::pair<WnoConfig, WnoParams> read_checkpoint(const std::filesystem::path& path);

}  // namespace nogap::wno
