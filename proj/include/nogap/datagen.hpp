#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nogap/dataset.hpp"
#include "nogap/tensor.hpp"

namespace nogap::datagen {

/// Random stream for sample `index` of split `stream` (0 train, 1 test).
/// Independent of how many samples are generated.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Periodic Gaussian random field on [0, 1) with covariance
/// 625 (-Laplacian + 25)^-2 and zero mean mode, sampled at `resolution`
/// points. Modes 1 .. max_mode are used (0: resolution / 2 - 1).
/// Returns [n, resolution]. resolution must be even.
Tensor grf_sample(std::uint64_t seed, std::size_t n, std::size_t resolution, std::size_t max_mode = 0);
/// Pointwise variance of grf_sample's law.
double grf_point_variance(std::size_t resolution, std::size_t max_mode = 0);

/// Viscous Burgers u_t + (u^2 / 2)_x = nu u_xx on the periodic unit interval.
/// Pseudo-spectral with 2/3 dealiasing, exact diffusion via an integrating
/// factor and classical RK4, dt = 0.25 dx^2 / nu. Throws NumericError if the
/// state stops being finite.
std::vector<double> burgers_solve(std::span<const double> u0, double nu = 0.1, double t_end = 1.0);

struct AdvectionParams {
  double center;
  double width;
  double height;
};

/// Square wave plus half-ellipse bump on x_i = i / resolution, and its exact
/// transport to t = 0.5 at unit speed (a circular shift by half the domain).
std::pair<std::vector<double>, std::vector<double>> advection_profile(const AdvectionParams& p,
                                                                      std::size_t resolution);
/// Draws (c, w, h) from [0.3, 0.7] x [0.3, 0.6] x [1, 2].
AdvectionParams advection_params(std::uint64_t seed);
std::pair<std::vector<double>, std::vector<double>> advection_sample(std::uint64_t seed, std::size_t resolution = 40);

/// u = a sin(pi x)(1 + cos(pi y)) + b sin(2 pi x)(1 - cos(2 pi y)) and
/// f = u_xx + u_yy on the uniform resolution x resolution grid over [-1, 1]^2,
/// row-major with x along the first axis.
struct PoissonFields {
  std::vector<double> f;
  std::vector<double> u;
};
PoissonFields poisson_fields(double a, double b, std::size_t resolution);
/// Draws a, b ~ U(-2, 2).
std::pair<double, double> poisson_params(std::uint64_t seed);
PoissonFields poisson_sample(std::uint64_t seed, std::size_t resolution = 33);

enum class Problem { Burgers, Advection, Poisson };
std::string to_string(Problem p);
/// Throws ConfigError for an unknown tag.
Problem parse_problem(std::string_view text);

struct GenerateOptions {
  Problem problem = Problem::Advection;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  /// 0 train, 1 test.
  std::uint64_t stream = 0;
  /// Burgers: solver grid, and the stored grid after subsampling.
  std::size_t solve_resolution = 256;
  std::size_t resolution = 128;
  double nu = 0.1;
};

/// Generated dataset with normalizers fitted on itself.
data::Dataset generate(const GenerateOptions& options);

}  // namespace nogap::datagen
