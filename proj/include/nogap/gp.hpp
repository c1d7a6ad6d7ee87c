#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nogap/dataset.hpp"
#include "nogap/kernels.hpp"
#include "nogap/kron.hpp"
#include "nogap/tensor.hpp"
#include "nogap/wno.hpp"

namespace nogap::gp {

/// nogap: WNO mean and GP trained jointly. wno_only: mean alone, squared
/// error. gp_zero_mean: kernel hyperparameters only.
enum class Variant { Nogap, WnoOnly, GpZeroMean };

std::string to_string(Variant v);
/// Throws ConfigError for an unknown name.
Variant parse_variant(std::string_view text);

struct NogapParams {
  wno::WnoParams wno;
  /// Covariance over inputs. Carries the signal variance.
  kernels::KernelHyper kx;
  /// Covariance over output coordinates, one per grid axis. Their variances
  /// stay at 1 and are not trained (they would duplicate kx's).
  std::vector<kernels::KernelHyper> kf;
  double log_noise = std::log(1e-2);

  double noise() const { return std::exp(log_noise); }
};

/// Number of entries pack() produces: WNO parameters, kx (log h, log var),
/// one log h per kf axis, log noise.
std::size_t packed_size(const NogapParams& p);
std::vector<double> pack(const NogapParams& p);
/// Inverse of pack; `like` supplies the structure.
NogapParams unpack(const NogapParams& like, const wno::WnoConfig& config, std::span<const double> flat);

/// Training data in model space.
struct GpData {
  wno::WnoConfig wno;
  /// [N, grid..., fields + spatial_dim]: normalized fields and coordinates.
  Tensor inputs;
  /// Row i is sample i's normalized fields flattened and divided by
  /// sqrt(grid points), so Euclidean distance is resolution insensitive.
  Eigen::MatrixXd features;
  Eigen::MatrixXd distances;
  /// N * M normalized targets, sample-major.
  Eigen::VectorXd targets;

  std::size_t n_samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t n_points() const { return shape_size(wno.grid); }
};

/// Normalizes raw fields [N, grid..., fields] and appends coordinate channels.
Tensor model_inputs(const Tensor& fields, const std::vector<data::Normalizer>& norms);
/// Feature rows from model inputs (coordinate channels dropped).
Eigen::MatrixXd input_features(const Tensor& inputs, std::size_t spatial_dim);

GpData make_gp_data(const wno::WnoConfig& config, Tensor inputs, Eigen::VectorXd targets);
GpData make_gp_data(const wno::WnoConfig& config, const data::Dataset& ds);

/// Grams over linspace(0, 1) coordinates, one per grid axis.
std::vector<Eigen::MatrixXd> output_factors(const Shape& grid, const std::vector<kernels::KernelHyper>& kf);
/// K_x (x) K_f1 (x) ... for the training inputs.
kron::KronOperator covariance(const GpData& data, const NogapParams& p);

struct NlmlOptions {
  bool want_grad = true;
  /// Mean fixed at zero: skips the WNO entirely.
  bool zero_mean = false;
  /// Samples per tape in the mean gradient, 0 for all at once.
  std::size_t chunk = 0;
};

struct NlmlResult {
  double value = 0.0;
  /// Same layout as pack(); empty unless requested.
  std::vector<double> grad;
  /// (K + sigma^2 I)^-1 r
  Eigen::VectorXd alpha;
  /// r = targets - mean
  Eigen::VectorXd residual;
};

/// Negative log marginal likelihood with its gradient. Throws NumericError
/// (carrying the sample index) if the mean produces non-finite values.
NlmlResult nlml(const GpData& data, const NogapParams& p, const NlmlOptions& options = {});

/// WNO output over all samples, sample-major N * M. Throws NumericError on
/// non-finite output.
Eigen::VectorXd mean_function(const wno::WnoParams& params, const wno::WnoConfig& config, const Tensor& inputs,
                              std::size_t chunk = 0);

struct LogEntry {
  std::size_t iteration = 0;
  /// NLML, or mean squared error for wno_only.
  double objective = 0.0;
  double noise_std = 0.0;
  double lengthscale_x = 0.0;
  double variance_x = 0.0;
  std::vector<double> lengthscale_f;
};

struct TrainConfig {
  Variant variant = Variant::Nogap;
  wno::WnoConfig wno;
  std::size_t iterations = 1000;
  double learning_rate = 1e-3;
  /// Step size for the kernel and noise parameters; <= 0 means learning_rate.
  double hyper_learning_rate = 0.0;
  /// Both step sizes are multiplied by lr_gamma every lr_step iterations
  /// (0: constant).
  std::size_t lr_step = 0;
  double lr_gamma = 1.0;
  std::uint64_t seed = 0;
  kernels::MaternOrder order = kernels::MaternOrder::FiveHalves;
  double init_lengthscale_x = 1.0;
  double init_variance = 1.0;
  double init_lengthscale_f = 1.0;
  double init_noise = 1e-2;
  double noise_floor = 1e-8;
  std::size_t chunk = 0;
  /// Called after every logged iteration.
  std::function<void(const LogEntry&)> progress;
};

struct TrainedModel {
  Variant variant = Variant::Nogap;
  wno::WnoConfig wno;
  NogapParams params;
  std::vector<data::Normalizer> input_norm;
  data::Normalizer output_norm;
  /// Model-space training inputs and their features.
  Tensor train_inputs;
  Eigen::MatrixXd train_features;
  Eigen::VectorXd alpha;
  /// Present for variants with a GP part.
  std::optional<kron::KronOperator> kron;
  std::vector<LogEntry> log;
  double initial_objective = 0.0;
  double best_objective = 0.0;
  bool diverged = false;
  std::string diagnostic;
  /// Content hash of the training dataset file, when known.
  std::string train_hash;
  std::size_t chunk = 0;
};

/// Initial parameters for a config (WNO zeros for gp_zero_mean).
NogapParams initial_params(const TrainConfig& config);

/// Full-batch Adam over the variant's parameters, keeping the best iterate.
/// A non-finite objective stops training with diverged set; the model then
/// holds the last finite best iterate.
TrainedModel train(const GpData& data, const TrainConfig& config);
TrainedModel train(const data::Dataset& ds, const TrainConfig& config);

/// Rebuilds alpha and the covariance cache from parameters.
void finalize(TrainedModel& model, const GpData& data);

struct Posterior {
  /// [T, grid...] in physical units.
  Tensor mean;
  Tensor std;
  bool noise_included = false;
};

/// Raw test fields [T, grid..., fields]. Throws ShapeError on a grid mismatch.
Posterior predict(const TrainedModel& model, const Tensor& test_fields, bool include_noise = false);

/// Prediction with an explicit input covariance: cross [N, T] between training
/// and test inputs and self [T] at zero lag. `test_inputs` are in model space.
Posterior predict_with_cross(const TrainedModel& model, const Tensor& test_inputs, const Eigen::MatrixXd& cross,
                             const Eigen::VectorXd& self, bool include_noise = false);

/// mean -/+ z * std with z the two-sided normal quantile. DomainError unless
/// 0 < level < 1.
std::pair<Tensor, Tensor> ci_band(const Posterior& posterior, double level = 0.95);
double normal_quantile_two_sided(double level);

void write_model(const std::filesystem::path& path, const TrainedModel& model);
/// Rebuilds the covariance cache on load.
TrainedModel read_model(const std::filesystem::path& path);

}  // namespace nogap::gp
