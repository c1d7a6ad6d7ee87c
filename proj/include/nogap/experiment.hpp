#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nogap/datagen.hpp"
#include "nogap/dataset.hpp"
#include "nogap/gp.hpp"
#include "nogap/metrics.hpp"
#include "nogap/wno.hpp"

namespace nogap::exp {

/// Everything needed to reproduce one experiment. Built from a preset and
/// then overridden key by key.
struct ExperimentConfig {
  datagen::Problem problem = datagen::Problem::Advection;
  /// "desk" or "full".
  std::string preset = "desk";
  std::size_t n_train = 200;
  std::size_t n_test = 50;
  std::size_t resolution = 40;
  std::size_t solve_resolution = 256;
  double nu = 0.1;
  std::uint64_t seed = 0;
  gp::Variant variant = gp::Variant::Nogap;

  std::string wavelet = "db8";
  int levels = 3;
  std::size_t lift_width = 32;
  std::size_t proj_width = 64;
  std::size_t blocks = 2;

  std::size_t iterations = 1000;
  double learning_rate = 1e-2;
  double hyper_learning_rate = 0.0;
  std::size_t lr_step = 500;
  double lr_gamma = 0.5;
  kernels::MaternOrder kernel = kernels::MaternOrder::FiveHalves;
  double init_lengthscale_x = 1.0;
  double init_variance = 1.0;
  double init_lengthscale_f = 1.0;
  double init_noise = 1e-2;
  double noise_floor = 1e-8;
  std::size_t chunk = 0;

  /// Output grid implied by problem and resolution.
  Shape grid() const;
  wno::WnoConfig wno_config() const;
  gp::TrainConfig train_config() const;
  datagen::GenerateOptions generate_options(std::uint64_t stream) const;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Preset for a problem at "desk" or "full" scale.
ExperimentConfig preset(datagen::Problem problem, std::string_view scale = "desk");

/// Applies one key = value setting. Throws ConfigError for unknown keys or
/// unparsable values. "problem" and "preset" reset every other key.
void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value);

/// UTF-8 key = value text: '#' comments, blank lines, optional quotes around
/// values, [section] headers ignored. "problem" and "preset" are applied
/// first regardless of position.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every setting, in a fixed order, as text parse_config accepts.
std::string to_text(const ExperimentConfig& c);
std::vector<std::pair<std::string, std::string>> settings(const ExperimentConfig& c);

struct DatasetPair {
  data::Dataset train;
  /// Carries the training normalizers.
  data::Dataset test;
};

/// Deterministic in (config, seed): train from stream 0, test from stream 1.
DatasetPair generate_datasets(const ExperimentConfig& c);

struct RunResult {
  gp::TrainedModel model;
  gp::Posterior posterior;
  metrics::EvalReport report;
  double train_seconds = 0.0;
};

/// Trains the configured variant on `train` and evaluates on `test`.
RunResult run_variant(const ExperimentConfig& c, const data::Dataset& train, const data::Dataset& test);

/// Evaluation of a trained model on a dataset with timing filled in.
metrics::EvalReport evaluate_model(const gp::TrainedModel& model, const data::Dataset& test, const std::string& problem,
                                   std::uint64_t seed, gp::Posterior* posterior_out = nullptr);

/// Raises the allocator's mmap and trim thresholds so the tape's large,
/// short-lived buffers are reused instead of being returned to the kernel.
void tune_allocator();

}  // namespace nogap::exp
