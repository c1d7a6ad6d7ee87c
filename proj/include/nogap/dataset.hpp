#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nogap/container.hpp"
#include "nogap/tensor.hpp"

namespace nogap::data {

/// Affine standardization of one field: (x - mean) / std.
struct Normalizer {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

/// Sample mean and population std. A constant field gets std 1.
Normalizer fit_normalizer(std::span<const double> values);

/// Input/output pairs on a shared uniform grid.
struct Dataset {
  std::string problem;
  Shape grid;
  /// Physical extent [lo, hi] of each grid axis.
  std::vector<std::pair<double, double>> extent;
  /// [N, grid..., fields]
  Tensor inputs;
  /// [N, grid...]
  Tensor outputs;
  std::vector<std::pair<std::string, std::string>> meta;
  /// One per input field, fitted on the training split.
  std::vector<Normalizer> input_norm;
  Normalizer output_norm;

  std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
  std::size_t input_fields() const { return inputs.shape().back(); }
  std::size_t grid_points() const { return shape_size(grid); }
  const std::string* find_meta(std::string_view key) const;
  void set_meta(std::string key, std::string value);

  /// Throws ShapeError / DomainError when the fields are inconsistent.
  void validate() const;
};

/// Fits input_norm and output_norm on the dataset itself.
void fit_normalizers(Dataset& ds);

/// Samples [begin, begin + count), keeping grid, meta and normalizers.
Dataset slice_samples(const Dataset& ds, std::size_t begin, std::size_t count);

io::Container to_container(const Dataset& ds);
Dataset from_container(const io::Container& c);

/// NGPD file. Writes are atomic; reads verify magic, version and checksum.
void dataset_write(const Dataset& ds, const std::filesystem::path& path);
Dataset dataset_read(const std::filesystem::path& path);

}  // namespace nogap::data
