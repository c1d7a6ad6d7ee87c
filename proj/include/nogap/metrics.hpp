#pragma once

#include <span>
#include <string>
#include <vector>

#include "nogap/gp.hpp"
#include "nogap/tensor.hpp"

namespace nogap::metrics {

/// 100 * |pred - truth|_2 / |truth|_2. ShapeError on a size mismatch,
/// DomainError for a zero truth.
double relative_error(std::span<const double> pred, std::span<const double> truth);

/// One relative error per leading-axis sample of [T, grid...] fields.
std::vector<double> per_sample_errors(const Tensor& pred, const Tensor& truth);

/// Fraction of points, pooled over samples, with truth inside the CI band.
/// Band edges count as inside.
double coverage(const gp::Posterior& posterior, const Tensor& truth, double level = 0.95);

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single value.
  double std = 0.0;
};
Summary summarize(std::span<const double> values);

struct EvalReport {
  std::string problem;
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<double> errors;
  double mean_error = 0.0;
  double std_error = 0.0;
  double mean_pred_std = 0.0;
  double coverage95 = 0.0;
  double runtime_seconds = 0.0;

  std::string to_text() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Fills errors, their summary, mean predictive std and coverage.
EvalReport evaluate(const gp::Posterior& posterior, const Tensor& truth);

/// Parses to_text() output; '#' lines and unknown keys are skipped. Throws FormatError on malformed input.
EvalReport parse_report(const std::string& text);

}  // namespace nogap::metrics
