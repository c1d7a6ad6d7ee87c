#pragma once

#include <random>
#include <vector>

#include "nogap/tensor.hpp"

namespace nogap::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace nogap::testing
