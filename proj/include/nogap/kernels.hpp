#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>

namespace nogap::kernels {

enum class MaternOrder { Half, ThreeHalves, FiveHalves };

std::string to_string(MaternOrder order);
/// Accepts "1/2", "3/2", "5/2" (also "0.5", "1.5", "2.5").
MaternOrder parse_order(std::string_view text);

/// Matern hyperparameters stored as unconstrained logs.
struct KernelHyper {
  MaternOrder order = MaternOrder::FiveHalves;
  double log_lengthscale = 0.0;
  double log_variance = 0.0;

  double lengthscale() const;
  double variance() const;
};

/// sigma_f^2 * rho(r / h) with the closed-form half-integer Matern profile.
/// Throws DomainError for r < 0.
double matern(double r, const KernelHyper& hyper);

struct MaternGrad {
  double d_log_lengthscale;
  double d_log_variance;
};

/// Derivatives of matern with respect to the log hyperparameters.
MaternGrad matern_grad(double r, const KernelHyper& hyper);

/// Pairwise distances between rows, multiplied by `scale`.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& points, double scale = 1.0);
Eigen::MatrixXd cross_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double scale = 1.0);

/// Gram matrix from precomputed distances; symmetric inputs give exactly
/// symmetric outputs.
Eigen::MatrixXd gram_from_distances(const Eigen::MatrixXd& distances, const KernelHyper& hyper);
/// Elementwise d/dlog h of gram_from_distances.
Eigen::MatrixXd gram_grad_lengthscale(const Eigen::MatrixXd& distances, const KernelHyper& hyper);

/// G[i, j] = matern(scale * |p_i - p_j|). Upper triangle computed, lower
/// mirrored.
Eigen::MatrixXd gram(const Eigen::MatrixXd& points, const KernelHyper& hyper, double scale = 1.0);

/// |x_i - x_j| for the points of linspace(0, 1, n).
Eigen::MatrixXd coordinate_distances(std::size_t n);

}  // namespace nogap::kernels
