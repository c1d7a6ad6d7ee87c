#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nogap::kron {

/// K_1 (x) ... (x) K_m for symmetric PSD factors, with the eigendecomposition
/// of every factor computed at construction. Vectors are indexed with the
/// first factor varying slowest.
class KronOperator {
 public:
  /// Throws ShapeError for a non-square factor or an empty list and
  /// DomainError for an asymmetric one.
  explicit KronOperator(std::vector<Eigen::MatrixXd> factors);

  std::size_t n_factors() const noexcept { return factors_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t factor_dim(std::size_t i) const;
  const Eigen::MatrixXd& factor(std::size_t i) const;
  const Eigen::MatrixXd& eigenvectors(std::size_t i) const;
  const Eigen::VectorXd& eigenvalues(std::size_t i) const;
  /// Negative eigenvalues clamped to zero over all factors.
  std::size_t clamp_count() const noexcept { return clamped_; }

  /// Eigenvalues of the full product, same indexing as vectors.
  const Eigen::VectorXd& eigen_grid() const noexcept { return grid_; }

  Eigen::VectorXd matvec(const Eigen::VectorXd& v) const;
  /// (Q_1 (x) ... (x) Q_m)^T v
  Eigen::VectorXd to_eigenbasis(const Eigen::VectorXd& v) const;
  /// (Q_1 (x) ... (x) Q_m) w
  Eigen::VectorXd from_eigenbasis(const Eigen::VectorXd& w) const;

  /// Solves (K + sigma2 I) x = rhs. DomainError unless sigma2 > 0.
  Eigen::VectorXd shifted_solve(double sigma2, const Eigen::VectorXd& rhs) const;
  double logdet(double sigma2) const;
  /// tr((K + sigma2 I)^-1 (K_1 (x) .. dK .. (x) K_m)) with dK in slot `index`.
  double solve_trace(double sigma2, std::size_t index, const Eigen::MatrixXd& dk) const;

 private:
  void check_shift(double sigma2) const;
  void check_length(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_each(const Eigen::VectorXd& v, const std::vector<Eigen::MatrixXd>& mats,
                             bool transpose) const;

  std::vector<Eigen::MatrixXd> factors_;
  std::vector<Eigen::MatrixXd> vectors_;
  std::vector<Eigen::VectorXd> values_;
  Eigen::VectorXd grid_;
  std::size_t dim_ = 1;
  std::size_t clamped_ = 0;
};

/// Applies `m` along `axis` of v viewed as a row-major tensor of shape dims.
Eigen::VectorXd mode_product(const Eigen::VectorXd& v, const std::vector<std::size_t>& dims, std::size_t axis,
                             const Eigen::MatrixXd& m);

/// Materialized Kronecker product, for testing and small problems.
Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& factors);

}  // namespace nogap::kron
