#include "nogap/kernels.hpp"

#include <cmath>

#include "nogap/errors.hpp"

namespace nogap::kernels {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);

// Profile rho(s) and -s * rho'(s), the latter being d rho / d log h.
struct Profile {
  double value;
  double d_log_h;
};

Profile profile(double s, MaternOrder order) {
  switch (order) {
    case MaternOrder::Half: {
      const double e = std::exp(-s);
      return {e, s * e};
    }
    case MaternOrder::ThreeHalves: {
      const double e = std::exp(-kSqrt3 * s);
      return {(1.0 + kSqrt3 * s) * e, 3.0 * s * s * e};
    }
    case MaternOrder::FiveHalves: {
      const double e = std::exp(-kSqrt5 * s);
      return {(1.0 + kSqrt5 * s + 5.0 * s * s / 3.0) * e, (5.0 / 3.0) * s * s * (1.0 + kSqrt5 * s) * e};
    }
  }
  throw ContractError("unknown Matern order");
}

}  // namespace

std::string to_string(MaternOrder order) {
  switch (order) {
    case MaternOrder::Half:
      return "1/2";
    case MaternOrder::ThreeHalves:
      return "3/2";
    case MaternOrder::FiveHalves:
      return "5/2";
  }
  return "?";
}

MaternOrder parse_order(std::string_view text) {
  if (text == "1/2" || text == "0.5") return MaternOrder::Half;
  if (text == "3/2" || text == "1.5") return MaternOrder::ThreeHalves;
  if (text == "5/2" || text == "2.5") return MaternOrder::FiveHalves;
  throw ConfigError("unsupported Matern order '" + std::string(text) + "' (expected 1/2, 3/2 or 5/2)");
}

double KernelHyper::lengthscale() const { return std::exp(log_lengthscale); }
double KernelHyper::variance() const { return std::exp(log_variance); }

double matern(double r, const KernelHyper& hyper) {
  if (!(r >= 0.0)) throw DomainError("matern: distance must be non-negative, got " + std::to_string(r));
  return hyper.variance() * profile(r / hyper.lengthscale(), hyper.order).value;
}

MaternGrad matern_grad(double r, const KernelHyper& hyper) {
  if (!(r >= 0.0)) throw DomainError("matern_grad: distance must be non-negative, got " + std::to_string(r));
  const Profile p = profile(r / hyper.lengthscale(), hyper.order);
  const double var = hyper.variance();
  return {var * p.d_log_h, var * p.value};
}

Eigen::MatrixXd cross_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double scale) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cross_distance: point dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.cols()) + " differ");
  }
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = scale * (a.row(i) - b.row(j)).norm();
  }
  return d;
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& points, double scale) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = scale * (points.row(i) - points.row(j)).norm();
      d(j, i) = d(i, j);
    }
  }
  return d;
}

Eigen::MatrixXd gram_from_distances(const Eigen::MatrixXd& distances, const KernelHyper& hyper) {
  const double inv_h = 1.0 / hyper.lengthscale();
  const double var = hyper.variance();
  Eigen::MatrixXd g(distances.rows(), distances.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double r = distances(i, j);
      if (!(r >= 0.0)) throw DomainError("gram: negative distance");
      g(i, j) = var * profile(r * inv_h, hyper.order).value;
    }
  }
  return g;
}

Eigen::MatrixXd gram_grad_lengthscale(const Eigen::MatrixXd& distances, const KernelHyper& hyper) {
  const double inv_h = 1.0 / hyper.lengthscale();
  const double var = hyper.variance();
  Eigen::MatrixXd g(distances.rows(), distances.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      g(i, j) = var * profile(distances(i, j) * inv_h, hyper.order).d_log_h;
    }
  }
  return g;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& points, const KernelHyper& hyper, double scale) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = matern(0.0, hyper);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      g(i, j) = matern(scale * (points.row(i) - points.row(j)).norm(), hyper);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

Eigen::MatrixXd coordinate_distances(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d(m, m);
  const double step = n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) d(i, j) = step * static_cast<double>(std::abs(i - j));
  }
  return d;
}

}  // namespace nogap::kernels
