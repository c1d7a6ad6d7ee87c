#include "nogap/kron.hpp"

#include <cmath>
#include <string>

#include "nogap/errors.hpp"

namespace nogap::kron {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Eigen::VectorXd mode_product(const Eigen::VectorXd& v, const std::vector<std::size_t>& dims, std::size_t axis,
                             const Eigen::MatrixXd& m) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  const auto n_in = static_cast<Eigen::Index>(dims[axis]);
  const auto n_out = m.rows();
  if (m.cols() != n_in) throw ShapeError("mode_product: matrix does not match axis length");
  Eigen::VectorXd out(static_cast<Eigen::Index>(outer) * n_out * static_cast<Eigen::Index>(inner));
  const auto in_block = n_in * static_cast<Eigen::Index>(inner);
  const auto out_block = n_out * static_cast<Eigen::Index>(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    Eigen::Map<const RowMajor> src(v.data() + o * in_block, n_in, static_cast<Eigen::Index>(inner));
    Eigen::Map<RowMajor> dst(out.data() + o * out_block, n_out, static_cast<Eigen::Index>(inner));
    dst.noalias() = m * src;
  }
  return out;
}

Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& f : factors) {
    Eigen::MatrixXd next(acc.rows() * f.rows(), acc.cols() * f.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
      for (Eigen::Index j = 0; j < acc.cols(); ++j) {
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = acc(i, j) * f;
      }
    }
    acc = std::move(next);
  }
  return acc;
}

KronOperator::KronOperator(std::vector<Eigen::MatrixXd> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ShapeError("KronOperator: no factors");
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Eigen::MatrixXd& k = factors_[i];
    if (k.rows() != k.cols() || k.rows() == 0) {
      throw ShapeError("KronOperator: factor " + std::to_string(i) + " is " + std::to_string(k.rows()) + "x" +
                       std::to_string(k.cols()) + ", expected a non-empty square matrix");
    }
    const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff())) {
      throw DomainError("KronOperator: factor " + std::to_string(i) + " is not symmetric (max asymmetry " +
                        std::to_string(asym) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success) throw NumericError("KronOperator: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      if (lam(j) < 0.0) {
        lam(j) = 0.0;
        ++clamped_;
      }
    }
    values_.push_back(std::move(lam));
    vectors_.push_back(es.eigenvectors());
    dim_ *= static_cast<std::size_t>(k.rows());
  }
  grid_ = Eigen::VectorXd::Ones(1);
  for (const auto& lam : values_) {
    Eigen::VectorXd next(grid_.size() * lam.size());
    for (Eigen::Index a = 0; a < grid_.size(); ++a) next.segment(a * lam.size(), lam.size()) = grid_(a) * lam;
    grid_ = std::move(next);
  }
}

std::size_t KronOperator::factor_dim(std::size_t i) const { return static_cast<std::size_t>(factor(i).rows()); }

const Eigen::MatrixXd& KronOperator::factor(std::size_t i) const {
  if (i >= factors_.size()) throw ContractError("KronOperator: factor index " + std::to_string(i) + " out of range");
  return factors_[i];
}

const Eigen::MatrixXd& KronOperator::eigenvectors(std::size_t i) const {
  factor(i);
  return vectors_[i];
}

const Eigen::VectorXd& KronOperator::eigenvalues(std::size_t i) const {
  factor(i);
  return values_[i];
}

void KronOperator::check_shift(double sigma2) const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw DomainError("KronOperator: shift must be positive and finite, got " + std::to_string(sigma2));
  }
}

void KronOperator::check_length(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw ShapeError("KronOperator: vector length " + std::to_string(v.size()) + " does not match dimension " +
                     std::to_string(dim_));
  }
}

Eigen::VectorXd KronOperator::apply_each(const Eigen::VectorXd& v, const std::vector<Eigen::MatrixXd>& mats,
                                         bool transpose) const {
  check_length(v);
  std::vector<std::size_t> dims;
  for (const auto& f : factors_) dims.push_back(static_cast<std::size_t>(f.rows()));
  Eigen::VectorXd out = v;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    out = transpose ? mode_product(out, dims, i, mats[i].transpose()) : mode_product(out, dims, i, mats[i]);
  }
  return out;
}

Eigen::VectorXd KronOperator::matvec(const Eigen::VectorXd& v) const { return apply_each(v, factors_, false); }

Eigen::VectorXd KronOperator::to_eigenbasis(const Eigen::VectorXd& v) const { return apply_each(v, vectors_, true); }

Eigen::VectorXd KronOperator::from_eigenbasis(const Eigen::VectorXd& w) const {
  return apply_each(w, vectors_, false);
}

Eigen::VectorXd KronOperator::shifted_solve(double sigma2, const Eigen::VectorXd& rhs) const {
  check_shift(sigma2);
  Eigen::VectorXd w = to_eigenbasis(rhs);
  w.array() /= grid_.array() + sigma2;
  return from_eigenbasis(w);
}

double KronOperator::logdet(double sigma2) const {
  check_shift(sigma2);
  return (grid_.array() + sigma2).log().sum();
}

double KronOperator::solve_trace(double sigma2, std::size_t index, const Eigen::MatrixXd& dk) const {
  check_shift(sigma2);
  const Eigen::MatrixXd& q = eigenvectors(index);
  if (dk.rows() != q.rows() || dk.cols() != q.cols()) {
    throw ShapeError("solve_trace: derivative factor has the wrong size");
  }
  const Eigen::VectorXd d = (q.transpose() * dk * q).diagonal();
  // Product grid with slot `index` replaced by d.
  Eigen::VectorXd num = Eigen::VectorXd::Ones(1);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Eigen::VectorXd& lam = i == index ? d : values_[i];
    Eigen::VectorXd next(num.size() * lam.size());
    for (Eigen::Index a = 0; a < num.size(); ++a) next.segment(a * lam.size(), lam.size()) = num(a) * lam;
    num = std::move(next);
  }
  return (num.array() / (grid_.array() + sigma2)).sum();
}

}  // namespace nogap::kron
