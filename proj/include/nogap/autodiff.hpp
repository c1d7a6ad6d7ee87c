#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nogap/tensor.hpp"
#include "nogap/wavelet.hpp"

namespace nogap::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Accumulates into the input adjoints given the output adjoint.
/// grad_in[i] is empty when input i does not need a gradient.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::vector<std::span<double>>& grad_in)>;

/// Reverse-mode autodiff record. Nodes are appended in evaluation order, which
/// is therefore a topological order. A tape is single-writer.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input that never receives an adjoint.
  Var constant(Tensor value);

  /// Appends the result of an operation. Used by the op implementations.
  Var record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  const std::string& op(std::size_t id) const;
  const std::vector<std::size_t>& inputs(std::size_t id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adjoints of every node up to and including `root`, given the adjoint
  /// `seed` of the root. Nodes the root does not depend on get zeros.
  /// Throws LookupError for an unknown root and ShapeError when the seed
  /// shape differs from the root value.
  std::vector<Tensor> backward(std::size_t root, const Tensor& seed) const;
  std::vector<Tensor> backward(Var root, const Tensor& seed) const { return backward(root.id, seed); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- op catalog -----------------------------------------------------------
// No broadcasting: operand shapes must agree exactly except where stated.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// [m, k] x [k, n] -> [m, n].
Var matmul(Var a, Var b);
Var scale(Var a, double factor);
Var reshape(Var a, Shape shape);
/// Concatenates along the last axis; all other axes must agree.
Var concat_lastdim(std::span<const Var> parts);
/// Keeps [begin, end) along `axis`.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// Zero-pads along `axis` so that `a` occupies [begin, begin + len) of a
/// length-`full` axis. Adjoint of slice.
Var pad(Var a, std::size_t axis, std::size_t begin, std::size_t full);
Var sum(Var a);
Var mean(Var a);
/// Tanh approximation 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Var gelu(Var a);
/// Pointwise dense layer over the last axis: x[..., cin] W[cin, cout] + b[cout].
Var conv1x1_channels(Var x, Var weight, Var bias);
/// Per-position channel mixing: a[b, p..., cin], w[cin, cout, P] with P the
/// product of the position axes -> [b, p..., cout].
Var spectral_mix(Var a, Var weight);
/// Multi-level periodic DWT over axes 1..spatial_dims of x[batch, grid..., c],
/// Mallat-packed (see wavelet::dwt_packed).
Var dwt_hook(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims);
/// Inverse of dwt_hook.
Var idwt_hook(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims);

/// Coarsest approximation coefficients only: [batch, grid..., c] ->
/// [batch, grid / 2^levels..., c]. Equals dwt_hook followed by slicing the
/// coarse box, at a fraction of the cost.
Var wavelet_approx(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims);
/// Adjoint of wavelet_approx: inverse transform with zero detail coefficients.
Var wavelet_expand(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims);

double gelu_value(double x);
double gelu_derivative(double x);

/// Differentiable scalar map evaluated on a fresh tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Throws ContractError when fn returns a non-scalar or eps <= 0.
double gradcheck(const ScalarFn& fn, const Tensor& point, double eps = 1e-6);

/// Analytic gradient of fn at point.
Tensor gradient(const ScalarFn& fn, const Tensor& point);

}  // namespace nogap::ad
