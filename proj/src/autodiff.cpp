#include "nogap/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "nogap/errors.hpp"

namespace nogap::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": operand shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

// Splits a shape around `axis` into (outer, n, inner) extents.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.n = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);


std::vector<std::size_t> spatial_axes(const Shape& shape, std::size_t spatial_dims, const char* op) {
  if (spatial_dims < 1 || shape.size() != spatial_dims + 2) {
    throw ShapeError(std::string(op) + ": expected [batch, grid(" + std::to_string(spatial_dims) +
                     " axes), channels], got " + shape_to_string(shape));
  }
  std::vector<std::size_t> axes(spatial_dims);
  for (std::size_t i = 0; i < spatial_dims; ++i) axes[i] = i + 1;
  return axes;
}

}  // namespace

const Tensor& Var::value() const {
  if (tape == nullptr) throw ContractError("Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{"leaf", std::move(value), {}, nullptr, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t i : inputs) {
    if (i >= nodes_.size()) throw LookupError("record: unknown input node " + std::to_string(i));
    needs = needs || nodes_[i].needs_grad;
  }
  nodes_.push_back(Node{std::move(op), std::move(value), std::move(inputs),
                        needs ? std::move(backward) : BackwardFn{}, needs});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  if (id >= nodes_.size()) throw LookupError("unknown tape node " + std::to_string(id));
  return nodes_[id].value;
}

const std::string& Tape::op(std::size_t id) const {
  if (id >= nodes_.size()) throw LookupError("unknown tape node " + std::to_string(id));
  return nodes_[id].op;
}

const std::vector<std::size_t>& Tape::inputs(std::size_t id) const {
  if (id >= nodes_.size()) throw LookupError("unknown tape node " + std::to_string(id));
  return nodes_[id].inputs;
}

std::vector<Tensor> Tape::backward(std::size_t root, const Tensor& seed) const {
  if (root >= nodes_.size()) throw LookupError("backward: unknown root node " + std::to_string(root));
  if (seed.shape() != nodes_[root].value.shape()) {
    throw ShapeError("backward: seed shape " + shape_to_string(seed.shape()) +
                     " differs from root shape " + shape_to_string(nodes_[root].value.shape()));
  }
  std::vector<std::vector<double>> grads(root + 1);
  grads[root] = seed.to_vector();

  for (std::size_t i = root + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || grads[i].empty()) continue;
    std::vector<std::span<double>> grad_in;
    grad_in.reserve(node.inputs.size());
    for (std::size_t in : node.inputs) {
      if (!nodes_[in].needs_grad) {
        grad_in.emplace_back();
        continue;
      }
      if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
      grad_in.emplace_back(grads[in]);
    }
    node.backward(grads[i], grad_in);
  }

  std::vector<Tensor> out;
  out.reserve(root + 1);
  for (std::size_t i = 0; i <= root; ++i) {
    if (grads[i].empty()) {
      out.push_back(Tensor::computed(nodes_[i].value.shape(),
                                     std::vector<double>(nodes_[i].value.size(), 0.0)));
    } else {
      out.push_back(Tensor::computed(nodes_[i].value.shape(), std::move(grads[i])));
    }
  }
  return out;
}

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape("add", x, y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return a.tape->record("add", Tensor::computed(x.shape(), std::move(out)), {a.id, b.id},
                        [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (auto& gi : gin) {
                            if (gi.empty()) continue;
                            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                          }
                        });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape("sub", x, y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return a.tape->record("sub", Tensor::computed(x.shape(), std::move(out)), {a.id, b.id},
                        [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          if (!gin[0].empty()) {
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                          }
                          if (!gin[1].empty()) {
                            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                          }
                        });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  require_same_shape("mul", x, y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return a.tape->record("mul", Tensor::computed(x.shape(), std::move(out)), {a.id, b.id},
                        [x, y](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          if (!gin[0].empty()) {
                            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
                          }
                          if (!gin[1].empty()) {
                            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
                          }
                        });
}

Var scale(Var a, double factor) {
  const Tensor& x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
  return a.tape->record("scale", Tensor::computed(x.shape(), std::move(out)), {a.id},
                        [factor](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += factor * g[i];
                        });
}

Var gelu(Var a) {
  const Tensor& x = a.value();
  const auto n = static_cast<Eigen::Index>(x.size());
  // Eigen-owned arrays: vectorized exp, with a scalar tail that depends only
  // on n (a Map over the heap buffer would peel by address)
  const Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(x.raw(), n);
  const Eigen::ArrayXd u = kSqrt2OverPi * (v + kGeluC * v.cube());
  // tanh only enters as 1 + t and 1 - t^2, so the absolute accuracy of
  // (1 - e) / (1 + e) is enough
  const Eigen::ArrayXd e = (-2.0 * u.abs()).exp();
  const Eigen::ArrayXd t = u.sign() * (1.0 - e) / (1.0 + e);
  const Eigen::ArrayXd y = 0.5 * v * (1.0 + t);
  // derivative kept from the forward pass so backward needs no tanh
  auto deriv = std::make_shared<Eigen::ArrayXd>(
      0.5 * (1.0 + t) + 0.5 * v * (1.0 - t.square()) * kSqrt2OverPi * (1.0 + 3.0 * kGeluC * v.square()));
  return a.tape->record("gelu", Tensor::computed(x.shape(), std::vector<double>(y.begin(), y.end())), {a.id},
                        [deriv](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          const double* d = deriv->data();
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * d[i];
                        });
}

double gelu_value(double x) {
  const double u = kSqrt2OverPi * (x + kGeluC * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kSqrt2OverPi * (x + kGeluC * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluC * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// ---- shape ops ---------------------------------------------------------------

Var reshape(Var a, Shape shape) {
  const Tensor& x = a.value();
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  return a.tape->record("reshape", x.reshaped(std::move(shape)), {a.id},
                        [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                        });
}

Var concat_lastdim(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_lastdim: no operands");
  Tape* tape = parts[0].tape;
  const Shape& first = parts[0].shape();
  if (first.empty()) throw ShapeError("concat_lastdim: scalar operand");
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape("concat_lastdim", parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw ShapeError("concat_lastdim: shape " + shape_to_string(s) + " incompatible with " +
                       shape_to_string(first));
    }
    widths.push_back(s.back());
    ids.push_back(p.id);
    total += s.back();
  }
  const std::size_t rows = shape_size(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.raw() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return tape->record(
      "concat_lastdim", Tensor::computed(shape, std::move(out)), ids,
      [widths, rows, total](std::span<const double> g, std::vector<std::span<double>>& gin) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (!gin[k].empty()) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < widths[k]; ++j) {
                gin[k][r * widths[k] + j] += g[r * total + off + j];
              }
            }
          }
          off += widths[k];
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (axis >= x.rank()) throw ShapeError("slice: axis out of range for " + shape_to_string(x.shape()));
  if (begin >= end || end > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of length " +
                     std::to_string(x.dim(axis)));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  const std::size_t len = end - begin;
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.raw() + (o * s.n + begin) * s.inner, len * s.inner, out.data() + o * len * s.inner);
  }
  Shape shape = x.shape();
  shape[axis] = len;
  return a.tape->record("slice", Tensor::computed(shape, std::move(out)), {a.id},
                        [s, begin, len](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (std::size_t o = 0; o < s.outer; ++o) {
                            const double* src = g.data() + o * len * s.inner;
                            double* dst = gin[0].data() + (o * s.n + begin) * s.inner;
                            for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
                          }
                        });
}

Var pad(Var a, std::size_t axis, std::size_t begin, std::size_t full) {
  const Tensor& x = a.value();
  if (axis >= x.rank()) throw ShapeError("pad: axis out of range for " + shape_to_string(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  if (begin + s.n > full) {
    throw ShapeError("pad: block of length " + std::to_string(s.n) + " at " + std::to_string(begin) +
                     " does not fit in " + std::to_string(full));
  }
  std::vector<double> out(s.outer * full * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.raw() + o * s.n * s.inner, s.n * s.inner, out.data() + (o * full + begin) * s.inner);
  }
  Shape shape = x.shape();
  shape[axis] = full;
  return a.tape->record("pad", Tensor::computed(shape, std::move(out)), {a.id},
                        [s, begin, full](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (std::size_t o = 0; o < s.outer; ++o) {
                            const double* src = g.data() + (o * full + begin) * s.inner;
                            double* dst = gin[0].data() + o * s.n * s.inner;
                            for (std::size_t i = 0; i < s.n * s.inner; ++i) dst[i] += src[i];
                          }
                        });
}

// ---- reductions -------------------------------------------------------------

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return a.tape->record("sum", Tensor::computed({}, {acc}), {a.id},
                        [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (double& v : gin[0]) v += g[0];
                        });
}

Var mean(Var a) {
  const Tensor& x = a.value();
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return a.tape->record("mean", Tensor::computed({}, {acc / n}), {a.id},
                        [n](std::span<const double> g, std::vector<std::span<double>>& gin) {
                          for (double& v : gin[0]) v += g[0] / n;
                        });
}

// ---- linear maps --------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_to_string(x.shape()) + " by " +
                     shape_to_string(y.shape()) + " (inner dimensions must agree)");
  }
  const auto m = static_cast<Eigen::Index>(x.dim(0));
  const auto k = static_cast<Eigen::Index>(x.dim(1));
  const auto n = static_cast<Eigen::Index>(y.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  Map(out.data(), m, n).noalias() = ConstMap(x.raw(), m, k) * ConstMap(y.raw(), k, n);
  return a.tape->record(
      "matmul", Tensor::computed({x.dim(0), y.dim(1)}, std::move(out)), {a.id, b.id},
      [x, y, m, k, n](std::span<const double> g, std::vector<std::span<double>>& gin) {
        ConstMap G(g.data(), m, n);
        if (!gin[0].empty()) Map(gin[0].data(), m, k).noalias() += G * ConstMap(y.raw(), k, n).transpose();
        if (!gin[1].empty()) Map(gin[1].data(), k, n).noalias() += ConstMap(x.raw(), m, k).transpose() * G;
      });
}

Var conv1x1_channels(Var x, Var weight, Var bias) {
  require_same_tape("conv1x1_channels", x, weight);
  require_same_tape("conv1x1_channels", x, bias);
  const Tensor xv = x.value();
  const Tensor wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.rank() < 1 || wv.rank() != 2 || bv.rank() != 1 || xv.shape().back() != wv.dim(0) ||
      bv.dim(0) != wv.dim(1)) {
    throw ShapeError("conv1x1_channels: input " + shape_to_string(xv.shape()) + ", weight " +
                     shape_to_string(wv.shape()) + ", bias " + shape_to_string(bv.shape()) +
                     " do not conform");
  }
  const auto cin = static_cast<Eigen::Index>(wv.dim(0));
  const auto cout = static_cast<Eigen::Index>(wv.dim(1));
  const auto rows = static_cast<Eigen::Index>(xv.size() / wv.dim(0));
  std::vector<double> out(static_cast<std::size_t>(rows * cout));
  Map O(out.data(), rows, cout);
  O.noalias() = ConstMap(xv.raw(), rows, cin) * ConstMap(wv.raw(), cin, cout);
  O.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.raw(), cout);
  Shape shape = xv.shape();
  shape.back() = wv.dim(1);
  return x.tape->record(
      "conv1x1_channels", Tensor::computed(shape, std::move(out)), {x.id, weight.id, bias.id},
      [xv, wv, rows, cin, cout](std::span<const double> g, std::vector<std::span<double>>& gin) {
        ConstMap G(g.data(), rows, cout);
        if (!gin[0].empty()) {
          Map(gin[0].data(), rows, cin).noalias() += G * ConstMap(wv.raw(), cin, cout).transpose();
        }
        if (!gin[1].empty()) {
          Map(gin[1].data(), cin, cout).noalias() += ConstMap(xv.raw(), rows, cin).transpose() * G;
        }
        if (!gin[2].empty()) {
          // reduced into aligned storage first: summed straight into the
          // heap buffer, the order depends on its address
          const Eigen::RowVectorXd db = G.colwise().sum();
          Eigen::Map<Eigen::RowVectorXd>(gin[2].data(), cout) += db;
        }
      });
}

Var spectral_mix(Var a, Var weight) {
  require_same_tape("spectral_mix", a, weight);
  const Tensor av = a.value();
  const Tensor wv = weight.value();
  const Shape& s = av.shape();
  if (s.size() < 3 || wv.rank() != 3 || wv.dim(0) != s.back()) {
    throw ShapeError("spectral_mix: coefficients " + shape_to_string(s) + " and weights " +
                     shape_to_string(wv.shape()) + " do not conform");
  }
  const std::size_t batch = s.front();
  const std::size_t cin = s.back();
  const std::size_t positions = av.size() / (batch * cin);
  const std::size_t cout = wv.dim(1);
  if (wv.dim(2) != positions) {
    throw ShapeError("spectral_mix: weights cover " + std::to_string(wv.dim(2)) +
                     " positions but coefficients have " + std::to_string(positions));
  }
  // w[i, o, p] at (i * cout + o) * positions + p
  std::vector<double> out(batch * positions * cout, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = 0; p < positions; ++p) {
      const double* ai = av.raw() + (b * positions + p) * cin;
      double* oo = out.data() + (b * positions + p) * cout;
      for (std::size_t i = 0; i < cin; ++i) {
        const double aval = ai[i];
        const double* wrow = wv.raw() + i * cout * positions + p;
        for (std::size_t o = 0; o < cout; ++o) oo[o] += aval * wrow[o * positions];
      }
    }
  }
  Shape shape = s;
  shape.back() = cout;
  return a.tape->record(
      "spectral_mix", Tensor::computed(shape, std::move(out)), {a.id, weight.id},
      [av, wv, batch, positions, cin, cout](std::span<const double> g,
                                            std::vector<std::span<double>>& gin) {
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t p = 0; p < positions; ++p) {
            const double* go = g.data() + (b * positions + p) * cout;
            const double* ai = av.raw() + (b * positions + p) * cin;
            for (std::size_t i = 0; i < cin; ++i) {
              const std::size_t wbase = i * cout * positions + p;
              if (!gin[0].empty()) {
                double acc = 0.0;
                for (std::size_t o = 0; o < cout; ++o) acc += go[o] * wv[wbase + o * positions];
                gin[0][(b * positions + p) * cin + i] += acc;
              }
              if (!gin[1].empty()) {
                for (std::size_t o = 0; o < cout; ++o) gin[1][wbase + o * positions] += ai[i] * go[o];
              }
            }
          }
        }
      });
}

Var dwt_hook(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims) {
  const Tensor& xv = x.value();
  const auto axes = spatial_axes(xv.shape(), spatial_dims, "dwt_hook");
  std::vector<double> out = xv.to_vector();
  wavelet::dwt_packed(out, xv.shape(), axes, filter, levels);
  const Shape shape = xv.shape();
  return x.tape->record("dwt_hook", Tensor::computed(shape, std::move(out)), {x.id},
                        [filter, levels, axes, shape](std::span<const double> g,
                                                      std::vector<std::span<double>>& gin) {
                          std::vector<double> back(g.begin(), g.end());
                          wavelet::idwt_packed(back, shape, axes, filter, levels);
                          for (std::size_t i = 0; i < back.size(); ++i) gin[0][i] += back[i];
                        });
}

Var idwt_hook(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims) {
  const Tensor& xv = x.value();
  const auto axes = spatial_axes(xv.shape(), spatial_dims, "idwt_hook");
  std::vector<double> out = xv.to_vector();
  wavelet::idwt_packed(out, xv.shape(), axes, filter, levels);
  const Shape shape = xv.shape();
  return x.tape->record("idwt_hook", Tensor::computed(shape, std::move(out)), {x.id},
                        [filter, levels, axes, shape](std::span<const double> g,
                                                      std::vector<std::span<double>>& gin) {
                          std::vector<double> back(g.begin(), g.end());
                          wavelet::dwt_packed(back, shape, axes, filter, levels);
                          for (std::size_t i = 0; i < back.size(); ++i) gin[0][i] += back[i];
                        });
}

Var wavelet_approx(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims) {
  const Tensor& xv = x.value();
  const auto axes = spatial_axes(xv.shape(), spatial_dims, "wavelet_approx");
  const Shape full = xv.shape();
  Shape coarse = full;
  std::vector<double> out = wavelet::approx_analysis(xv.data(), full, axes, filter, levels);
  for (std::size_t axis : axes) coarse[axis] >>= levels;
  return x.tape->record("wavelet_approx", Tensor::computed(coarse, std::move(out)), {x.id},
                        [filter, levels, axes, full](std::span<const double> g,
                                                     std::vector<std::span<double>>& gin) {
                          const auto back = wavelet::approx_synthesis(g, full, axes, filter, levels);
                          for (std::size_t i = 0; i < back.size(); ++i) gin[0][i] += back[i];
                        });
}

Var wavelet_expand(Var x, const wavelet::WaveletFilter& filter, int levels, std::size_t spatial_dims) {
  const Tensor& xv = x.value();
  const auto axes = spatial_axes(xv.shape(), spatial_dims, "wavelet_expand");
  if (levels < 1) throw ShapeError("wavelet_expand: levels must be at least 1");
  Shape full = xv.shape();
  for (std::size_t axis : axes) full[axis] <<= levels;
  std::vector<double> out = wavelet::approx_synthesis(xv.data(), full, axes, filter, levels);
  return x.tape->record("wavelet_expand", Tensor::computed(full, std::move(out)), {x.id},
                        [filter, levels, axes, full](std::span<const double> g,
                                                     std::vector<std::span<double>>& gin) {
                          const auto back = wavelet::approx_analysis(g, full, axes, filter, levels);
                          for (std::size_t i = 0; i < back.size(); ++i) gin[0][i] += back[i];
                        });
}

// ---- checking ------------------------------------------------------------------

namespace {

double evaluate_scalar(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  const Var root = fn(tape, tape.leaf(point));
  if (root.value().size() != 1) {
    throw ContractError("gradcheck: function returned shape " + shape_to_string(root.shape()) +
                        ", expected a scalar");
  }
  return root.value()[0];
}

}  // namespace

Tensor gradient(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  const Var x = tape.leaf(point);
  const Var root = fn(tape, x);
  if (root.value().size() != 1) {
    throw ContractError("gradient: function returned shape " + shape_to_string(root.shape()) +
                        ", expected a scalar");
  }
  auto adj = tape.backward(root, Tensor::computed(root.shape(), {1.0}));
  return adj[x.id];
}

double gradcheck(const ScalarFn& fn, const Tensor& point, double eps) {
  if (!(eps > 0.0)) throw ContractError("gradcheck: step must be positive");
  const Tensor analytic = gradient(fn, point);
  std::vector<double> probe = point.to_vector();
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = evaluate_scalar(fn, Tensor::computed(point.shape(), probe));
    probe[i] = orig - eps;
    const double down = evaluate_scalar(fn, Tensor::computed(point.shape(), probe));
    probe[i] = orig;
    const double fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace nogap::ad
