#include "nogap/gp.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "nogap/autodiff.hpp"
#include "nogap/errors.hpp"

namespace nogap::gp {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNegativeVarianceTolerance = 1e-10;

std::vector<std::size_t> grid_dims(std::size_t n_samples, const Shape& grid) {
  std::vector<std::size_t> dims{n_samples};
  dims.insert(dims.end(), grid.begin(), grid.end());
  return dims;
}

// v^T (A_0 (x) A_1 (x) ...) v
double quad_form(const Eigen::VectorXd& v, const std::vector<std::size_t>& dims,
                 const std::vector<Eigen::MatrixXd>& mats) {
  Eigen::VectorXd w = v;
  for (std::size_t i = 0; i < mats.size(); ++i) w = kron::mode_product(w, dims, i, mats[i]);
  return v.dot(w);
}

Tensor take_samples(const Tensor& t, std::size_t begin, std::size_t count) {
  const std::size_t per = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = count;
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(begin * per);
  return Tensor::computed(s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * per)));
}

std::size_t chunk_size(std::size_t chunk, std::size_t n) { return chunk == 0 || chunk > n ? n : chunk; }

void check_finite_mean(const double* h, std::size_t begin, std::size_t count, std::size_t per) {
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < per; ++i) {
      if (!std::isfinite(h[b * per + i])) {
        throw NumericError("mean function produced a non-finite value for sample " + std::to_string(begin + b),
                           begin + b);
      }
    }
  }
}

Tensor output_shaped(const Eigen::VectorXd& v, std::size_t n, const Shape& grid) {
  Shape s{n};
  s.insert(s.end(), grid.begin(), grid.end());
  s.push_back(1);
  return Tensor::computed(s, std::vector<double>(v.data(), v.data() + v.size()));
}

// Gradient of <seed, wno(inputs)> with respect to the flattened WNO parameters.
std::vector<double> mean_vjp(const wno::WnoParams& params, const wno::WnoConfig& config, const Tensor& inputs,
                             const Eigen::VectorXd& seed, std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  const std::size_t per = shape_size(config.grid);
  const std::size_t step = chunk_size(chunk, n);
  std::vector<double> grad;
  for (std::size_t begin = 0; begin < n; begin += step) {
    const std::size_t count = std::min(step, n - begin);
    ad::Tape tape;
    const wno::WnoVars vars = wno::bind(tape, params, true);
    const ad::Var out = wno::wno_forward(vars, config, tape.constant(take_samples(inputs, begin, count)));
    const Eigen::VectorXd part = seed.segment(static_cast<Eigen::Index>(begin * per), static_cast<Eigen::Index>(count * per));
    const auto adj = tape.backward(out, output_shaped(part, count, config.grid));
    std::size_t off = 0;
    for (const ad::Var& v : vars.all()) {
      const Tensor& g = adj[v.id];
      if (grad.size() < off + g.size()) grad.resize(off + g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) grad[off + i] += g[i];
      off += g.size();
    }
  }
  return grad;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Nogap:
      return "nogap";
    case Variant::WnoOnly:
      return "wno_only";
    case Variant::GpZeroMean:
      return "gp_zero_mean";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "nogap") return Variant::Nogap;
  if (text == "wno_only") return Variant::WnoOnly;
  if (text == "gp_zero_mean") return Variant::GpZeroMean;
  throw ConfigError("unknown variant '" + std::string(text) + "' (expected nogap, wno_only or gp_zero_mean)");
}

std::size_t packed_size(const NogapParams& p) { return p.wno.total_size() + 2 + p.kf.size() + 1; }

std::vector<double> pack(const NogapParams& p) {
  std::vector<double> flat = wno::flatten(p.wno);
  flat.push_back(p.kx.log_lengthscale);
  flat.push_back(p.kx.log_variance);
  for (const auto& k : p.kf) flat.push_back(k.log_lengthscale);
  flat.push_back(p.log_noise);
  return flat;
}

NogapParams unpack(const NogapParams& like, const wno::WnoConfig& config, std::span<const double> flat) {
  if (flat.size() != packed_size(like)) throw ShapeError("unpack: parameter vector has the wrong length");
  NogapParams p = like;
  const std::size_t nw = like.wno.total_size();
  p.wno = wno::unflatten(config, flat.subspan(0, nw));
  std::size_t off = nw;
  p.kx.log_lengthscale = flat[off++];
  p.kx.log_variance = flat[off++];
  for (auto& k : p.kf) k.log_lengthscale = flat[off++];
  p.log_noise = flat[off];
  return p;
}

Tensor model_inputs(const Tensor& fields, const std::vector<data::Normalizer>& norms) {
  const Shape& s = fields.shape();
  if (s.size() < 3) throw ShapeError("model_inputs: expected [N, grid..., fields], got " + shape_to_string(s));
  const std::size_t nf = s.back();
  if (norms.size() != nf) throw ShapeError("model_inputs: normalizer count does not match fields");
  const std::size_t sd = s.size() - 2;
  const Shape grid(s.begin() + 1, s.end() - 1);
  const std::size_t points = shape_size(grid);
  const std::size_t channels = nf + sd;
  std::vector<double> out(s[0] * points * channels);
  std::vector<std::size_t> idx(sd);
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t p = 0; p < points; ++p) {
      const double* src = fields.raw() + (b * points + p) * nf;
      double* dst = out.data() + (b * points + p) * channels;
      for (std::size_t f = 0; f < nf; ++f) dst[f] = norms[f].apply(src[f]);
      std::size_t rem = p;
      for (std::size_t d = sd; d-- > 0;) {
        idx[d] = rem % grid[d];
        rem /= grid[d];
      }
      for (std::size_t d = 0; d < sd; ++d) {
        dst[nf + d] = grid[d] > 1 ? static_cast<double>(idx[d]) / static_cast<double>(grid[d] - 1) : 0.0;
      }
    }
  }
  Shape shape = s;
  shape.back() = channels;
  return Tensor::computed(shape, std::move(out));
}

Eigen::MatrixXd input_features(const Tensor& inputs, std::size_t spatial_dim) {
  const Shape& s = inputs.shape();
  if (s.size() != spatial_dim + 2 || s.back() <= spatial_dim) {
    throw ShapeError("input_features: unexpected input shape " + shape_to_string(s));
  }
  const std::size_t channels = s.back();
  const std::size_t nf = channels - spatial_dim;
  const std::size_t points = inputs.size() / (s[0] * channels);
  const double scale = 1.0 / std::sqrt(static_cast<double>(points));
  Eigen::MatrixXd f(static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(points * nf));
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t p = 0; p < points; ++p) {
      for (std::size_t c = 0; c < nf; ++c) {
        f(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(p * nf + c)) =
            scale * inputs[(b * points + p) * channels + c];
      }
    }
  }
  return f;
}

GpData make_gp_data(const wno::WnoConfig& config, Tensor inputs, Eigen::VectorXd targets) {
  config.validate();
  const Shape& s = inputs.shape();
  if (s.size() != config.grid.size() + 2 || !std::equal(config.grid.begin(), config.grid.end(), s.begin() + 1) ||
      s.back() != config.in_channels) {
    throw ShapeError("make_gp_data: inputs " + shape_to_string(s) + " do not match the WNO config");
  }
  const std::size_t n = s[0];
  if (static_cast<std::size_t>(targets.size()) != n * shape_size(config.grid)) {
    throw ShapeError("make_gp_data: targets do not match inputs");
  }
  GpData d;
  d.wno = config;
  d.features = input_features(inputs, config.spatial_dim());
  d.distances = kernels::distance_matrix(d.features);
  d.inputs = std::move(inputs);
  d.targets = std::move(targets);
  return d;
}

GpData make_gp_data(const wno::WnoConfig& config, const data::Dataset& ds) {
  ds.validate();
  if (ds.grid != config.grid) {
    throw ShapeError("dataset grid " + shape_to_string(ds.grid) + " does not match model grid " +
                     shape_to_string(config.grid));
  }
  Eigen::VectorXd q(static_cast<Eigen::Index>(ds.outputs.size()));
  for (std::size_t i = 0; i < ds.outputs.size(); ++i) q(static_cast<Eigen::Index>(i)) = ds.output_norm.apply(ds.outputs[i]);
  return make_gp_data(config, model_inputs(ds.inputs, ds.input_norm), std::move(q));
}

std::vector<Eigen::MatrixXd> output_factors(const Shape& grid, const std::vector<kernels::KernelHyper>& kf) {
  if (kf.size() != grid.size()) throw ShapeError("output_factors: one kernel per grid axis required");
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    out.push_back(kernels::gram_from_distances(kernels::coordinate_distances(grid[a]), kf[a]));
  }
  return out;
}

kron::KronOperator covariance(const GpData& data, const NogapParams& p) {
  std::vector<Eigen::MatrixXd> factors{kernels::gram_from_distances(data.distances, p.kx)};
  for (auto& f : output_factors(data.wno.grid, p.kf)) factors.push_back(std::move(f));
  return kron::KronOperator(std::move(factors));
}

Eigen::VectorXd mean_function(const wno::WnoParams& params, const wno::WnoConfig& config, const Tensor& inputs,
                              std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  const std::size_t per = shape_size(config.grid);
  const std::size_t step = chunk_size(chunk, n);
  Eigen::VectorXd h(static_cast<Eigen::Index>(n * per));
  for (std::size_t begin = 0; begin < n; begin += step) {
    const std::size_t count = std::min(step, n - begin);
    const Tensor out = wno::wno_apply(params, config, take_samples(inputs, begin, count));
    check_finite_mean(out.raw(), begin, count, per);
    std::copy(out.raw(), out.raw() + out.size(), h.data() + begin * per);
  }
  return h;
}

NlmlResult nlml(const GpData& data, const NogapParams& p, const NlmlOptions& options) {
  const std::size_t n = data.n_samples();
  const std::size_t m = data.n_points();
  const bool one_tape = !options.zero_mean && options.want_grad && chunk_size(options.chunk, n) == n;

  // mean
  Eigen::VectorXd h;
  std::optional<ad::Tape> tape;
  std::optional<wno::WnoVars> vars;
  ad::Var out;
  if (options.zero_mean) {
    h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n * m));
  } else if (one_tape) {
    tape.emplace();
    vars = wno::bind(*tape, p.wno, true);
    out = wno::wno_forward(*vars, data.wno, tape->constant(data.inputs));
    check_finite_mean(out.value().raw(), 0, n, m);
    h = Eigen::Map<const Eigen::VectorXd>(out.value().raw(), static_cast<Eigen::Index>(n * m));
  } else {
    h = mean_function(p.wno, data.wno, data.inputs, options.chunk);
  }

  NlmlResult res;
  res.residual = data.targets - h;
  const double s2 = p.noise();
  const kron::KronOperator op = covariance(data, p);
  res.alpha = op.shifted_solve(s2, res.residual);
  const double nm = static_cast<double>(n * m);
  res.value = 0.5 * res.residual.dot(res.alpha) + 0.5 * op.logdet(s2) +
              0.5 * nm * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(res.value)) throw NumericError("nlml: objective is not finite");
  if (!options.want_grad) return res;

  // mean parameters: d/dh = -alpha
  const Eigen::VectorXd seed = -res.alpha;
  if (options.zero_mean) {
    res.grad.assign(p.wno.total_size(), 0.0);
  } else if (one_tape) {
    const auto adj = tape->backward(out, output_shaped(seed, n, data.wno.grid));
    for (const ad::Var& v : vars->all()) {
      const Tensor& g = adj[v.id];
      res.grad.insert(res.grad.end(), g.data().begin(), g.data().end());
    }
  } else {
    res.grad = mean_vjp(p.wno, data.wno, data.inputs, seed, options.chunk);
  }

  // kernel parameters: -1/2 a^T dK a + 1/2 tr((K + s2 I)^-1 dK)
  const auto dims = grid_dims(n, data.wno.grid);
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t i = 0; i < op.n_factors(); ++i) factors.push_back(op.factor(i));
  auto factor_grad = [&](std::size_t slot, const Eigen::MatrixXd& dk) {
    std::vector<Eigen::MatrixXd> mats = factors;
    mats[slot] = dk;
    return -0.5 * quad_form(res.alpha, dims, mats) + 0.5 * op.solve_trace(s2, slot, dk);
  };
  res.grad.push_back(factor_grad(0, kernels::gram_grad_lengthscale(data.distances, p.kx)));
  res.grad.push_back(factor_grad(0, factors[0]));
  for (std::size_t a = 0; a < p.kf.size(); ++a) {
    const Eigen::MatrixXd d = kernels::coordinate_distances(data.wno.grid[a]);
    res.grad.push_back(factor_grad(a + 1, kernels::gram_grad_lengthscale(d, p.kf[a])));
  }
  const double inv_trace = (op.eigen_grid().array() + s2).inverse().sum();
  res.grad.push_back(0.5 * s2 * (inv_trace - res.alpha.squaredNorm()));
  return res;
}

NogapParams initial_params(const TrainConfig& config) {
  config.wno.validate();
  NogapParams p;
  p.wno = config.variant == Variant::GpZeroMean ? wno::wno_zeros(config.wno) : wno::wno_init(config.wno, config.seed);
  p.kx = {config.order, std::log(config.init_lengthscale_x), std::log(config.init_variance)};
  for (std::size_t a = 0; a < config.wno.spatial_dim(); ++a) {
    p.kf.push_back({config.order, std::log(config.init_lengthscale_f), 0.0});
  }
  p.log_noise = std::log(std::max(config.init_noise, config.noise_floor));
  return p;
}

namespace {

struct Objective {
  double value;
  std::vector<double> grad;
};

Objective evaluate(const GpData& data, const NogapParams& p, Variant variant, std::size_t chunk, bool want_grad) {
  if (variant != Variant::WnoOnly) {
    NlmlOptions o;
    o.want_grad = want_grad;
    o.zero_mean = variant == Variant::GpZeroMean;
    o.chunk = chunk;
    NlmlResult r = nlml(data, p, o);
    return {r.value, std::move(r.grad)};
  }
  // mean squared error of the WNO alone
  const double nm = static_cast<double>(data.targets.size());
  const std::size_t n = data.n_samples(), m = data.n_points();
  if (want_grad && chunk_size(chunk, n) == n) {
    ad::Tape tape;
    const wno::WnoVars vars = wno::bind(tape, p.wno, true);
    const ad::Var out = wno::wno_forward(vars, data.wno, tape.constant(data.inputs));
    check_finite_mean(out.value().raw(), 0, n, m);
    const Eigen::VectorXd r =
        data.targets - Eigen::Map<const Eigen::VectorXd>(out.value().raw(), static_cast<Eigen::Index>(n * m));
    Objective obj{r.squaredNorm() / nm, {}};
    const auto adj = tape.backward(out, output_shaped((-2.0 / nm) * r, n, data.wno.grid));
    for (const ad::Var& v : vars.all()) obj.grad.insert(obj.grad.end(), adj[v.id].data().begin(), adj[v.id].data().end());
    obj.grad.resize(packed_size(p), 0.0);
    return obj;
  }
  const Eigen::VectorXd r = data.targets - mean_function(p.wno, data.wno, data.inputs, chunk);
  Objective obj{r.squaredNorm() / nm, {}};
  if (want_grad) {
    obj.grad = mean_vjp(p.wno, data.wno, data.inputs, (-2.0 / nm) * r, chunk);
    obj.grad.resize(packed_size(p), 0.0);
  }
  return obj;
}

LogEntry log_entry(std::size_t it, double value, const NogapParams& p) {
  LogEntry e;
  e.iteration = it;
  e.objective = value;
  e.noise_std = std::sqrt(p.noise());
  e.lengthscale_x = p.kx.lengthscale();
  e.variance_x = p.kx.variance();
  for (const auto& k : p.kf) e.lengthscale_f.push_back(k.lengthscale());
  return e;
}

}  // namespace

TrainedModel train(const GpData& data, const TrainConfig& config) {
  if (data.n_samples() < 2) throw ContractError("train: at least two training samples are required");
  if (!(config.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(config.noise_floor > 0.0)) throw ConfigError("train: noise floor must be positive");
  if (!(config.lr_gamma > 0.0 && config.lr_gamma <= 1.0)) throw ConfigError("train: lr_gamma must lie in (0, 1]");
  if (!(config.wno == data.wno)) throw ConfigError("train: WNO config differs from the data's");

  TrainedModel model;
  model.variant = config.variant;
  model.wno = config.wno;
  model.chunk = config.chunk;
  NogapParams params = initial_params(config);
  std::vector<double> theta = pack(params);
  const std::size_t nw = params.wno.total_size();
  const std::size_t noise_slot = theta.size() - 1;
  const double hyper_lr = config.hyper_learning_rate > 0.0 ? config.hyper_learning_rate : config.learning_rate;
  const double log_floor = std::log(config.noise_floor);

  std::vector<double> lr(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const bool is_wno = i < nw;
    const bool trains = config.variant == Variant::Nogap || (config.variant == Variant::WnoOnly && is_wno) ||
                        (config.variant == Variant::GpZeroMean && !is_wno);
    if (trains) lr[i] = is_wno ? config.learning_rate : hyper_lr;
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0);
  std::vector<double> best = theta;
  double best_value = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it <= config.iterations; ++it) {
    const bool last = it == config.iterations;
    Objective obj;
    try {
      obj = evaluate(data, params, config.variant, config.chunk, !last);
    } catch (const NumericError& e) {
      model.diverged = true;
      model.diagnostic = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    if (!std::isfinite(obj.value)) {
      model.diverged = true;
      model.diagnostic = "iteration " + std::to_string(it) + ": objective is not finite";
      break;
    }
    if (it == 0) model.initial_objective = obj.value;
    model.log.push_back(log_entry(it, obj.value, params));
    if (config.progress) config.progress(model.log.back());
    if (obj.value < best_value) {
      best_value = obj.value;
      best = theta;
    }
    if (last) break;

    const double t = static_cast<double>(it + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
    const double decay =
        config.lr_step == 0 ? 1.0 : std::pow(config.lr_gamma, static_cast<double>(it / config.lr_step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (lr[i] == 0.0) continue;
      const double g = obj.grad[i];
      m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * g;
      m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * g * g;
      theta[i] -= decay * lr[i] * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + kEps);
    }
    theta[noise_slot] = std::max(theta[noise_slot], log_floor);
    try {
      params = unpack(params, config.wno, theta);
    } catch (const DomainError& e) {
      model.diverged = true;
      model.diagnostic = "iteration " + std::to_string(it + 1) + ": " + e.what();
      break;
    }
  }
  if (model.log.empty()) throw NumericError("train: objective is not finite at initialization");

  model.best_objective = best_value;
  model.params = unpack(params, config.wno, best);
  finalize(model, data);
  return model;
}

TrainedModel train(const data::Dataset& ds, const TrainConfig& config) {
  TrainedModel model = train(make_gp_data(config.wno, ds), config);
  model.input_norm = ds.input_norm;
  model.output_norm = ds.output_norm;
  return model;
}

void finalize(TrainedModel& model, const GpData& data) {
  model.train_inputs = data.inputs;
  model.train_features = data.features;
  if (model.input_norm.empty()) {
    model.input_norm.assign(data.wno.in_channels - data.wno.spatial_dim(), data::Normalizer{});
  }
  if (model.variant == Variant::WnoOnly) {
    model.alpha.resize(0);
    model.kron.reset();
    return;
  }
  NlmlOptions o;
  o.want_grad = false;
  o.zero_mean = model.variant == Variant::GpZeroMean;
  o.chunk = model.chunk;
  model.alpha = nlml(data, model.params, o).alpha;
  model.kron.emplace(covariance(data, model.params));
}

Posterior predict(const TrainedModel& model, const Tensor& test_fields, bool include_noise) {
  const Shape& s = test_fields.shape();
  const Shape& grid = model.wno.grid;
  if (s.size() != grid.size() + 2 || !std::equal(grid.begin(), grid.end(), s.begin() + 1)) {
    throw ShapeError("predict: test fields " + shape_to_string(s) + " do not match the model grid " +
                     shape_to_string(grid));
  }
  const Tensor inputs = model_inputs(test_fields, model.input_norm);
  const Eigen::MatrixXd features = input_features(inputs, model.wno.spatial_dim());
  const Eigen::MatrixXd cross =
      kernels::gram_from_distances(kernels::cross_distance(model.train_features, features), model.params.kx);
  const Eigen::VectorXd self = Eigen::VectorXd::Constant(features.rows(), model.params.kx.variance());
  return predict_with_cross(model, inputs, cross, self, include_noise);
}

Posterior predict_with_cross(const TrainedModel& model, const Tensor& test_inputs, const Eigen::MatrixXd& cross,
                             const Eigen::VectorXd& self, bool include_noise) {
  const Shape& grid = model.wno.grid;
  const std::size_t t_count = test_inputs.dim(0);
  const std::size_t m = shape_size(grid);
  const std::size_t n = model.train_inputs.rank() == 0 ? 0 : model.train_inputs.dim(0);
  if (static_cast<std::size_t>(cross.cols()) != t_count || static_cast<std::size_t>(self.size()) != t_count) {
    throw ShapeError("predict: cross-covariance does not match the test batch");
  }

  Eigen::VectorXd mean = model.variant == Variant::GpZeroMean
                             ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t_count * m))
                             : mean_function(model.params.wno, model.wno, test_inputs, model.chunk);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t_count * m));

  if (model.variant != Variant::WnoOnly) {
    if (!model.kron) throw ContractError("predict: model has no covariance cache");
    if (static_cast<std::size_t>(cross.rows()) != n) throw ShapeError("predict: cross-covariance rows != N");
    const kron::KronOperator& op = *model.kron;
    const std::size_t nf = op.n_factors() - 1;
    std::vector<std::size_t> gdims(grid.begin(), grid.end());
    const double s2 = model.params.noise();

    // mean: h* + (k*^T (x) K_f) alpha
    Eigen::Map<const RowMajor> a(model.alpha.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const Eigen::MatrixXd proj = a.transpose() * cross;  // [M, T]

    // variance in the eigenbasis
    Eigen::VectorXd lam_f = Eigen::VectorXd::Ones(1);
    for (std::size_t i = 1; i <= nf; ++i) {
      const Eigen::VectorXd& l = op.eigenvalues(i);
      Eigen::VectorXd next(lam_f.size() * l.size());
      for (Eigen::Index j = 0; j < lam_f.size(); ++j) next.segment(j * l.size(), l.size()) = lam_f(j) * l;
      lam_f = std::move(next);
    }
    std::vector<Eigen::MatrixXd> sq;
    for (std::size_t i = 1; i <= nf; ++i) sq.push_back(op.eigenvectors(i).cwiseAbs2());
    const Eigen::VectorXd& lam_x = op.eigenvalues(0);
    const Eigen::MatrixXd c2 = (op.eigenvectors(0).transpose() * cross).cwiseAbs2();  // [N, T]
    double kf_diag = 1.0;
    for (const auto& k : model.params.kf) kf_diag *= k.variance();

    for (std::size_t t = 0; t < t_count; ++t) {
      Eigen::VectorXd kf_alpha = proj.col(static_cast<Eigen::Index>(t));
      for (std::size_t i = 0; i < nf; ++i) kf_alpha = kron::mode_product(kf_alpha, gdims, i, op.factor(i + 1));
      mean.segment(static_cast<Eigen::Index>(t * m), static_cast<Eigen::Index>(m)) += kf_alpha;

      Eigen::VectorXd w(static_cast<Eigen::Index>(m));
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        const double lf = lam_f(j);
        w(j) = lf * lf * (c2.col(static_cast<Eigen::Index>(t)).array() / (lam_x.array() * lf + s2)).sum();
      }
      for (std::size_t i = 0; i < nf; ++i) w = kron::mode_product(w, gdims, i, sq[i]);
      const double prior = self(static_cast<Eigen::Index>(t)) * kf_diag;
      for (std::size_t j = 0; j < m; ++j) {
        double v = prior - w(static_cast<Eigen::Index>(j));
        if (v < 0.0) {
          if (v < -kNegativeVarianceTolerance * std::max(1.0, prior)) {
            throw NumericError("predict: negative posterior variance " + std::to_string(v), t);
          }
          v = 0.0;
        }
        var(static_cast<Eigen::Index>(t * m + j)) = v + (include_noise ? s2 : 0.0);
      }
    }
  }

  Shape shape{t_count};
  shape.insert(shape.end(), grid.begin(), grid.end());
  std::vector<double> mu(t_count * m), sd(t_count * m);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = model.output_norm.invert(mean(static_cast<Eigen::Index>(i)));
    sd[i] = std::sqrt(var(static_cast<Eigen::Index>(i))) * model.output_norm.std;
  }
  Posterior post;
  post.mean = Tensor::computed(shape, std::move(mu));
  post.std = Tensor::computed(shape, std::move(sd));
  post.noise_included = include_noise && model.variant != Variant::WnoOnly;
  return post;
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

std::pair<Tensor, Tensor> ci_band(const Posterior& posterior, double level) {
  const double z = normal_quantile_two_sided(level);
  std::vector<double> lo(posterior.mean.size()), hi(posterior.mean.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    lo[i] = posterior.mean[i] - z * posterior.std[i];
    hi[i] = posterior.mean[i] + z * posterior.std[i];
  }
  return {Tensor::computed(posterior.mean.shape(), std::move(lo)),
          Tensor::computed(posterior.mean.shape(), std::move(hi))};
}

void write_model(const std::filesystem::path& path, const TrainedModel& model) {
  io::Container c;
  c.magic = std::string(io::kCheckpointMagic);
  c.set_meta("kind", "nogap_model");
  c.set_meta("variant", to_string(model.variant));
  c.set_meta("kernel.order", kernels::to_string(model.params.kx.order));
  c.set_meta("train_hash", model.train_hash);
  c.set_meta("chunk", std::to_string(model.chunk));
  c.set_meta("diverged", model.diverged ? "1" : "0");
  c.set_meta("diagnostic", model.diagnostic);
  wno::put_config(c, model.wno);
  if (model.variant != Variant::GpZeroMean) wno::put_params(c, model.params.wno);

  std::vector<double> hyper{model.params.kx.log_lengthscale, model.params.kx.log_variance};
  for (const auto& k : model.params.kf) {
    hyper.push_back(k.log_lengthscale);
    hyper.push_back(k.log_variance);
  }
  hyper.push_back(model.params.log_noise);
  c.add_tensor("gp/hyper", Tensor({hyper.size()}, hyper));
  c.add_tensor("gp/objective", Tensor({2}, {model.initial_objective, model.best_objective}));
  std::vector<double> in_norm;
  for (const auto& nrm : model.input_norm) {
    in_norm.push_back(nrm.mean);
    in_norm.push_back(nrm.std);
  }
  c.add_tensor("norm/input", Tensor({model.input_norm.size(), 2}, in_norm));
  c.add_tensor("norm/output", Tensor({2}, {model.output_norm.mean, model.output_norm.std}));
  c.add_tensor("gp/train_inputs", model.train_inputs);
  if (model.alpha.size() > 0) {
    c.add_tensor("gp/alpha", Tensor({static_cast<std::size_t>(model.alpha.size())},
                                    std::vector<double>(model.alpha.data(), model.alpha.data() + model.alpha.size())));
  }
  io::write_file(path, c);
}

TrainedModel read_model(const std::filesystem::path& path) {
  const io::Container c = io::read_file(path, io::kCheckpointMagic);
  if (c.meta("kind") != "nogap_model") throw FormatError("checkpoint is not a NOGaP model");
  TrainedModel model;
  try {
    model.variant = parse_variant(c.meta("variant"));
    model.wno = wno::get_config(c);
    model.params.wno =
        model.variant == Variant::GpZeroMean ? wno::wno_zeros(model.wno) : wno::get_params(c, model.wno);
    const auto order = kernels::parse_order(c.meta("kernel.order"));
    const std::size_t sd = model.wno.spatial_dim();
    const Tensor& hyper = c.tensor("gp/hyper");
    if (hyper.size() != 3 + 2 * sd) throw FormatError("checkpoint: malformed hyperparameters");
    model.params.kx = {order, hyper[0], hyper[1]};
    for (std::size_t a = 0; a < sd; ++a) model.params.kf.push_back({order, hyper[2 + 2 * a], hyper[3 + 2 * a]});
    model.params.log_noise = hyper[2 + 2 * sd];
    const Tensor& obj = c.tensor("gp/objective");
    model.initial_objective = obj[0];
    model.best_objective = obj[1];
    const Tensor& in_norm = c.tensor("norm/input");
    for (std::size_t f = 0; f < in_norm.dim(0); ++f) model.input_norm.push_back({in_norm[2 * f], in_norm[2 * f + 1]});
    const Tensor& out_norm = c.tensor("norm/output");
    model.output_norm = {out_norm[0], out_norm[1]};
    model.train_hash = c.meta("train_hash");
    model.chunk = std::stoul(c.meta("chunk"));
    model.diverged = c.meta("diverged") == "1";
    model.diagnostic = c.meta("diagnostic");
    model.train_inputs = c.tensor("gp/train_inputs");
    model.train_features = input_features(model.train_inputs, sd);
    if (model.variant != Variant::WnoOnly) {
      const Tensor& alpha = c.tensor("gp/alpha");
      model.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.raw(), static_cast<Eigen::Index>(alpha.size()));
      std::vector<Eigen::MatrixXd> factors{
          kernels::gram_from_distances(kernels::distance_matrix(model.train_features), model.params.kx)};
      for (auto& f : output_factors(model.wno.grid, model.params.kf)) factors.push_back(std::move(f));
      model.kron.emplace(std::move(factors));
      if (static_cast<std::size_t>(model.alpha.size()) != model.kron->dim()) {
        throw FormatError("checkpoint: alpha length does not match the training covariance");
      }
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: inconsistent contents: ") + e.what());
  }
  return model;
}

}  // namespace nogap::gp
