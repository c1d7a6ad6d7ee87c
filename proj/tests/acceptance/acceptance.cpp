// Acceptance checks. `acceptance` runs every criterion; `--criterion N` runs
// one. Each prints a single PASS/FAIL line; the exit code is nonzero if any
// selected criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "gp_oracle.hpp"
#include "nogap/autodiff.hpp"
#include "nogap/container.hpp"
#include "nogap/datagen.hpp"
#include "nogap/experiment.hpp"
#include "nogap/gp.hpp"
#include "nogap/kron.hpp"
#include "nogap/metrics.hpp"
#include "nogap/wavelet.hpp"
#include "nogap/wno.hpp"
#include "test_support.hpp"

using namespace nogap;
using nogap::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: wavelet round trip -------------------------------------------------

Outcome wavelet_round_trip() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  std::size_t cases = 0;
  const std::vector<Shape> shapes = {{32}, {64}, {128}, {32, 32}};
  for (const char* name : {"db4", "db6", "db8"}) {
    const auto filter = wavelet::filter_coeffs(name);
    for (const Shape& s : shapes) {
      for (int levels = 1; levels <= 4; ++levels) {
        for (int trial = 0; trial < 100; ++trial) {
          const Tensor x = random_tensor(s, rng);
          const Tensor back = wavelet::idwt(wavelet::dwt(x, filter, levels), filter);
          worst = std::max(worst, max_abs_diff(back, x));
          ++cases;
        }
      }
    }
  }
  return {worst < 1e-10, std::to_string(cases) + " transforms, max |idwt(dwt(x)) - x| = " + fmt(worst)};
}

// --- 2: gradcheck of a tiny WNO with squared loss --------------------------

wno::WnoConfig tiny_wno(Shape grid, std::size_t width) {
  wno::WnoConfig c;
  c.lift_width = width;
  c.proj_width = width;
  c.n_blocks = 2;
  c.levels = 1;
  c.wavelet = "db4";
  c.in_channels = 1 + grid.size();
  c.grid = std::move(grid);
  return c;
}

Outcome wno_gradcheck() {
  std::mt19937_64 rng(2);
  const wno::WnoConfig c = tiny_wno({16}, 4);
  const Tensor in = wno::with_coordinates(random_tensor({3, 16}, rng), 1);
  const Tensor target = random_tensor({3, 16, 1}, rng);
  wno::WnoParams start = wno::wno_zeros(c);
  for (auto& t : start.tensors) t = random_tensor(t.shape(), rng, 0.4);
  const std::vector<double> theta = wno::flatten(start);
  const auto specs = wno::param_specs(c);
  const ad::ScalarFn loss = [&](ad::Tape& tape, ad::Var flat) {
    std::vector<ad::Var> parts;
    std::size_t off = 0;
    for (const auto& spec : specs) {
      const std::size_t n = shape_size(spec.shape);
      parts.push_back(ad::reshape(ad::slice(flat, 0, off, off + n), spec.shape));
      off += n;
    }
    wno::WnoVars v;
    v.lift_weight = parts[0];
    v.lift_bias = parts[1];
    for (std::size_t j = 0; j < c.n_blocks; ++j) v.blocks.push_back({parts[2 + 3 * j], parts[3 + 3 * j], parts[4 + 3 * j]});
    const std::size_t n = parts.size();
    v.proj1_weight = parts[n - 4];
    v.proj1_bias = parts[n - 3];
    v.proj2_weight = parts[n - 2];
    v.proj2_bias = parts[n - 1];
    const ad::Var d = ad::sub(wno::wno_forward(v, c, tape.constant(in)), tape.constant(target));
    return ad::sum(ad::mul(d, d));
  };
  const double err = ad::gradcheck(loss, Tensor({theta.size()}, theta));
  return {err < 1e-5, std::to_string(theta.size()) + " parameters, max relative error " + fmt(err)};
}

// --- 3 and 4: GP algebra against dense formulas ---------------------------

gp::GpData random_gp_data(const wno::WnoConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Shape fields{n};
  fields.insert(fields.end(), c.grid.begin(), c.grid.end());
  fields.push_back(1);
  const Tensor inputs = gp::model_inputs(random_tensor(fields, rng), {data::Normalizer{}});
  std::normal_distribution<double> g;
  Eigen::VectorXd q(static_cast<Eigen::Index>(n * shape_size(c.grid)));
  for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = g(rng);
  return gp::make_gp_data(c, inputs, q);
}

gp::NogapParams random_gp_params(const wno::WnoConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  gp::NogapParams p;
  p.wno = wno::wno_zeros(c);
  for (auto& t : p.wno.tensors) t = random_tensor(t.shape(), rng, 0.3);
  std::uniform_real_distribution<double> u(-0.7, 0.3);
  p.kx = {kernels::MaternOrder::FiveHalves, u(rng), u(rng)};
  for (std::size_t a = 0; a < c.spatial_dim(); ++a) p.kf.push_back({kernels::MaternOrder::FiveHalves, u(rng) - 1.0, 0.0});
  p.log_noise = std::log(0.05);
  return p;
}

gp::TrainedModel model_from(const gp::GpData& d, const gp::NogapParams& p, gp::Variant v = gp::Variant::Nogap) {
  gp::TrainedModel m;
  m.variant = v;
  m.wno = d.wno;
  m.params = p;
  gp::finalize(m, d);
  return m;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

Outcome dense_equivalence() {
  double worst_kron = 0.0, worst_nlml = 0.0, worst_pred = 0.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  auto spd = [&](Eigen::Index n) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
    return Eigen::MatrixXd(0.5 * (s + s.transpose()));
  };
  auto vec = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
  };
  const std::vector<std::vector<Eigen::Index>> layouts = {{7}, {2, 3}, {3, 3}, {2, 3, 5}, {5, 6}, {2, 2, 7}, {30}, {4, 7}};
  for (int rep = 0; rep < 5; ++rep) {
    for (const auto& dims : layouts) {
      std::vector<Eigen::MatrixXd> f;
      for (Eigen::Index n : dims) f.push_back(spd(n));
      const kron::KronOperator op(f);
      const auto n = static_cast<Eigen::Index>(op.dim());
      const double s2 = 0.01 + 0.2 * rep;
      const Eigen::MatrixXd k = kron::dense_kron(f);
      const Eigen::MatrixXd shifted = k + s2 * Eigen::MatrixXd::Identity(n, n);
      const Eigen::VectorXd v = vec(n);
      worst_kron = std::max(worst_kron, rel(op.matvec(v), k * v));
      worst_kron = std::max(worst_kron, rel(op.shifted_solve(s2, v), shifted.ldlt().solve(v)));
      const double ld = 2.0 * shifted.llt().matrixL().toDenseMatrix().diagonal().array().log().sum();
      worst_kron = std::max(worst_kron, std::abs(op.logdet(s2) - ld) / std::max(1.0, std::abs(ld)));
      const Eigen::MatrixXd inv = shifted.inverse();
      for (std::size_t i = 0; i < f.size(); ++i) {
        std::vector<Eigen::MatrixXd> gf = f;
        gf[i] = spd(f[i].rows());
        const double oracle = (inv * kron::dense_kron(gf)).trace();
        worst_kron = std::max(worst_kron, std::abs(op.solve_trace(s2, i, gf[i]) - oracle) / std::max(1.0, std::abs(oracle)));
      }
    }
  }
  // nlml and predict: total dimension N * M <= 30
  const std::vector<std::pair<Shape, std::size_t>> cases = {{{8}, 3}, {{4, 4}, 1}, {{6}, 5}, {{2, 4}, 3}, {{10}, 3}};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (const auto& [grid, n] : cases) {
      const auto c = tiny_wno(grid, 4);
      const gp::GpData d = random_gp_data(c, n, 100 + seed);
      const gp::NogapParams p = random_gp_params(c, 200 + seed);
      const Eigen::VectorXd h = gp::mean_function(p.wno, c, d.inputs);
      const double oracle = testing::dense_nlml(testing::dense_covariance(d.features, grid, p), p.noise(), d.targets - h);
      const double got = gp::nlml(d, p, {false, false, 0}).value;
      worst_nlml = std::max(worst_nlml, std::abs(got - oracle) / std::abs(oracle));

      const gp::TrainedModel m = model_from(d, p);
      std::mt19937_64 trng(300 + seed);
      Shape fields{2};
      fields.insert(fields.end(), grid.begin(), grid.end());
      fields.push_back(1);
      const Tensor test = random_tensor(fields, trng);
      const gp::Posterior post = gp::predict(m, test);
      const Tensor test_in = gp::model_inputs(test, m.input_norm);
      const auto o = testing::dense_predict(d.features, gp::input_features(test_in, c.spatial_dim()), grid, p, d.targets,
                                            h, gp::mean_function(p.wno, c, test_in));
      Eigen::VectorXd mean(o.mean.size()), var(o.var.size());
      for (Eigen::Index i = 0; i < mean.size(); ++i) {
        mean(i) = post.mean[static_cast<std::size_t>(i)];
        var(i) = post.std[static_cast<std::size_t>(i)] * post.std[static_cast<std::size_t>(i)];
      }
      worst_pred = std::max({worst_pred, rel(mean, o.mean), rel(var, o.var)});
    }
  }
  const double worst = std::max({worst_kron, worst_nlml, worst_pred});
  return {worst < 1e-8, "kron ops " + fmt(worst_kron) + ", nlml " + fmt(worst_nlml) + ", predict " + fmt(worst_pred)};
}

Outcome nlml_gradient() {
  const auto c = tiny_wno({8}, 4);
  const gp::GpData d = random_gp_data(c, 6, 4);
  const gp::NogapParams p = random_gp_params(c, 5);
  const gp::NlmlResult r = gp::nlml(d, p);
  const std::vector<double> theta = gp::pack(p);
  if (r.grad.size() != theta.size()) return {false, "gradient has the wrong length"};
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> up = theta, dn = theta;
    up[i] += eps;
    dn[i] -= eps;
    const double num = (gp::nlml(d, gp::unpack(p, c, up), {false, false, 0}).value -
                        gp::nlml(d, gp::unpack(p, c, dn), {false, false, 0}).value) /
                       (2.0 * eps);
    worst = std::max(worst, std::abs(r.grad[i] - num) / std::max(std::abs(num), 1e-2));
  }
  return {worst < 1e-4, std::to_string(theta.size()) + " components (WNO, log h, log var, log noise), max relative error " +
                            fmt(worst)};
}

// --- 5: interpolation with the noise at its floor --------------------------

Outcome noiseless_interpolation() {
  exp::ExperimentConfig cfg = exp::preset(datagen::Problem::Advection);
  cfg.n_train = 30;
  cfg.n_test = 1;
  cfg.iterations = 0;
  cfg.lift_width = 8;
  cfg.proj_width = 8;
  const auto pair = exp::generate_datasets(cfg);
  auto tc = cfg.train_config();
  gp::TrainedModel m = gp::train(pair.train, tc);
  const gp::GpData gd = gp::make_gp_data(m.wno, pair.train);
  // Interpolation needs K well conditioned against the floor: lengthscales at
  // the grid step and at the closest pair of training inputs.
  double closest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < gd.distances.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < gd.distances.cols(); ++j) closest = std::min(closest, gd.distances(i, j));
  }
  m.params.kx.log_lengthscale = std::log(closest);
  for (auto& k : m.params.kf) k.log_lengthscale = std::log(1.0 / static_cast<double>(cfg.resolution - 1));
  m.params.log_noise = std::log(tc.noise_floor);
  gp::finalize(m, gd);
  const gp::Posterior post = gp::predict(m, pair.train.inputs);
  const double err = metrics::relative_error(post.mean.data(), pair.train.outputs.data()) / 100.0;
  const double prior_std = std::sqrt(m.params.kx.variance()) * m.output_norm.std;
  double worst_std = 0.0;
  for (double s : post.std.data()) worst_std = std::max(worst_std, s / prior_std);
  return {err < 1e-3 && worst_std < 1e-2,
          "noise variance " + fmt(m.params.noise()) + ": relative error " + fmt(err) + ", max std / prior std " + fmt(worst_std)};
}

// --- 6 to 9: desk-scale experiments ---------------------------------------

struct VariantRun {
  metrics::EvalReport report;
  double seconds = 0.0;
};

VariantRun run(exp::ExperimentConfig cfg, gp::Variant v, const exp::DatasetPair& data) {
  cfg.variant = v;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = exp::run_variant(cfg, data.train, data.test);
  const double s = seconds_since(t0);
  std::cerr << "  " << gp::to_string(v) << ": error " << r.report.mean_error << "% (std " << r.report.std_error
            << "), mean predictive std " << r.report.mean_pred_std << ", coverage " << r.report.coverage95 << ", " << s
            << " s\n";
  return {r.report, s};
}

std::string err_str(const VariantRun& r) { return fmt(r.report.mean_error, 7) + "%"; }

Outcome advection_desk() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = exp::preset(datagen::Problem::Advection);
  const auto data = exp::generate_datasets(cfg);
  const auto nogap = run(cfg, gp::Variant::Nogap, data);
  const auto gp0 = run(cfg, gp::Variant::GpZeroMean, data);
  const double s = seconds_since(t0);
  const bool ok = nogap.report.mean_error < 5.0 && nogap.report.mean_error < gp0.report.mean_error && s < 15 * 60;
  return {ok, "N=" + std::to_string(cfg.n_train) + "/" + std::to_string(cfg.n_test) + " res " +
                  std::to_string(cfg.resolution) + ": nogap " + err_str(nogap) + " (< 5%), gp_zero_mean " + err_str(gp0) +
                  ", " + fmt(s, 3) + " s"};
}

Outcome poisson_desk() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = exp::preset(datagen::Problem::Poisson);
  const auto data = exp::generate_datasets(cfg);
  const auto nogap = run(cfg, gp::Variant::Nogap, data);
  const auto gp0 = run(cfg, gp::Variant::GpZeroMean, data);
  const auto wno = run(cfg, gp::Variant::WnoOnly, data);
  const double s = seconds_since(t0);
  const bool ok = nogap.report.mean_error < gp0.report.mean_error && nogap.report.mean_error < wno.report.mean_error &&
                  s < 30 * 60;
  return {ok, "N=" + std::to_string(cfg.n_train) + "/" + std::to_string(cfg.n_test) + " " + std::to_string(cfg.resolution) +
                  "x" + std::to_string(cfg.resolution) + ": nogap " + err_str(nogap) + ", gp_zero_mean " + err_str(gp0) +
                  ", wno_only " + err_str(wno) + ", " + fmt(s, 3) + " s"};
}

// u = -2 nu phi_x / phi, phi the heat-equation solution with
// phi(x, 0) = exp(z cos(2 pi x) - z), z = 1 / (4 pi nu); cosine coefficients
// 2 e^-z I_k(z).
std::vector<double> cole_hopf_sine(std::size_t n, double nu, double t) {
  constexpr double pi = std::numbers::pi;
  const double z = 1.0 / (4.0 * pi * nu);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n);
    double phi = std::exp(-z) * std::cyl_bessel_i(0.0, z), dphi = 0.0;
    for (int k = 1; k <= 60; ++k) {
      const double w = 2.0 * pi * k;
      const double c = 2.0 * std::exp(-z) * std::cyl_bessel_i(static_cast<double>(k), z) * std::exp(-nu * w * w * t);
      phi += c * std::cos(w * x);
      dphi -= c * w * std::sin(w * x);
    }
    u[i] = -2.0 * nu * dphi / phi;
  }
  return u;
}

Outcome burgers_desk() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = exp::preset(datagen::Problem::Burgers);
  const std::size_t n = cfg.solve_resolution;
  std::vector<double> u0(n);
  for (std::size_t i = 0; i < n; ++i) u0[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  const auto u = datagen::burgers_solve(u0, cfg.nu, 1.0);
  const double oracle_err = metrics::relative_error(u, cole_hopf_sine(n, cfg.nu, 1.0)) / 100.0;

  const auto data = exp::generate_datasets(cfg);
  const auto nogap = run(cfg, gp::Variant::Nogap, data);
  const auto gp0 = run(cfg, gp::Variant::GpZeroMean, data);
  const double s = seconds_since(t0);
  const bool ok = nogap.report.mean_error < gp0.report.mean_error && oracle_err < 1e-6 && s < 30 * 60;
  return {ok, "Cole-Hopf rel. L2 " + fmt(oracle_err) + " (n=" + std::to_string(n) + "); N=" + std::to_string(cfg.n_train) +
                  "/" + std::to_string(cfg.n_test) + " res " + std::to_string(cfg.resolution) + ": nogap " + err_str(nogap) +
                  ", gp_zero_mean " + err_str(gp0) + ", " + fmt(s, 3) + " s"};
}

Outcome uncertainty_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes = {100, 200, 400};
  const std::size_t seeds = 5;
  exp::ExperimentConfig base = exp::preset(datagen::Problem::Advection);
  base.n_train = 2;  // only the test split of this pair is used
  base.seed = 1000;
  // one test set for every run
  const data::Dataset fixed_test = exp::generate_datasets(base).test;
  std::vector<double> avg;
  std::string detail;
  for (std::size_t n : sizes) {
    std::vector<double> stds;
    for (std::size_t s = 0; s < seeds; ++s) {
      exp::ExperimentConfig cfg = base;
      cfg.n_train = n;
      cfg.seed = s;
      auto pair = exp::generate_datasets(cfg);
      data::Dataset test = fixed_test;
      test.input_norm = pair.train.input_norm;
      test.output_norm = pair.train.output_norm;
      stds.push_back(run(cfg, gp::Variant::Nogap, {pair.train, test}).report.mean_pred_std);
    }
    avg.push_back(metrics::summarize(stds).mean);
    detail += "N=" + std::to_string(n) + ": " + fmt(avg.back()) + "  ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < avg.size(); ++i) monotone = monotone && avg[i] <= avg[i - 1];
  const double s = seconds_since(t0);
  return {monotone && s < 45 * 60, "mean predictive std over " + std::to_string(seeds) + " seeds, " + detail + fmt(s, 3) + " s"};
}

// --- 10: calibration on data drawn from the model itself -------------------

Outcome calibration() {
  const auto c = tiny_wno({16}, 4);
  const std::size_t n = 40, t = 25, draws = 30;
  std::size_t inside = 0, total = 0;
  for (std::size_t draw = 0; draw < draws; ++draw) {
    std::mt19937_64 rng(5000 + draw);
    const gp::GpData all = random_gp_data(c, n + t, 6000 + draw);
    gp::NogapParams p;
    p.wno = wno::wno_zeros(c);
    for (auto& w : p.wno.tensors) w = random_tensor(w.shape(), rng, 0.3);
    p.kx = {kernels::MaternOrder::FiveHalves, std::log(2.0), std::log(0.5)};
    p.kf = {{kernels::MaternOrder::FiveHalves, std::log(0.2), 0.0}};
    p.log_noise = std::log(0.01);
    const std::size_t m = 16, cin = c.in_channels;
    const auto nm = static_cast<Eigen::Index>((n + t) * m);
    // y = WNO mean + GP draw + noise, jointly over train and test
    const Eigen::MatrixXd k = testing::dense_covariance(all.features, c.grid, p) +
                              p.noise() * Eigen::MatrixXd::Identity(nm, nm);
    const Eigen::MatrixXd l = k.llt().matrixL();
    std::normal_distribution<double> g;
    Eigen::VectorXd z(nm);
    for (Eigen::Index i = 0; i < nm; ++i) z(i) = g(rng);
    const Eigen::VectorXd y = gp::mean_function(p.wno, c, all.inputs) + l * z;

    const double* raw = all.inputs.raw();
    const Tensor train_in = Tensor::computed({n, m, cin}, std::vector<double>(raw, raw + n * m * cin));
    const Tensor test_in = Tensor::computed({t, m, cin}, std::vector<double>(raw + n * m * cin, raw + (n + t) * m * cin));
    const gp::GpData d = gp::make_gp_data(c, train_in, y.head(static_cast<Eigen::Index>(n * m)));
    const gp::TrainedModel model = model_from(d, p);
    const Eigen::MatrixXd test_f = gp::input_features(test_in, 1);
    const Eigen::MatrixXd cross = kernels::gram_from_distances(kernels::cross_distance(d.features, test_f), p.kx);
    const gp::Posterior post =
        gp::predict_with_cross(model, test_in, cross, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(t), p.kx.variance()), true);
    const auto [lo, hi] = gp::ci_band(post, 0.95);
    for (std::size_t i = 0; i < t * m; ++i) {
      const double v = y(static_cast<Eigen::Index>(n * m + i));
      inside += (v >= lo[i] && v <= hi[i]) ? 1 : 0;
      ++total;
    }
  }
  const double cov = static_cast<double>(inside) / static_cast<double>(total);
  return {total >= 10000 && cov >= 0.92 && cov <= 0.98,
          "95% band coverage " + fmt(cov) + " over " + std::to_string(total) + " pooled test points"};
}

// --- 11: reproducibility ---------------------------------------------------

Outcome reproducibility() {
  namespace fs = std::filesystem;
  exp::ExperimentConfig cfg = exp::preset(datagen::Problem::Advection);
  cfg.n_train = 40;
  cfg.n_test = 10;
  cfg.iterations = 60;
  cfg.seed = 11;
  const fs::path dir = fs::temp_directory_path() / "nogap_acceptance_repro";
  fs::remove_all(dir);
  std::vector<std::string> hashes;
  std::vector<double> nlml;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path sub = dir / std::to_string(rep);
    fs::create_directories(sub);
    const auto pair = exp::generate_datasets(cfg);
    data::dataset_write(pair.train, sub / "train.ngpd");
    data::dataset_write(pair.test, sub / "test.ngpd");
    hashes.push_back(io::file_content_hash(sub / "train.ngpd") + "/" + io::file_content_hash(sub / "test.ngpd"));
    const auto reread = data::dataset_read(sub / "train.ngpd");
    const gp::TrainedModel m = gp::train(reread, cfg.train_config());
    const gp::GpData gd = gp::make_gp_data(m.wno, reread);
    nlml.push_back(gp::nlml(gd, m.params, {false, false, 0}).value);
  }
  fs::remove_all(dir);
  const double diff = std::abs(nlml[0] - nlml[1]);
  return {hashes[0] == hashes[1] && diff <= 1e-10,
          "dataset hashes " + std::string(hashes[0] == hashes[1] ? "identical" : "differ") + " (" + hashes[0].substr(0, 12) +
              "...), final NLML " + fmt(nlml[0], 12) + " vs " + fmt(nlml[1], 12) + " (|diff| " + fmt(diff) + ")"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> fn;
  double budget_seconds;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  exp::tune_allocator();

  const std::vector<Criterion> all = {
      {1, "wavelet round trip", wavelet_round_trip, 5},
      {2, "WNO gradcheck", wno_gradcheck, 60},
      {3, "dense-oracle equivalence", dense_equivalence, 10},
      {4, "NLML gradient", nlml_gradient, 0},
      {5, "noiseless interpolation", noiseless_interpolation, 0},
      {6, "desk advection", advection_desk, 0},
      {7, "desk Poisson", poisson_desk, 0},
      {8, "desk Burgers", burgers_desk, 0},
      {9, "uncertainty shrinkage", uncertainty_sweep, 0},
      {10, "calibration", calibration, 0},
      {11, "reproducibility", reproducibility, 0},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (c.budget_seconds > 0 && s >= c.budget_seconds) {
      o.pass = false;
      o.detail += "; runtime " + fmt(s, 3) + " s over the " + fmt(c.budget_seconds) + " s budget";
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << " ("
              << fmt(s, 3) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
