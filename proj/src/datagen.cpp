#include "nogap/datagen.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "nogap/errors.hpp"

namespace nogap::datagen {

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 rng_for(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

double grf_mode_std(std::size_t k) {
  const double w = 2.0 * kPi * static_cast<double>(k);
  return 25.0 / (w * w + 25.0);
}

std::size_t grf_modes(std::size_t resolution, std::size_t max_mode) {
  if (resolution < 4 || resolution % 2 != 0) throw DomainError("grf: resolution must be even and >= 4");
  const std::size_t top = resolution / 2 - 1;
  if (max_mode > top) throw DomainError("grf: max_mode above resolution / 2 - 1");
  return max_mode == 0 ? top : max_mode;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Spectral state of the Burgers solver with reusable plans.
class BurgersStepper {
 public:
  BurgersStepper(std::size_t n, double nu, double dt)
      : n_(n),
        modes_(n / 2 + 1),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * modes_))) {
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.get(), spec_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_.get(), real_.get(), FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw NumericError("burgers: FFT plan creation failed");
    half_.resize(modes_);
    full_.resize(modes_);
    ik_.resize(modes_);
    keep_.resize(modes_);
    for (std::size_t k = 0; k < modes_; ++k) {
      const double kappa = 2.0 * kPi * static_cast<double>(k);
      half_[k] = std::exp(-nu * kappa * kappa * dt / 2.0);
      full_[k] = half_[k] * half_[k];
      ik_[k] = {0.0, kappa};
      keep_[k] = 3 * k < n ? 1.0 : 0.0;
    }
  }
  ~BurgersStepper() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  BurgersStepper(const BurgersStepper&) = delete;
  BurgersStepper& operator=(const BurgersStepper&) = delete;

  using Spectrum = std::vector<std::complex<double>>;

  Spectrum analyze(std::span<const double> u) {
    std::copy(u.begin(), u.end(), real_.get());
    fftw_execute(forward_);
    Spectrum s(modes_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t k = 0; k < modes_; ++k) s[k] = {spec_.get()[k][0] * scale, spec_.get()[k][1] * scale};
    return s;
  }

  std::vector<double> synthesize(const Spectrum& s) {
    load(s, nullptr);
    fftw_execute(backward_);
    return {real_.get(), real_.get() + n_};
  }

  // -0.5 d/dx (u^2), dealiased.
  void nonlinear(const Spectrum& s, Spectrum& out) {
    load(s, keep_.data());
    fftw_execute(backward_);
    double* u = real_.get();
    for (std::size_t i = 0; i < n_; ++i) u[i] *= u[i];
    fftw_execute(forward_);
    const double scale = -0.5 / static_cast<double>(n_);
    for (std::size_t k = 0; k < modes_; ++k) {
      const std::complex<double> w{spec_.get()[k][0], spec_.get()[k][1]};
      out[k] = keep_[k] * scale * ik_[k] * w;
    }
  }

  // Lawson RK4 step on the integrating-factor variable.
  void step(Spectrum& s, double dt) {
    nonlinear(s, k1_);
    tmp_.resize(modes_);
    for (std::size_t k = 0; k < modes_; ++k) tmp_[k] = half_[k] * (s[k] + 0.5 * dt * k1_[k]);
    nonlinear(tmp_, k2_);
    for (std::size_t k = 0; k < modes_; ++k) tmp_[k] = half_[k] * s[k] + 0.5 * dt * k2_[k];
    nonlinear(tmp_, k3_);
    for (std::size_t k = 0; k < modes_; ++k) tmp_[k] = full_[k] * s[k] + dt * half_[k] * k3_[k];
    nonlinear(tmp_, k4_);
    for (std::size_t k = 0; k < modes_; ++k) {
      s[k] = full_[k] * s[k] +
             dt / 6.0 * (full_[k] * k1_[k] + 2.0 * half_[k] * (k2_[k] + k3_[k]) + k4_[k]);
    }
  }

  std::size_t modes() const { return modes_; }

 private:
  void load(const Spectrum& s, const double* mask) {
    for (std::size_t k = 0; k < modes_; ++k) {
      const double m = mask ? mask[k] : 1.0;
      spec_.get()[k][0] = m * s[k].real();
      spec_.get()[k][1] = m * s[k].imag();
    }
  }

  std::size_t n_, modes_;
  std::unique_ptr<double, FftwFree> real_;
  std::unique_ptr<fftw_complex, FftwFree> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<double> half_, full_, keep_;
  std::vector<std::complex<double>> ik_;
  Spectrum k1_ = Spectrum(modes_), k2_ = Spectrum(modes_), k3_ = Spectrum(modes_), k4_ = Spectrum(modes_), tmp_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Tensor grf_sample(std::uint64_t seed, std::size_t n, std::size_t resolution, std::size_t max_mode) {
  const std::size_t modes = grf_modes(resolution, max_mode);
  std::vector<double> out(n * resolution, 0.0);
  std::normal_distribution<double> normal;
  auto rng = rng_for(seed);
  for (std::size_t s = 0; s < n; ++s) {
    double* u = out.data() + s * resolution;
    for (std::size_t k = 1; k <= modes; ++k) {
      const double a = normal(rng), b = normal(rng);
      const double amp = std::sqrt(2.0) * grf_mode_std(k);
      for (std::size_t i = 0; i < resolution; ++i) {
        const double phase = 2.0 * kPi * static_cast<double>(k * i % resolution) / static_cast<double>(resolution);
        u[i] += amp * (a * std::cos(phase) + b * std::sin(phase));
      }
    }
  }
  return Tensor({n, resolution}, std::move(out));
}

double grf_point_variance(std::size_t resolution, std::size_t max_mode) {
  const std::size_t modes = grf_modes(resolution, max_mode);
  double v = 0.0;
  for (std::size_t k = 1; k <= modes; ++k) v += 2.0 * grf_mode_std(k) * grf_mode_std(k);
  return v;
}

std::vector<double> burgers_solve(std::span<const double> u0, double nu, double t_end) {
  const std::size_t n = u0.size();
  if (n < 4 || n % 2 != 0) throw DomainError("burgers: grid size must be even and >= 4");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("burgers: viscosity must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("burgers: t_end must be non-negative");
  for (double v : u0) {
    if (!std::isfinite(v)) throw DomainError("burgers: non-finite initial condition");
  }
  const double dx = 1.0 / static_cast<double>(n);
  const double dt_max = 0.25 * dx * dx / nu;
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt_max));
  if (steps == 0) return {u0.begin(), u0.end()};
  const double dt = t_end / static_cast<double>(steps);

  BurgersStepper stepper(n, nu, dt);
  auto s = stepper.analyze(u0);
  for (std::size_t i = 0; i < steps; ++i) {
    stepper.step(s, dt);
    if (i % 256 == 255 || i + 1 == steps) {
      for (const auto& c : s) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
          throw NumericError("burgers: solver diverged at step " + std::to_string(i + 1));
        }
      }
    }
  }
  return stepper.synthesize(s);
}

std::pair<std::vector<double>, std::vector<double>> advection_profile(const AdvectionParams& p,
                                                                      std::size_t resolution) {
  if (resolution == 0 || resolution % 2 != 0) throw DomainError("advection: resolution must be even");
  if (!(p.width > 0.0) || !(p.height > 0.0)) throw DomainError("advection: width and height must be positive");
  const double a = 2.0 * p.height / p.width;
  std::vector<double> u0(resolution), u1(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(resolution);
    const double d = x - p.center;
    const double box = std::abs(d) < p.width / 2.0 ? p.height : 0.0;
    u0[i] = box + std::sqrt(std::max(p.height * p.height - a * d * a * d, 0.0));
  }
  const std::size_t shift = resolution / 2;
  for (std::size_t i = 0; i < resolution; ++i) u1[i] = u0[(i + resolution - shift) % resolution];
  return {std::move(u0), std::move(u1)};
}

AdvectionParams advection_params(std::uint64_t seed) {
  auto rng = rng_for(seed);
  std::uniform_real_distribution<double> c(0.3, 0.7), w(0.3, 0.6), h(1.0, 2.0);
  AdvectionParams p{};
  p.center = c(rng);
  p.width = w(rng);
  p.height = h(rng);
  return p;
}

std::pair<std::vector<double>, std::vector<double>> advection_sample(std::uint64_t seed, std::size_t resolution) {
  return advection_profile(advection_params(seed), resolution);
}

PoissonFields poisson_fields(double a, double b, std::size_t resolution) {
  if (resolution < 2) throw DomainError("poisson: resolution must be >= 2");
  PoissonFields out{std::vector<double>(resolution * resolution), std::vector<double>(resolution * resolution)};
  const double pi2 = kPi * kPi;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(resolution - 1);
    for (std::size_t j = 0; j < resolution; ++j) {
      const double y = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(resolution - 1);
      const double s1 = std::sin(kPi * x), s2 = std::sin(2.0 * kPi * x);
      const double c1 = std::cos(kPi * y), c2 = std::cos(2.0 * kPi * y);
      out.u[i * resolution + j] = a * s1 * (1.0 + c1) + b * s2 * (1.0 - c2);
      out.f[i * resolution + j] = -pi2 * a * s1 * (1.0 + 2.0 * c1) + 4.0 * pi2 * b * s2 * (2.0 * c2 - 1.0);
    }
  }
  return out;
}

std::pair<double, double> poisson_params(std::uint64_t seed) {
  auto rng = rng_for(seed);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const double a = d(rng);
  const double b = d(rng);
  return {a, b};
}

PoissonFields poisson_sample(std::uint64_t seed, std::size_t resolution) {
  const auto [a, b] = poisson_params(seed);
  return poisson_fields(a, b, resolution);
}

std::string to_string(Problem p) {
  switch (p) {
    case Problem::Burgers:
      return "burgers";
    case Problem::Advection:
      return "advection";
    case Problem::Poisson:
      return "poisson";
  }
  return "?";
}

Problem parse_problem(std::string_view text) {
  if (text == "burgers") return Problem::Burgers;
  if (text == "advection") return Problem::Advection;
  if (text == "poisson") return Problem::Poisson;
  throw ConfigError("unknown problem '" + std::string(text) + "' (expected burgers, advection or poisson)");
}

data::Dataset generate(const GenerateOptions& o) {
  if (o.n == 0) throw DomainError("generate: need at least one sample");
  data::Dataset ds;
  ds.problem = to_string(o.problem);
  std::vector<double> in, out;
  switch (o.problem) {
    case Problem::Burgers: {
      if (o.resolution == 0 || o.solve_resolution % o.resolution != 0) {
        throw DomainError("generate: burgers solve resolution must be a multiple of the stored resolution");
      }
      const std::size_t stride = o.solve_resolution / o.resolution;
      for (std::size_t s = 0; s < o.n; ++s) {
        const Tensor u0 = grf_sample(sample_seed(o.seed, o.stream, s), 1, o.solve_resolution);
        const auto u1 = burgers_solve(u0.data(), o.nu, 1.0);
        for (std::size_t i = 0; i < o.resolution; ++i) {
          in.push_back(u0[i * stride]);
          out.push_back(u1[i * stride]);
        }
      }
      ds.grid = {o.resolution};
      ds.extent = {{0.0, 1.0 - 1.0 / static_cast<double>(o.resolution)}};
      ds.set_meta("nu", fmt(o.nu));
      ds.set_meta("solve_resolution", std::to_string(o.solve_resolution));
      break;
    }
    case Problem::Advection: {
      for (std::size_t s = 0; s < o.n; ++s) {
        auto [u0, u1] = advection_sample(sample_seed(o.seed, o.stream, s), o.resolution);
        in.insert(in.end(), u0.begin(), u0.end());
        out.insert(out.end(), u1.begin(), u1.end());
      }
      ds.grid = {o.resolution};
      ds.extent = {{0.0, 1.0 - 1.0 / static_cast<double>(o.resolution)}};
      ds.set_meta("speed", "1");
      ds.set_meta("t_final", "0.5");
      break;
    }
    case Problem::Poisson: {
      // Solved on resolution + 1 points; the dropped last row and column lie
      // on the boundary where u vanishes.
      const std::size_t r = o.resolution, full = r + 1;
      for (std::size_t s = 0; s < o.n; ++s) {
        const auto fields = poisson_sample(sample_seed(o.seed, o.stream, s), full);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < r; ++j) {
            in.push_back(fields.f[i * full + j]);
            out.push_back(fields.u[i * full + j]);
          }
        }
      }
      ds.grid = {r, r};
      const double hi = 1.0 - 2.0 / static_cast<double>(r);
      ds.extent = {{-1.0, hi}, {-1.0, hi}};
      break;
    }
  }
  Shape in_shape{o.n};
  in_shape.insert(in_shape.end(), ds.grid.begin(), ds.grid.end());
  Shape out_shape = in_shape;
  in_shape.push_back(1);
  ds.inputs = Tensor(in_shape, std::move(in));
  ds.outputs = Tensor(out_shape, std::move(out));
  ds.set_meta("resolution", std::to_string(o.resolution));
  ds.set_meta("seed", std::to_string(o.seed));
  ds.set_meta("stream", std::to_string(o.stream));
  ds.set_meta("samples", std::to_string(o.n));
  data::fit_normalizers(ds);
  ds.validate();
  return ds;
}

}  // namespace nogap::datagen
