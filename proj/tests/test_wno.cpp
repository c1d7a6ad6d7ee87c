#include <gtest/gtest.h>

#include <cmath>

#include "nogap/errors.hpp"
#include "nogap/wno.hpp"
#include "test_support.hpp"

namespace nogap::wno {
namespace {

using nogap::testing::random_tensor;

WnoConfig tiny_config() {
  WnoConfig c;
  c.lift_width = 4;
  c.proj_width = 6;
  c.n_blocks = 2;
  c.levels = 1;
  c.wavelet = "db4";
  c.grid = {16};
  c.in_channels = 2;
  return c;
}

// Perturbs every parameter so that no path is degenerate.
WnoParams random_params(const WnoConfig& c, std::uint64_t seed, double stddev = 0.4) {
  std::mt19937_64 rng(seed);
  WnoParams p = wno_zeros(c);
  for (auto& t : p.tensors) t = random_tensor(t.shape(), rng, stddev);
  return p;
}

TEST(WnoInit, DeterministicInSeed) {
  const WnoConfig c = tiny_config();
  const WnoParams a = wno_init(c, 17), b = wno_init(c, 17), d = wno_init(c, 18);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_TRUE(identical(a.tensors[i], b.tensors[i]));
  EXPECT_FALSE(identical(a.tensors[0], d.tensors[0]));
}

TEST(WnoInit, Shapes) {
  WnoConfig c = tiny_config();
  c.lift_width = 64;
  const WnoParams p = wno_init(c, 1);
  EXPECT_EQ(p.get("lift.weight").shape(), (Shape{2, 64}));
  EXPECT_EQ(p.get("block0.spectral").shape(), (Shape{64, 64, 8}));
  EXPECT_EQ(p.get("proj2.weight").shape(), (Shape{6, 1}));
  EXPECT_THROW(p.get("nope"), LookupError);
}

TEST(WnoInit, LiftWeightMomentsMatchUniformLaw) {
  WnoConfig c = tiny_config();
  c.lift_width = 5000;  // 2 x 5000 = 10^4 draws
  c.n_blocks = 1;
  const Tensor w = wno_init(c, 3).get("lift.weight");
  double mean = 0.0;
  for (double v : w.data()) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w.data()) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / static_cast<double>(w.size() - 1));
  const double expected = (2.0 / std::sqrt(2.0)) / std::sqrt(12.0);
  EXPECT_NEAR(stddev, expected, 0.1 * expected);
  const double bound = 1.0 / std::sqrt(2.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(WnoConfig, Validation) {
  WnoConfig c = tiny_config();
  c.wavelet = "db5";
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.lift_width = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.grid = {40};
  c.levels = 4;
  EXPECT_THROW(c.validate(), ShapeError);
}

TEST(WaveletBlock, ZeroKernelIdentitySkipIsGelu) {
  std::mt19937_64 rng(5);
  const std::size_t w = 4;
  ad::Tape tape;
  const ad::Var v = tape.leaf(random_tensor({2, 16, w}, rng));
  std::vector<double> eye(w * w, 0.0);
  for (std::size_t i = 0; i < w; ++i) eye[i * w + i] = 1.0;
  const WnoVars::Block block{tape.constant(Tensor::zeros({w, w, 8})), tape.constant(Tensor({w, w}, eye)),
                             tape.constant(Tensor::zeros({w}))};
  const ad::Var out = wavelet_block(v, block, wavelet::filter_coeffs("db4"), 1, 1);
  for (std::size_t i = 0; i < out.value().size(); ++i) {
    EXPECT_NEAR(out.value()[i], ad::gelu_value(v.value()[i]), 1e-15);
  }
}

TEST(WaveletBlock, IdentityKernelOnConstantField) {
  const std::size_t w = 3;
  const std::size_t positions = 16 >> 2;
  std::vector<double> mix(w * w * positions, 0.0);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t p = 0; p < positions; ++p) mix[(i * w + i) * positions + p] = 1.0;
  }
  ad::Tape tape;
  const ad::Var v = tape.leaf(Tensor::full({1, 16, w}, 0.7));
  const WnoVars::Block block{tape.constant(Tensor({w, w, positions}, mix)), tape.constant(Tensor::zeros({w, w})),
                             tape.constant(Tensor::zeros({w}))};
  const ad::Var out = wavelet_block(v, block, wavelet::filter_coeffs("db6"), 2, 1);
  for (double x : out.value().data()) EXPECT_NEAR(x, ad::gelu_value(0.7), 1e-12);
}

// Straight-line composition from wavelet::dwt / idwt and explicit loops.
TEST(WaveletBlock, MatchesIndependentComposition) {
  std::mt19937_64 rng(6);
  const std::size_t batch = 2, n = 16, w = 4;
  const int levels = 2;
  const std::size_t positions = n >> levels;
  const auto filter = wavelet::filter_coeffs("db4");
  const Tensor v = random_tensor({batch, n, w}, rng);
  const Tensor spectral = random_tensor({w, w, positions}, rng);
  const Tensor skip_w = random_tensor({w, w}, rng);
  const Tensor skip_b = random_tensor({w}, rng);

  ad::Tape tape;
  const WnoVars::Block block{tape.constant(spectral), tape.constant(skip_w), tape.constant(skip_b)};
  const Tensor got = wavelet_block(tape.constant(v), block, filter, levels, 1).value();

  for (std::size_t b = 0; b < batch; ++b) {
    // per-channel approximation coefficients
    std::vector<std::vector<double>> approx(w);
    for (std::size_t c = 0; c < w; ++c) {
      std::vector<double> line(n);
      for (std::size_t i = 0; i < n; ++i) line[i] = v[(b * n + i) * w + c];
      const auto coeffs = wavelet::dwt(Tensor({n}, line), filter, levels);
      approx[c] = coeffs.approx.to_vector();
    }
    for (std::size_t o = 0; o < w; ++o) {
      std::vector<double> mixed(positions, 0.0);
      for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t i = 0; i < w; ++i) mixed[p] += approx[i][p] * spectral[(i * w + o) * positions + p];
      }
      wavelet::WaveletCoeffs coeffs;
      coeffs.levels = levels;
      coeffs.original_shape = {n};
      coeffs.approx = Tensor({positions}, mixed);
      for (int l = 1; l <= levels; ++l) coeffs.details.push_back(Tensor::zeros({n >> l}));
      const Tensor kernel = wavelet::idwt(coeffs, filter);
      for (std::size_t x = 0; x < n; ++x) {
        double skip = skip_b[o];
        for (std::size_t i = 0; i < w; ++i) skip += v[(b * n + x) * w + i] * skip_w[i * w + o];
        const double expected = ad::gelu_value(kernel[x] + skip);
        EXPECT_NEAR(got[(b * n + x) * w + o], expected, 1e-12);
      }
    }
  }
}

TEST(WnoForward, ZeroParametersGiveZero) {
  std::mt19937_64 rng(7);
  const WnoConfig c = tiny_config();
  const Tensor in = random_tensor({3, 16, 2}, rng);
  const Tensor out = wno_apply(wno_zeros(c), c, in);
  EXPECT_EQ(out.shape(), (Shape{3, 16, 1}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(WnoForward, BatchIndependenceAndEquivariance) {
  std::mt19937_64 rng(8);
  const WnoConfig c = tiny_config();
  const WnoParams p = random_params(c, 9);
  const Tensor one = random_tensor({1, 16, 2}, rng);
  const Tensor other = random_tensor({1, 16, 2}, rng);
  std::vector<double> ab = one.to_vector(), ba = other.to_vector();
  ab.insert(ab.end(), other.data().begin(), other.data().end());
  ba.insert(ba.end(), one.data().begin(), one.data().end());
  const Tensor out_ab = wno_apply(p, c, Tensor({2, 16, 2}, ab));
  const Tensor out_ba = wno_apply(p, c, Tensor({2, 16, 2}, ba));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_DOUBLE_EQ(out_ab[i], out_ba[16 + i]);
    EXPECT_DOUBLE_EQ(out_ab[16 + i], out_ba[i]);
  }
  std::vector<double> twice = one.to_vector();
  twice.insert(twice.end(), one.data().begin(), one.data().end());
  const Tensor out_twice = wno_apply(p, c, Tensor({2, 16, 2}, twice));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out_twice[i], out_twice[16 + i]);
}

TEST(WnoForward, TwoDimensionalShapes) {
  std::mt19937_64 rng(10);
  WnoConfig c = tiny_config();
  c.grid = {8, 16};
  c.in_channels = 3;
  c.levels = 2;
  const Tensor fields = random_tensor({2, 8, 16}, rng);
  const Tensor in = with_coordinates(fields, 2);
  EXPECT_EQ(in.shape(), (Shape{2, 8, 16, 3}));
  EXPECT_EQ(in[3 * (8 * 16) - 1], 1.0);  // last y coordinate of sample 0
  const Tensor out = wno_apply(random_params(c, 11), c, in);
  EXPECT_EQ(out.shape(), (Shape{2, 8, 16, 1}));
}

TEST(WnoForward, ChannelMismatchIsShapeError) {
  const WnoConfig c = tiny_config();
  EXPECT_THROW(wno_apply(wno_zeros(c), c, Tensor::zeros({1, 16, 3})), ShapeError);
  EXPECT_THROW(wno_apply(wno_zeros(c), c, Tensor::zeros({1, 32, 2})), ShapeError);
}

TEST(WnoForward, GradcheckTinyNetwork) {
  std::mt19937_64 rng(12);
  const WnoConfig c = tiny_config();
  const Tensor in = with_coordinates(random_tensor({3, 16}, rng), 1);
  const Tensor target = random_tensor({3, 16, 1}, rng);
  const std::vector<double> theta = flatten(random_params(c, 13));
  const ad::ScalarFn loss = [&](ad::Tape& tape, ad::Var flat) {
    WnoVars vars;
    std::size_t off = 0;
    std::vector<ad::Var> parts;
    for (const ParamSpec& spec : param_specs(c)) {
      const std::size_t n = shape_size(spec.shape);
      parts.push_back(ad::reshape(ad::slice(flat, 0, off, off + n), spec.shape));
      off += n;
    }
    vars.lift_weight = parts[0];
    vars.lift_bias = parts[1];
    for (std::size_t j = 0; j < c.n_blocks; ++j) {
      vars.blocks.push_back({parts[2 + 3 * j], parts[3 + 3 * j], parts[4 + 3 * j]});
    }
    const std::size_t n = parts.size();
    vars.proj1_weight = parts[n - 4];
    vars.proj1_bias = parts[n - 3];
    vars.proj2_weight = parts[n - 2];
    vars.proj2_bias = parts[n - 1];
    const ad::Var diff = ad::sub(wno_forward(vars, c, tape.constant(in)), tape.constant(target));
    return ad::mean(ad::mul(diff, diff));
  };
  EXPECT_LT(ad::gradcheck(loss, Tensor({theta.size()}, theta)), 1e-5);
}

TEST(WnoForward, EveryParameterReceivesGradient) {
  std::mt19937_64 rng(14);
  WnoConfig c = tiny_config();
  c.levels = 2;
  const WnoParams p = wno_init(c, 15);
  ad::Tape tape;
  const WnoVars vars = bind(tape, p);
  const ad::Var out = wno_forward(vars, c, tape.constant(with_coordinates(random_tensor({4, 16}, rng), 1)));
  const ad::Var loss = ad::mean(ad::mul(out, out));
  const auto adj = tape.backward(loss, Tensor::scalar(1.0));
  const auto all = vars.all();
  ASSERT_EQ(all.size(), p.names.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    double norm = 0.0;
    for (double g : adj[all[i].id].data()) {
      ASSERT_TRUE(std::isfinite(g));
      norm += g * g;
    }
    EXPECT_GT(norm, 0.0) << p.names[i];
  }
}

TEST(Checkpoint, RoundTrip) {
  WnoConfig c = tiny_config();
  c.grid = {8, 8};
  c.in_channels = 3;
  const WnoParams p = wno_init(c, 21);
  const auto path = std::filesystem::temp_directory_path() / "nogap_wno_ckpt_test.ngpc";
  write_checkpoint(path, c, p);
  const auto [c2, p2] = read_checkpoint(path);
  EXPECT_TRUE(c2 == c);
  ASSERT_EQ(p2.tensors.size(), p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    EXPECT_EQ(p2.names[i], p.names[i]);
    EXPECT_TRUE(identical(p2.tensors[i], p.tensors[i]));
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace nogap::wno
