#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nogap/autodiff.hpp"
#include "nogap/errors.hpp"
#include "test_support.hpp"

namespace nogap::ad {
namespace {

using nogap::testing::random_tensor;

// Reduces an arbitrary-shape op output to a scalar with fixed random weights
// so every output entry contributes to the checked gradient.
Var weighted_sum(Tape& tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Var w = tape.constant(random_tensor(y.shape(), rng));
  return sum(mul(y, w));
}

TEST(Tensor, RejectsNonFiniteLeaves) {
  EXPECT_THROW(Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), DomainError);
  EXPECT_THROW(Tensor({1}, {std::numeric_limits<double>::infinity()}), DomainError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Ops, GeluValues) {
  EXPECT_EQ(gelu_value(0.0), 0.0);
  // 40-digit evaluation of the tanh form at x = 1
  EXPECT_NEAR(gelu_value(1.0), 0.8411919906082767, 1e-15);
  Tape tape;
  const Var y = gelu(tape.leaf(Tensor({3}, {0.0, 1.0, -2.0})));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_NEAR(y.value()[1], 0.8411919906, 1e-10);
}

TEST(Ops, MatmulIdentity) {
  std::mt19937_64 rng(1);
  Tape tape;
  const Tensor x = random_tensor({3, 5}, rng);
  const Var eye = tape.constant(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const Var y = matmul(eye, tape.leaf(x));
  EXPECT_TRUE(identical(y.value(), x));
}

TEST(Ops, ShapeMismatchIsDescriptive) {
  Tape tape;
  const Var a = tape.leaf(Tensor::zeros({2, 3}));
  const Var b = tape.leaf(Tensor::zeros({2, 4}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(matmul(a, b), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("inner dimensions"), std::string::npos);
  }
  const Var c = tape.leaf(Tensor::zeros({3, 4}));
  const Var parts[] = {a, c};
  EXPECT_THROW(concat_lastdim(parts), ShapeError);
  EXPECT_THROW(slice(a, 1, 2, 5), ShapeError);
  EXPECT_THROW(reshape(a, {4}), ShapeError);
}

TEST(Ops, SliceConcatPadBookkeeping) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const Var s = slice(x, 1, 1, 3);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s.value().to_vector(), (std::vector<double>{2, 3, 5, 6}));
  const Var p = pad(s, 1, 1, 3);
  EXPECT_EQ(p.value().to_vector(), (std::vector<double>{0, 2, 3, 0, 5, 6}));
  const Var parts[] = {x, s};
  const Var c = concat_lastdim(parts);
  EXPECT_EQ(c.value().to_vector(), (std::vector<double>{1, 2, 3, 2, 3, 4, 5, 6, 5, 6}));
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(2);
  Tape tape;
  const Var x = tape.leaf(random_tensor({4, 3}, rng));
  const Var root = sum(x);
  const auto adj = tape.backward(root, Tensor::scalar(1.0));
  EXPECT_TRUE(identical(adj[x.id], Tensor::full({4, 3}, 1.0)));
  EXPECT_TRUE(identical(adj[root.id], Tensor::scalar(1.0)));
}

TEST(Backward, SquareOfScalar) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(3.0));
  const Var root = mul(x, x);
  const auto adj = tape.backward(root, Tensor::scalar(1.0));
  EXPECT_DOUBLE_EQ(adj[x.id].item(), 6.0);
}

TEST(Backward, Errors) {
  Tape tape;
  const Var x = tape.leaf(Tensor::zeros({2}));
  EXPECT_THROW(tape.backward(7, Tensor::zeros({2})), LookupError);
  EXPECT_THROW(tape.backward(x, Tensor::scalar(1.0)), ShapeError);
}

TEST(Backward, ThreeLayerNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Tensor input = random_tensor({5, 4}, rng);
  const Tensor w1 = random_tensor({4, 6}, rng, 0.5), b1 = random_tensor({6}, rng, 0.1);
  const Tensor w2 = random_tensor({6, 6}, rng, 0.5), b2 = random_tensor({6}, rng, 0.1);
  const Tensor w3 = random_tensor({6, 1}, rng, 0.5), b3 = random_tensor({1}, rng, 0.1);
  const std::size_t n1 = w1.size(), n2 = w2.size(), n3 = w3.size();
  std::vector<double> flat;
  for (const Tensor* t : {&w1, &b1, &w2, &b2, &w3, &b3}) {
    flat.insert(flat.end(), t->data().begin(), t->data().end());
  }
  const ScalarFn loss = [&](Tape& tape, Var theta) {
    std::size_t off = 0;
    auto take = [&](std::size_t n, Shape shape) {
      Var v = reshape(slice(theta, 0, off, off + n), std::move(shape));
      off += n;
      return v;
    };
    const Var W1 = take(n1, {4, 6}), B1 = take(6, {6});
    const Var W2 = take(n2, {6, 6}), B2 = take(6, {6});
    const Var W3 = take(n3, {6, 1}), B3 = take(1, {1});
    Var h = gelu(conv1x1_channels(tape.constant(input), W1, B1));
    h = gelu(conv1x1_channels(h, W2, B2));
    const Var out = conv1x1_channels(h, W3, B3);
    return mean(mul(out, out));
  };
  EXPECT_LT(gradcheck(loss, Tensor({flat.size()}, flat), 1e-6), 1e-5);
}

TEST(Gradcheck, LinearMapIsExact) {
  std::mt19937_64 rng(4);
  const Tensor c = random_tensor({7}, rng);
  const ScalarFn fn = [&](Tape& tape, Var x) { return sum(mul(x, tape.constant(c))); };
  EXPECT_LT(gradcheck(fn, random_tensor({7}, rng)), 1e-9);
}

TEST(Gradcheck, SquaredNormMatchesClosedForm) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({9}, rng);
  const ScalarFn fn = [](Tape&, Var v) { return sum(mul(v, v)); };
  EXPECT_LT(gradcheck(fn, x), 1e-8);
  const Tensor g = gradient(fn, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], 2.0 * x[i], 1e-14);
}

TEST(Gradcheck, RejectsNonScalarAndBadStep) {
  const ScalarFn fn = [](Tape&, Var v) { return v; };
  EXPECT_THROW(gradcheck(fn, Tensor::zeros({3})), ContractError);
  const ScalarFn ok = [](Tape&, Var v) { return sum(v); };
  EXPECT_THROW(gradcheck(ok, Tensor::zeros({3}), 0.0), ContractError);
}

// Every op with a backward rule agrees with central differences at 20 random
// points.
TEST(Backward, EveryOpMatchesFiniteDifferences) {
  const auto db4 = wavelet::filter_coeffs("db4");
  struct Case {
    const char* name;
    Shape shape;
    std::function<Var(Tape&, Var)> op;
  };
  std::mt19937_64 side_rng(99);
  const Tensor other = random_tensor({3, 4}, side_rng);
  const Tensor mat = random_tensor({4, 2}, side_rng);
  const Tensor w = random_tensor({4, 3}, side_rng);
  const Tensor bias = random_tensor({3}, side_rng);
  const Tensor mix = random_tensor({2, 3, 4}, side_rng);
  const std::vector<Case> cases = {
      {"add", {3, 4}, [&](Tape& t, Var x) { return add(x, t.constant(other)); }},
      {"sub", {3, 4}, [&](Tape& t, Var x) { return sub(t.constant(other), x); }},
      {"mul", {3, 4}, [&](Tape&, Var x) { return mul(x, x); }},
      {"matmul_lhs", {3, 4}, [&](Tape& t, Var x) { return matmul(x, t.constant(mat)); }},
      {"matmul_rhs", {4, 2}, [&](Tape& t, Var x) { return matmul(t.constant(other), x); }},
      {"scale", {3, 4}, [&](Tape&, Var x) { return scale(x, -1.7); }},
      {"reshape", {3, 4}, [&](Tape&, Var x) { return reshape(x, {2, 6}); }},
      {"concat", {3, 4},
       [&](Tape& t, Var x) {
         const Var p[] = {x, t.constant(other), x};
         return concat_lastdim(p);
       }},
      {"slice", {3, 4}, [&](Tape&, Var x) { return slice(x, 1, 1, 3); }},
      {"pad", {3, 4}, [&](Tape&, Var x) { return pad(x, 0, 2, 6); }},
      {"sum", {3, 4}, [&](Tape&, Var x) { return scale(sum(x), 0.3); }},
      {"mean", {3, 4}, [&](Tape&, Var x) { return mean(mul(x, x)); }},
      {"gelu", {3, 4}, [&](Tape&, Var x) { return gelu(x); }},
      {"conv1x1_x", {2, 5, 4},
       [&](Tape& t, Var x) { return conv1x1_channels(x, t.constant(w), t.constant(bias)); }},
      {"conv1x1_w", {4, 3},
       [&](Tape& t, Var x) {
         return conv1x1_channels(t.constant(Tensor::full({2, 5, 4}, 0.3)), x, t.constant(bias));
       }},
      {"spectral_mix", {3, 2, 2, 2}, [&](Tape& t, Var x) { return spectral_mix(x, t.constant(mix)); }},
      {"dwt_hook_1d", {2, 16, 3}, [&](Tape&, Var x) { return dwt_hook(x, db4, 2, 1); }},
      {"idwt_hook_1d", {2, 16, 3}, [&](Tape&, Var x) { return idwt_hook(x, db4, 2, 1); }},
      {"dwt_hook_2d", {1, 8, 8, 2}, [&](Tape&, Var x) { return dwt_hook(x, db4, 1, 2); }},
      {"wavelet_approx_1d", {2, 16, 3}, [&](Tape&, Var x) { return wavelet_approx(x, db4, 2, 1); }},
      {"wavelet_expand_1d", {2, 4, 3}, [&](Tape&, Var x) { return wavelet_expand(x, db4, 2, 1); }},
      {"wavelet_approx_2d", {1, 8, 8, 2}, [&](Tape&, Var x) { return wavelet_approx(x, db4, 1, 2); }},
      {"wavelet_expand_2d", {1, 2, 2, 2}, [&](Tape&, Var x) { return wavelet_expand(x, db4, 2, 2); }},
  };
  std::mt19937_64 rng(6);
  for (const Case& c : cases) {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor point = random_tensor(c.shape, rng);
      const std::uint64_t wseed = rng();
      const ScalarFn fn = [&](Tape& t, Var x) { return weighted_sum(t, c.op(t, x), wseed); };
      EXPECT_LT(gradcheck(fn, point), 1e-5) << c.name << " trial " << trial;
    }
  }
}

TEST(Ops, WaveletApproxMatchesFullTransform) {
  std::mt19937_64 rng(9);
  for (const char* name : {"db4", "db6", "db8"}) {
    const auto f = wavelet::filter_coeffs(name);
    for (const Shape& shape : {Shape{3, 64, 2}, Shape{2, 16, 32, 3}}) {
      const std::size_t sd = shape.size() - 2;
      for (int levels = 1; levels <= 3; ++levels) {
        Tape tape;
        const Var x = tape.constant(random_tensor(shape, rng));
        Var sliced = dwt_hook(x, f, levels, sd);
        for (std::size_t a = 1; a <= sd; ++a) sliced = slice(sliced, a, 0, shape[a] >> levels);
        const Var fast = wavelet_approx(x, f, levels, sd);
        ASSERT_EQ(fast.shape(), sliced.shape());
        EXPECT_LT(max_abs_diff(fast.value(), sliced.value()), 1e-12) << name;

        Var padded = fast;
        for (std::size_t a = 1; a <= sd; ++a) padded = pad(padded, a, 0, shape[a]);
        const Var slow_back = idwt_hook(padded, f, levels, sd);
        const Var fast_back = wavelet_expand(fast, f, levels, sd);
        ASSERT_EQ(fast_back.shape(), shape);
        EXPECT_LT(max_abs_diff(fast_back.value(), slow_back.value()), 1e-12) << name;
      }
    }
  }
}

TEST(Backward, AdjointsAreLinearInTheRoot) {
  std::mt19937_64 rng(7);
  const Tensor x0 = random_tensor({6}, rng);
  auto build = [&](Tape& tape, Var& x, Var& r1, Var& r2) {
    x = tape.leaf(x0);
    r1 = sum(gelu(x));
    r2 = sum(mul(x, x));
  };
  Tape tape;
  Var x, r1, r2;
  build(tape, x, r1, r2);
  const Var both = add(r1, r2);
  const auto g_both = tape.backward(both, Tensor::scalar(1.0))[x.id];
  const auto g1 = tape.backward(r1, Tensor::scalar(1.0))[x.id];
  const auto g2 = tape.backward(r2, Tensor::scalar(1.0))[x.id];
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(g_both[i], g1[i] + g2[i], 1e-14);
}

TEST(Backward, IsDeterministic) {
  std::mt19937_64 rng(8);
  Tape tape;
  const Var x = tape.leaf(random_tensor({4, 8, 2}, rng));
  const Var root = sum(gelu(idwt_hook(dwt_hook(x, wavelet::filter_coeffs("db6"), 2, 1),
                                      wavelet::filter_coeffs("db6"), 2, 1)));
  const auto a = tape.backward(root, Tensor::scalar(1.0));
  const auto b = tape.backward(root, Tensor::scalar(1.0));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(identical(a[i], b[i]));
}

}  // namespace
}  // namespace nogap::ad
