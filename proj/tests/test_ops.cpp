#include <doctest.h>

#include <cmath>

#include "percept/ops.hpp"
#include "support.hpp"

using namespace percept;

namespace {

Tensor rand(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return uniform_tensor(std::move(s), lo, hi, rng);
}

Tensor run_conv(const Tensor& x, const Tensor& k, Conv2dOptions o, const Tensor* b = nullptr) {
  Tape t;
  return conv2d(t.constant(x), t.constant(k), b ? t.constant(*b) : Var(), o).value();
}

Tensor run_convt(const Tensor& x, const Tensor& k, const Tensor* b = nullptr) {
  Tape t;
  return conv2d_transpose(t.constant(x), t.constant(k), b ? t.constant(*b) : Var()).value();
}

Tensor iota_image(std::size_t h, std::size_t w) {
  Tensor x(Shape{1, 1, h, w});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

}  // namespace

TEST_CASE("conv2d by hand: 3x3 box filter on 1..9") {
  const Tensor x = iota_image(3, 3);
  const Tensor k(Shape{1, 1, 3, 3}, 1.0);
  const Tensor zero = run_conv(x, k, {1, 1, Padding::zero});
  CHECK(zero.shape() == Shape{1, 1, 3, 3});
  CHECK(zero.at(0, 0, 1, 1) == doctest::Approx(45));
  CHECK(zero.at(0, 0, 0, 0) == doctest::Approx(12));
  CHECK(zero.at(0, 0, 0, 1) == doctest::Approx(21));
  // Reflection without edge repeat: row -1 mirrors row 1.
  const Tensor refl = run_conv(x, k, {1, 1, Padding::reflect});
  CHECK(refl.at(0, 0, 0, 0) == doctest::Approx(33));
  CHECK(refl.at(0, 0, 1, 1) == doctest::Approx(45));
}

TEST_CASE("conv2d output sizes and bias") {
  const Tensor x = rand({2, 3, 9, 8}, 1);
  const Tensor k = rand({4, 3, 3, 3}, 2);
  const Tensor b(Shape{4}, 0.5);
  CHECK(run_conv(x, k, {2, 1}).shape() == Shape{2, 4, 5, 4});
  CHECK(run_conv(x, k, {1, 0}).shape() == Shape{2, 4, 7, 6});
  const Tensor nb = run_conv(x, k, {1, 1}), wb = run_conv(x, k, {1, 1}, &b);
  for (std::size_t i = 0; i < nb.size(); ++i) CHECK(wb[i] == doctest::Approx(nb[i] + 0.5));
}

TEST_CASE("conv2d rejects mismatched shapes") {
  CHECK_THROWS_AS(run_conv(rand({1, 2, 5, 5}, 1), rand({1, 3, 3, 3}, 2), {1, 1}), ShapeError);
  // Reflect padding needs pad < size.
  CHECK_THROWS(run_conv(rand({1, 1, 2, 2}, 1), rand({1, 1, 5, 5}, 2), {1, 2, Padding::reflect}));
}

TEST_CASE("large conv matches a small-tile reference") {
  // Exercises the row-tiled path (rows > one tile) against direct summation.
  const Tensor x = rand({1, 3, 70, 66}, 3);
  const Tensor k = rand({5, 3, 9, 9}, 4);
  const Tensor y = run_conv(x, k, {1, 4, Padding::reflect});
  auto refl = [](long i, long n) { return i < 0 ? -i : (i >= n ? 2 * (n - 1) - i : i); };
  for (std::size_t o : {0, 4}) {
    for (std::size_t i : {0, 1, 33, 69}) {
      for (std::size_t j : {0, 40, 65}) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          for (long a = 0; a < 9; ++a) {
            for (long b = 0; b < 9; ++b) {
              s += k.at(o, c, a, b) *
                   x.at(0, c, refl(long(i) + a - 4, 70), refl(long(j) + b - 4, 66));
            }
          }
        }
        CHECK(y.at(0, o, i, j) == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conv2d_transpose is the adjoint of the stride-2 convolution") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::size_t k = s % 2 ? 3 : 9;
    const Tensor w = rand({4, 3, k, k}, s + 10);   // conv: 3 -> 4 channels
    const Tensor u = rand({2, 3, 10, 12}, s + 20);  // conv input
    const Tensor v = rand({2, 4, 5, 6}, s + 30);    // conv output space
    const double lhs = run_conv(u, w, {2, k / 2}).dot(v);
    const double rhs = u.dot(run_convt(v, w));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("conv2d_transpose equals zero insertion followed by a flipped convolution") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::size_t K = s % 2 ? 3 : 5, p = K / 2, H = 3 + s % 3, W = 4;
    const Tensor x = rand({1, 2, H, W}, s + 40);
    const Tensor w = rand({2, 3, K, K}, s + 50);
    const Tensor b = rand({3}, s + 60);
    Tensor z(Shape{1, 2, 2 * H, 2 * W});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) z.at(0, c, 2 * i, 2 * j) = x.at(0, c, i, j);
    Tensor flipped(Shape{3, 2, K, K});
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t a = 0; a < K; ++a)
          for (std::size_t bb = 0; bb < K; ++bb)
            flipped.at(c, o, a, bb) = w.at(o, c, K - 1 - a, K - 1 - bb);
    const Tensor expect = run_conv(z, flipped, {1, p}, &b);
    const Tensor got = run_convt(x, w, &b);
    REQUIRE(got.shape() == expect.shape());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]));
  }
}

TEST_CASE("batch_norm normalizes and tracks running statistics") {
  Tensor x = rand({4, 2, 3, 3}, 7, -5.0, 9.0);
  Tape t;
  auto state = BatchNormState::fresh(2);
  const Tensor gamma(Shape{2}, 1.0), beta(Shape{2}, 0.0);
  const Tensor y =
      batch_norm(t.constant(x), t.constant(gamma), t.constant(beta), state, Mode::train).value();
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0, xs = 0, xss = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          s += y.at(n, c, i, j);
          ss += y.at(n, c, i, j) * y.at(n, c, i, j);
          xs += x.at(n, c, i, j);
          xss += x.at(n, c, i, j) * x.at(n, c, i, j);
        }
    CHECK(s / 36 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(ss / 36 == doctest::Approx(1.0).epsilon(1e-4));
    const double mu = xs / 36, unbiased = (xss - 36 * mu * mu) / 35;
    CHECK(state.running_mean[c] == doctest::Approx(0.1 * mu));
    CHECK(state.running_var[c] == doctest::Approx(0.9 + 0.1 * unbiased));
  }
  auto blank = BatchNormState{};
  CHECK_THROWS(batch_norm(t.constant(x), t.constant(gamma), t.constant(beta), blank, Mode::eval));
}

TEST_CASE("pointwise ops and pooling values") {
  Tape t;
  const Tensor x(Shape{1, 1, 2, 2}, std::vector<double>{-1, 2, 3, -4});
  CHECK(relu(t.constant(x)).value() == Tensor(Shape{1, 1, 2, 2}, std::vector<double>{0, 2, 3, 0}));
  CHECK(max_pool2d(t.constant(x)).value().item() == 3.0);
  CHECK(sum_pool2d(t.constant(x)).value().item() == 0.0);
  const Tensor th = scaled_tanh(t.constant(Tensor(Shape{3}, std::vector<double>{-50, 0, 50}))).value();
  CHECK(th[0] == doctest::Approx(0.0));
  CHECK(th[1] == doctest::Approx(127.5));
  CHECK(th[2] == doctest::Approx(255.0));
  CHECK_THROWS_AS(max_pool2d(t.constant(Tensor(Shape{1, 1, 3, 2}))), ShapeError);
}

TEST_CASE("tape rejects a second backward pass and non-scalar outputs") {
  Tape t;
  const Var x = t.input(Tensor(Shape{2}, 1.0));
  CHECK_THROWS_AS(t.backward(scale(x, 2.0)), ShapeError);
  const Var s = sum(x);
  t.backward(s);
  CHECK(t.grad(x) == Tensor(Shape{2}, 1.0));
  CHECK_THROWS(t.backward(s));
}

TEST_CASE("parameters receive gradients") {
  Parameter p("w", Tensor(Shape{3}, 2.0));
  Tape t;
  t.backward(sum(scale(t.parameter(p), 3.0)));
  CHECK(p.grad == Tensor(Shape{3}, 3.0));
  p.zero_grad();
  CHECK(p.grad.max_abs() == 0.0);
}

TEST_CASE("conv2d reference cases") {
  const Tensor x = rand({1, 2, 5, 5}, 9);
  Tensor eye(Shape{2, 2, 1, 1});
  eye.at(0, 0, 0, 0) = eye.at(1, 1, 0, 0) = 1.0;
  CHECK(run_conv(x, eye, {1, 0}) == x);
  const Tensor ones = run_conv(Tensor(Shape{1, 1, 3, 3}, 1.0), Tensor(Shape{1, 1, 3, 3}, 1.0), {1, 1});
  CHECK(ones.at(0, 0, 1, 1) == 9.0);
  CHECK(ones.at(0, 0, 0, 0) == 4.0);
  CHECK(ones.at(0, 0, 2, 2) == 4.0);
  CHECK(run_conv(Tensor(Shape{1, 1, 8, 8}), Tensor(Shape{1, 1, 3, 3}), {2, 1}).shape() ==
        Shape{1, 1, 4, 4});
}

TEST_CASE("conv2d_transpose shape and periodicity") {
  const Tensor y = run_convt(Tensor(Shape{1, 1, 4, 4}, 1.0), Tensor(Shape{1, 1, 3, 3}, 1.0));
  REQUIRE(y.shape() == Shape{1, 1, 8, 8});
  // Away from the trailing border the output repeats with period 2.
  for (std::size_t i = 0; i + 2 < 7; ++i)
    for (std::size_t j = 0; j + 2 < 7; ++j) {
      CHECK(y.at(0, 0, i, j) == y.at(0, 0, i + 2, j));
      CHECK(y.at(0, 0, i, j) == y.at(0, 0, i, j + 2));
    }
  CHECK(y.at(0, 0, 2, 2) == 1.0);  // even site: one tap
  CHECK(y.at(0, 0, 3, 3) == 4.0);  // odd site: four taps
  CHECK(y.at(0, 0, 2, 3) == 2.0);
}

TEST_CASE("batch_norm eval identity and zero gamma") {
  Tape t;
  const Tensor x = rand({2, 3, 4, 4}, 11);
  auto state = BatchNormState::fresh(3);
  const Tensor y = batch_norm(t.constant(x), t.constant(Tensor(Shape{3}, 1.0)),
                              t.constant(Tensor(Shape{3}, 0.0)), state, Mode::eval)
                       .value();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-5));
  const Tensor beta(Shape{3}, std::vector<double>{1, -2, 3});
  const Tensor z = batch_norm(t.constant(x), t.constant(Tensor(Shape{3}, 0.0)), t.constant(beta),
                              state, Mode::train)
                       .value();
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) CHECK(z.at(n, c, 1, 2) == beta[c]);
}

TEST_CASE("activation and pooling reference values") {
  Tape t;
  CHECK(scaled_tanh(t.constant(Tensor::scalar(20))).value().item() > 254.99);
  CHECK(relu(t.constant(Tensor::scalar(-3))).value().item() == 0.0);
  CHECK(relu(t.constant(Tensor::scalar(3))).value().item() == 3.0);
  const Tensor x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(max_pool2d(t.constant(x)).value().item() == 4.0);
  const Tensor flat = max_pool2d(t.constant(Tensor(Shape{1, 2, 4, 6}, 7.0))).value();
  CHECK(flat == Tensor(Shape{1, 2, 2, 3}, 7.0));

  Tape g;
  const Var xv = g.input(x);
  g.backward(sum(max_pool2d(xv)));
  CHECK(g.grad(xv) == Tensor(Shape{1, 1, 2, 2}, std::vector<double>{0, 0, 0, 1}));
}

TEST_CASE("non-finite inputs and parameters are rejected") {
  Tensor bad(Shape{2}, 1.0);
  bad[0] = std::nan("");
  Tape t;
  CHECK_THROWS(t.input(bad));
  CHECK_THROWS(Parameter("p", bad));
}
