#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "percept/eval.hpp"
#include "percept/losses.hpp"
#include "support.hpp"

using namespace percept;

namespace {

Tensor rand(Shape s, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
  Rng rng(seed);
  return uniform_tensor(std::move(s), lo, hi, rng);
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("gram closed forms") {
  const GramMatrix g = gram_matrix(Tensor(Shape{2, 1, 2}, std::vector<double>{1, 2, 3, 4}), "t");
  CHECK(g.tap == "t");
  const std::vector<double> expect{1.25, 2.75, 2.75, 6.25};
  for (std::size_t i = 0; i < 4; ++i) CHECK(rel_close(g.matrix[i], expect[i], 1e-12));
  CHECK(gram_matrix(Tensor(Shape{1, 5, 3}, 7.0)).matrix.item() == doctest::Approx(49.0));
  CHECK(gram_matrix(Tensor(Shape{4, 3, 3})).matrix.max_abs() == 0.0);
  CHECK_THROWS_AS(gram_matrix(Tensor(Shape{1, 2, 3, 3})), ShapeError);
}

TEST_CASE("gram is symmetric positive semidefinite") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor m = gram_matrix(rand({5, 4, 6}, s, -1.0, 1.0)).matrix;
    Eigen::Matrix<double, 5, 5> e;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) e(i, j) = m[i * 5 + j];
    CHECK((e - e.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>>(e).eigenvalues();
    CHECK(eig.minCoeff() >= -1e-8 * eig.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("feature, pixel and tv closed forms") {
  const Tensor f(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(feature_loss(f, Tensor(Shape{1, 2, 2})) == doctest::Approx(7.5));
  CHECK(feature_loss(f, f) == 0.0);

  const Tensor a = rand({3, 4, 5}, 1);
  Tensor b = a;
  for (double& v : b.data()) v += 2.0;
  CHECK(rel_close(pixel_loss(a, b), 4.0, 1e-12));
  CHECK(pixel_loss(a, a) == 0.0);

  const Tensor step(Shape{1, 2, 2}, std::vector<double>{0, 1, 0, 1});
  CHECK(rel_close(tv_loss(step), 2.0, 1e-12));
  CHECK(tv_loss(Tensor(Shape{3, 4, 4}, 9.0)) == 0.0);
  const Tensor x = rand({3, 6, 5}, 2);
  CHECK(rel_close(tv_loss(2.0 * x), 4.0 * tv_loss(x), 1e-12));
  CHECK_THROWS_AS(pixel_loss(a, Tensor(Shape{3, 4, 4})), ShapeError);
}

TEST_CASE("pixel loss gradient is 2(y_hat - y)/CHW") {
  const Tensor yh = rand({1, 3, 4, 5}, 3), y = rand({1, 3, 4, 5}, 4);
  Tape t;
  const Var v = t.input(yh);
  t.backward(pixel_loss(v, t.constant(y)));
  const Tensor g = t.grad(v);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * (yh[i] - y[i]) / 60.0));
}

TEST_CASE("style loss closed forms") {
  const Tensor f(Shape{1, 2, 1, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor target(Shape{2, 2}, std::vector<double>{1, 0, 0, 2});
  // Singleton layer set: squared Frobenius distance of the Gram matrices.
  const double expect = std::pow(1.25 - 1, 2) + 2 * std::pow(2.75, 2) + std::pow(6.25 - 2, 2);
  CHECK(rel_close(style_loss({{"a", f}}, {{"a", target}}), expect, 1e-12));

  const double v = 3.0, w = 5.0;
  const Tensor small_target = gram_matrix(Tensor(Shape{1, 8, 8}, v)).matrix;
  const double got = style_loss({{"a", Tensor(Shape{1, 1, 16, 16}, w)}}, {{"a", small_target}});
  CHECK(rel_close(got, std::pow(w * w - v * v, 2), 1e-12));

  const Tensor s = rand({4, 6, 6}, 5);
  CHECK(style_loss({{"a", s.reshaped({1, 4, 6, 6})}}, {{"a", gram_matrix(s).matrix}}) ==
        doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS(style_loss({}, {{"a", target}}));
}

TEST_CASE("identity loss network: feature loss equals pixel loss") {
  const Network id = make_identity_loss_net();
  const std::string tap = id.spec().taps().front();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ImagePlane a(ColorSpace::rgb, rand({3, 9, 7}, 10 + s)), b(ColorSpace::rgb, rand({3, 9, 7}, 40 + s));
    const double feat = feature_loss(loss_net_features(id, a, {tap}).at(tap),
                                     loss_net_features(id, b, {tap}).at(tap));
    const double pix = pixel_loss(a.tensor(), b.tensor());
    CHECK(std::abs(feat - pix) <= 1e-12 * pix);

    MetricOptions opts;
    opts.channels = MetricChannels::rgb;
    opts.quantize = false;
    CHECK(std::abs(psnr(a, b, opts) - 10 * std::log10(255.0 * 255.0 / pix)) < 1e-9);
  }
}

TEST_CASE("objective spec validation, taps and serialization") {
  const Network loss = make_mini_loss_net();
  ObjectiveSpec spec;
  CHECK_NOTHROW(spec.validate(loss));
  spec.lambda_c = 0.0;
  CHECK_THROWS(spec.validate(loss));
  spec.lambda_s = 1.0;
  spec.style_taps = {"relu1_2", "nope"};
  try {
    spec.validate(loss);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  spec.style_taps = {"relu1_2"};
  spec.lambda_tv = -1.0;
  CHECK_THROWS(spec.validate(loss));

  ObjectiveSpec a;
  a.lambda_s = 5.0;
  a.lambda_tv = 1e-5;
  const ObjectiveSpec b = ObjectiveSpec::from_json(a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK(b.digest() == a.digest());
  CHECK(a.digest().size() == 16);
  ObjectiveSpec c = a;
  c.lambda_s = 6.0;
  CHECK(c.digest() != a.digest());
  CHECK(a.required_taps() ==
        std::vector<std::string>{"relu1_2", "relu2_2", "relu3_2", "relu4_2"});
}

TEST_CASE("objective equals the sum of independently computed terms") {
  const Network loss = make_mini_loss_net();
  ObjectiveSpec spec;
  spec.lambda_c = spec.lambda_s = spec.lambda_tv = spec.lambda_pixel = 1.0;
  const ImagePlane y(ColorSpace::rgb, rand({3, 16, 16}, 20)), c(ColorSpace::rgb, rand({3, 16, 16}, 21)),
      st(ColorSpace::rgb, rand({3, 16, 16}, 22));
  ObjectiveTargets targets;
  targets.content = c.as_batch();
  targets.pixel = c.as_batch();
  targets.style_grams = style_targets(loss, st, spec.style_taps);
  const LossBreakdown b = evaluate_objective(spec, loss, y, targets);

  std::vector<std::string> taps = spec.style_taps;
  const FeatureTaps fy = loss_net_features(loss, y, taps), fc = loss_net_features(loss, c, taps);
  const double feat = feature_loss(fy.at(spec.content_tap), fc.at(spec.content_tap));
  const double style = style_loss(fy, targets.style_grams);
  const double tv = tv_loss(y.tensor()), pix = pixel_loss(y.tensor(), c.tensor());
  CHECK(rel_close(b.feat, feat, 1e-12));
  CHECK(rel_close(b.style_sum(), style, 1e-12));
  CHECK(rel_close(b.tv, tv, 1e-12));
  CHECK(rel_close(b.pixel, pix, 1e-12));
  CHECK(rel_close(b.total, feat + style + tv + pix, 1e-9));
  CHECK(rel_close(b.total, b.weighted_sum(), 1e-9));

  ObjectiveSpec doubled = spec;
  doubled.lambda_c = 2.0;
  const LossBreakdown d = evaluate_objective(doubled, loss, y, targets);
  CHECK(rel_close(d.total - b.total, b.feat, 1e-9));
  CHECK(d.feat == b.feat);
  CHECK(d.tv == b.tv);
  CHECK(d.style == b.style);
}

TEST_CASE("objective edge cases") {
  const Network loss = make_mini_loss_net();
  const ImagePlane c(ColorSpace::rgb, rand({3, 16, 16}, 30));
  ObjectiveSpec spec;
  ObjectiveTargets targets;
  targets.content = c.as_batch();
  CHECK(evaluate_objective(spec, loss, c, targets).total == 0.0);

  ObjectiveTargets none;
  CHECK_THROWS(evaluate_objective(spec, loss, c, none));
  spec.lambda_s = 1.0;
  CHECK_THROWS(evaluate_objective(spec, loss, c, targets));
  // Style targets from a differently sized image are fine.
  targets.style_grams =
      style_targets(loss, ImagePlane(ColorSpace::rgb, rand({3, 32, 32}, 31)), spec.style_taps);
  CHECK(evaluate_objective(spec, loss, c, targets).style_sum() > 0.0);
}
