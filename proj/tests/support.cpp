// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace percept::testing {

ImagePlane synthetic_photo(std::uint64_t seed, std::size_t height, std::size_t width) {
  Rng rng(seed);
  ImagePlane img(ColorSpace::rgb, height, width);
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  // Background: per-channel linear gradient.
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(40, 215);
    gy[c] = rng.uniform(-80, 80);
    gx[c] = rng.uniform(-80, 80);
  }
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j)
        img.at(c, i, j) = base[c] + gy[c] * (static_cast<double>(i) / h - 0.5) +
                          gx[c] * (static_cast<double>(j) / w - 0.5);
  // Shapes.
  const std::size_t shapes = 3 + rng.index(4);
  for (std::size_t s = 0; s < shapes; ++s) {
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    const double r = rng.uniform(0.08, 0.3) * std::min(h, w);
    const bool disc = rng.uniform() < 0.5;
    double col[3];
    for (double& v : col) v = rng.uniform(0, 255);
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
        const bool inside = disc ? dy * dy + dx * dx < r * r : std::abs(dy) < r && std::abs(dx) < 0.7 * r;
        if (inside)
          for (std::size_t c = 0; c < 3; ++c) img.at(c, i, j) = col[c];
      }
  }
  img = gaussian_blur(img, 0.7);
  for (double& v : img.tensor().data()) v = std::clamp(v + rng.uniform(-4, 4), 0.0, 255.0);
  return img;
}

std::vector<ImagePlane> synthetic_photos(std::uint64_t seed, std::size_t count, std::size_t height,
                                         std::size_t width) {
  std::vector<ImagePlane> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(synthetic_photo(derive_seed(seed, k), height, width));
  }
  return out;
}

ImagePlane synthetic_style(std::uint64_t seed, std::size_t height, std::size_t width) {
  Rng rng(seed);
  ImagePlane img(ColorSpace::rgb, height, width);
  const double theta = rng.uniform(0, std::numbers::pi);
  const double period = rng.uniform(5, 9);
  const double k = 2 * std::numbers::pi / period;
  double a[3], b[3];
  for (int c = 0; c < 3; ++c) {
    a[c] = rng.uniform(60, 200);
    b[c] = rng.uniform(40, 90) * (rng.uniform() < 0.5 ? -1 : 1);
  }
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const double t = k * (std::cos(theta) * static_cast<double>(j) +
                              std::sin(theta) * static_cast<double>(i));
        const double v = a[c] + b[c] * (std::sin(t) + 0.4 * std::sin(2 * t + static_cast<double>(c)));
        img.at(c, i, j) = std::clamp(v, 0.0, 255.0);
      }
  return img;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("percept_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double max_fd_error(const std::function<double(const Tensor&)>& f, const Tensor& x,
                    const Tensor& analytic, std::size_t samples, std::uint64_t seed, double h,
                    double floor, std::size_t* kinks) {
  Rng rng(seed);
  const std::size_t n = samples == 0 ? x.size() : std::min(samples, x.size());
  double worst = 0.0;
  Tensor xp = x;
  auto central = [&](std::size_t i, double step) {
    const double orig = xp[i];
    xp[i] = orig + step;
    const double fp = f(xp);
    xp[i] = orig - step;
    const double fm = f(xp);
    xp[i] = orig;
    return (fp - fm) / (2 * step);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = samples == 0 ? k : rng.index(x.size());
    const double numeric = central(i, h);
    // Halving the step barely moves a smooth, well-conditioned estimate; a
    // change beyond the tolerance means a kink in the stencil or cancellation,
    // and the coordinate cannot be checked at this step.
    const double finer = central(i, h / 2);
    if (std::abs(numeric - finer) > 1e-4 * std::max({std::abs(numeric), std::abs(finer), floor})) {
      if (kinks) ++*kinks;
      continue;
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

Var contract(const Var& y, const Tensor& w) {
  require_same_shape(y.value(), w, "contract");
  const std::size_t yid = y.id();
  return y.tape().record(Tensor::scalar(y.value().dot(w)), {y},
                         [yid, w](Tape& tape, const Tensor& g) {
                           Tensor& s = tape.grad_slot(yid);
                           for (std::size_t i = 0; i < w.size(); ++i) s[i] += g[0] * w[i];
                         });
}

double op_fd_error(const OpFn& op, const std::vector<Tensor>& inputs, std::size_t which,
                   std::uint64_t seed, std::size_t* kinks, double h) {
  Tensor w;
  auto eval = [&](const Tensor& x, Tensor* grad) {
    Tape tape;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      vars.push_back(i == which ? tape.input(x) : tape.constant(inputs[i]));
    }
    const Var y = op(tape, vars);
    if (w.empty()) {
      Rng rng(derive_seed(seed, 0x77));
      w = uniform_tensor(y.shape(), -1.0, 1.0, rng);
    }
    const Var s = contract(y, w);
    if (grad) {
      tape.backward(s);
      *grad = tape.grad(vars[which]);
    }
    return s.value().item();
  };
  Tensor analytic;
  eval(inputs[which], &analytic);
  // Central differences lose about eps*|f|/h to cancellation, so components
  // far below the largest one are compared against that scale instead.
  const double floor = std::max(1e-6, 1e-4 * analytic.max_abs());
  return max_fd_error([&](const Tensor& x) { return eval(x, nullptr); }, inputs[which], analytic,
                      0, seed, h, floor, kinks);
}

}  // namespace percept::testing
