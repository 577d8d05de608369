// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "percept/losses.hpp"

namespace percept {

// ---------------------------------------------------------------------------
// Box-constrained L-BFGS on a flat vector.

struct LbfgsOptions {
  std::size_t max_iters = 500;
  std::size_t history = 10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 20;
  /// Stop when the projected-gradient 2-norm falls below this.
  double gradient_tolerance = 1e-8;
  double lower = 0.0;
  double upper = 255.0;
  /// Length (infinity norm) of the first steepest-descent step, as a fraction
  /// of upper - lower.
  double initial_step_fraction = 0.1;
};

/// Value and gradient at a point. The gradient must be written into `grad`.
using ObjectiveFn = std::function<double(const Tensor& x, Tensor& grad)>;
/// Called with the iteration number, the accepted iterate and its value.
using IterateFn = std::function<void(std::size_t iteration, const Tensor& x, double value)>;

struct LbfgsResult {
  Tensor x;  // best iterate
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Projected L-BFGS: x <- clip(x + alpha d) with d from the two-loop recursion
/// on the free variables. A trial is accepted only if it satisfies the Armijo
/// condition and does not increase the objective; curvature pairs with
/// s.y <= 0 are dropped. `on_iterate` sees iteration 0 (the clipped start)
/// and every accepted step.
LbfgsResult minimize_lbfgs(const ObjectiveFn& f, Tensor x0, const LbfgsOptions& opts,
                           const IterateFn& on_iterate = {});

// ---------------------------------------------------------------------------
// Image-space optimization.

enum class OptimizerKind { lbfgs, adam };
enum class InitKind { white_noise, image };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizeConfig {
  OptimizerKind method = OptimizerKind::lbfgs;
  std::size_t max_iters = 500;
  std::uint64_t seed = 0;
  InitKind init = InitKind::white_noise;
  /// Starting image when init == image.
  std::optional<ImagePlane> init_image;
  double clip_lower = 0.0;
  double clip_upper = 255.0;
  std::size_t history = 10;
  /// Adam step size in pixel units.
  double learning_rate = 1.0;
  /// Record every n-th iteration (the first and last are always kept).
  std::size_t trace_stride = 1;

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  LossBreakdown loss;
  double seconds = 0.0;
};

struct IterTrace {
  std::vector<TraceEntry> entries;

  bool non_increasing() const;
  /// iteration,total,feat,style,pixel,tv,seconds. `zero_times` writes 0 for
  /// the wall-clock column.
  std::string to_csv(bool zero_times = false) const;
};

struct OptimizeResult {
  ImagePlane image;
  IterTrace trace;
  std::size_t iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Minimizes the objective over a height x width image in [clip_lower,
/// clip_upper], starting from uniform white noise or config.init_image.
/// Returns the best iterate. Throws if the objective is non-finite at the
/// start.
OptimizeResult optimize_image(const ObjectiveSpec& objective, const Network& lossnet,
                              const ObjectiveTargets& targets, std::size_t height,
                              std::size_t width, const OptimizeConfig& config);

/// Reconstructs `target` from its activations at `tap`.
OptimizeResult invert_features(const Network& lossnet, const std::string& tap,
                               const ImagePlane& target, const OptimizeConfig& config,
                               double lambda_tv = 1e-5);

/// Synthesizes a height x width image matching the Gram matrices of `style`
/// at `taps`. The output size is independent of the style image size.
OptimizeResult invert_style(const Network& lossnet, const std::vector<std::string>& taps,
                            const ImagePlane& style, std::size_t height, std::size_t width,
                            const OptimizeConfig& config, double lambda_tv = 1e-5);

}  // namespace percept
