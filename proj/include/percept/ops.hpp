// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "percept/autodiff.hpp"

namespace percept {

enum class Padding { zero, reflect };

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
  Padding padding = Padding::zero;
};

/// 2-D cross-correlation of an NCHW input with an OIKK kernel.
///
/// Output spatial size is (H + 2*pad - K) / stride + 1. `bias` may be an
/// unbound Var. Reflect padding mirrors without repeating the edge sample and
/// requires pad < H and pad < W.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts);

/// Learned 2x upsampling: the adjoint of a stride-2 zero-padded conv2d with
/// pad K/2, plus bias.
///
/// `kernel` has shape Cin x Cout x K x K; the output is N x Cout x 2H x 2W.
/// With zero bias, <conv2d(x, W, stride 2), y> == <x, conv2d_transpose(y, W)>.
Var conv2d_transpose(const Var& input, const Var& kernel, const Var& bias,
                     std::size_t up_factor = 2);

enum class Mode { train, eval };

/// Running statistics of a batch_norm layer.
struct BatchNormState {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  Tensor running_mean;
  Tensor running_var;
  bool initialized = false;

  /// Running mean 0 and variance 1 for `channels` channels.
  static BatchNormState fresh(std::size_t channels);
};

/// Spatial batch normalization over N x H x W per channel.
///
/// Train mode normalizes by batch statistics and updates `state`
/// (an uninitialized state starts from mean 0, variance 1). Eval mode uses the
/// running statistics and throws if they were never initialized.
Var batch_norm(const Var& input, const Var& gamma, const Var& beta,
               BatchNormState& state, Mode mode);

Var relu(const Var& x);
/// 255 * (tanh(x) + 1) / 2, mapping the real line onto (0, 255).
Var scaled_tanh(const Var& x);
/// 2x2 max pooling with stride 2; spatial dims must be even.
Var max_pool2d(const Var& x);
/// Sum over 2x2 windows with stride 2; the linear counterpart of max_pool2d.
Var sum_pool2d(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Sum of all elements, as a one-element tensor.
Var sum(const Var& x);
/// Sum of weighted scalars.
Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);

/// (x - mean[c]) / stddev[c] per channel of an NCHW tensor.
Var normalize_channels(const Var& x, const std::vector<double>& mean,
                       const std::vector<double>& stddev);

/// Identity in the forward pass; blocks gradient flow.
Var detach(const Var& x);

}  // namespace percept
