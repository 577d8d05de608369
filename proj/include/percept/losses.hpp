// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "percept/autodiff.hpp"
#include "percept/image.hpp"
#include "percept/network.hpp"

namespace percept {

// Loss primitives accept a single C x H x W map or an N x C x H x W batch.
// Batched losses are the mean of the per-sample losses.

/// (1 / CHW) * ||f_hat - f_target||^2. Shapes must match exactly.
Var feature_loss(const Var& f_hat, const Var& f_target);
/// ||y_hat - y||^2 / CHW; the same formula as feature_loss on raw pixels.
Var pixel_loss(const Var& y_hat, const Var& y);
/// psi psi^T / CHW with psi the C x HW reshaping; N x C x C for batches.
Var gram(const Var& features);
/// ||gram(f_hat) - target||_F^2 for a C x C target.
Var style_layer_loss(const Var& f_hat, const Tensor& target_gram);
/// Squared forward differences summed over channels, rows and columns.
Var tv_loss(const Var& y_hat);

struct GramMatrix {
  std::string tap;
  Tensor matrix;  // C x C
};

using StyleTargets = std::map<std::string, Tensor>;

double feature_loss(const Tensor& f_hat, const Tensor& f_target);
double pixel_loss(const Tensor& y_hat, const Tensor& y);
GramMatrix gram_matrix(const Tensor& features, std::string tap = {});
double tv_loss(const Tensor& y_hat);
/// Sum over `targets` of the per-layer style loss. Every target layer must be
/// present in `taps_hat`.
double style_loss(const FeatureTaps& taps_hat, const StyleTargets& targets);

/// Weighted combination of feature, style, total-variation and pixel losses.
struct ObjectiveSpec {
  double lambda_c = 1.0;
  double lambda_s = 0.0;
  double lambda_tv = 0.0;
  double lambda_pixel = 0.0;
  std::string content_tap = "relu2_2";
  std::vector<std::string> style_taps = {"relu1_2", "relu2_2", "relu3_2", "relu4_2"};

  /// Weights nonnegative, at least one positive, taps present in `lossnet`.
  void validate(const Network& lossnet) const;
  /// Loss-network taps needed to evaluate this objective.
  std::vector<std::string> required_taps() const;

  nlohmann::json to_json() const;
  static ObjectiveSpec from_json(const nlohmann::json& j);
  /// Stable hex digest of to_json().
  std::string digest() const;
};

/// Unweighted term values plus the weights that produced `total`. Terms with
/// zero weight are not evaluated and read 0.
struct LossBreakdown {
  double total = 0.0;
  double feat = 0.0;
  double pixel = 0.0;
  double tv = 0.0;
  std::map<std::string, double> style;
  double lambda_c = 0.0, lambda_s = 0.0, lambda_tv = 0.0, lambda_pixel = 0.0;

  double style_sum() const;
  /// lambda-weighted sum of the terms.
  double weighted_sum() const;
  nlohmann::json to_json() const;
};

struct ObjectiveTargets {
  /// Content image y_c (N x C x H x W or C x H x W) for the feature term.
  std::optional<Tensor> content;
  /// Gram targets per style tap.
  StyleTargets style_grams;
  /// Pixel-space target for the pixel term.
  std::optional<Tensor> pixel;
};

struct ObjectiveTerms {
  Var total;
  std::optional<Var> feat, pixel, tv;
  std::map<std::string, Var> style;
  LossBreakdown breakdown;
};

/// Records the objective on y_hat's tape. Gradients flow to y_hat only.
ObjectiveTerms build_objective(const ObjectiveSpec& spec, const Network& lossnet,
                               const Var& y_hat, const ObjectiveTargets& targets);

LossBreakdown evaluate_objective(const ObjectiveSpec& spec, const Network& lossnet,
                                 const ImagePlane& y_hat, const ObjectiveTargets& targets);

/// Gram matrices of `style` at `taps`, computed once and reused as targets.
StyleTargets style_targets(const Network& lossnet, const ImagePlane& style,
                           const std::vector<std::string>& taps);

}  // namespace percept
