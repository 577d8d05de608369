// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "percept/checkpoint.hpp"
#include "percept/losses.hpp"
#include "percept/synthesis.hpp"

namespace percept {

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Round parameters and moments to float32 after each step, so that
  /// checkpoints (stored as float32) capture the state exactly.
  bool single_precision = false;
};

struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its `grad`.
/// Throws naming the parameter if a gradient is non-finite; nothing is
/// modified in that case.
void adam_step(std::vector<Parameter>& params, AdamState& state, const AdamOptions& opts);

// ---------------------------------------------------------------------------
// Super-resolution pairs

struct SrPair {
  ImagePlane low;
  ImagePlane high;
};

/// low = bicubic downsample by `factor` of the sigma-1 Gaussian blur of
/// `high`. Height and width must be divisible by `factor`.
SrPair make_sr_pair(const ImagePlane& high, std::size_t factor);

// ---------------------------------------------------------------------------
// Training

enum class Task { style, sr };
enum class SrLoss { pixel, feat };

std::string to_string(Task t);
Task task_from_string(const std::string& s);
std::string to_string(SrLoss l);
SrLoss sr_loss_from_string(const std::string& s);

struct TrainConfig {
  Task task = Task::style;
  /// Style task: the full objective. SR task: supplies content_tap and
  /// lambda_tv; the loss itself is chosen by sr_loss.
  ObjectiveSpec objective;
  /// Training images, read from data_dir unless `images` is non-empty.
  std::filesystem::path data_dir;
  std::vector<ImagePlane> images;
  /// Style target, read from style_path unless `style` is set.
  std::filesystem::path style_path;
  std::optional<ImagePlane> style;
  /// Style: images are centre-cropped and resized to this size. SR: size of
  /// the random high-resolution crop.
  std::size_t image_size = 256;
  std::size_t factor = 0;
  SrLoss sr_loss = SrLoss::feat;
  std::size_t batch_size = 4;
  std::size_t iterations = 40000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;
  /// Also write checkpoint_path every n iterations (0 = only at the end).
  std::size_t checkpoint_stride = 0;
  std::size_t log_stride = 1;
  StyleNetOptions style_net;
  SrNetOptions sr_net;

  /// Paper-scale style transfer: 256x256, batch 4, 40k iterations.
  static TrainConfig style_preset();
  /// Paper-scale super-resolution: 288x288 crops, batch 4, 200k iterations.
  static TrainConfig sr_preset(std::size_t factor);
  /// Small runs used by the tests: 64x64, batch 2, 300 iterations.
  static TrainConfig desk_style_preset();
  /// 96x96 patches, factor 4, pixel loss, 500 iterations.
  static TrainConfig desk_sr_preset();

  void validate() const;
  /// Objective actually optimized (the SR loss selector applied).
  ObjectiveSpec effective_objective() const;
};

using TrainLog = IterTrace;

struct TrainHooks {
  /// After backward and before the update; parameter gradients are populated.
  std::function<void(std::size_t iteration, const LossBreakdown&, const Network&)> on_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// Trains a style-transfer network. With `resume`, continues from the
/// checkpoint's iteration (parameters, batch-norm statistics and Adam state
/// restored) up to config.iterations.
TrainResult train_style(const TrainConfig& config, const Network& lossnet,
                        const std::optional<Checkpoint>& resume = std::nullopt,
                        const TrainHooks& hooks = {});

/// Trains a super-resolution network on make_sr_pair batches.
TrainResult train_sr(const TrainConfig& config, const Network& lossnet,
                     const std::optional<Checkpoint>& resume = std::nullopt,
                     const TrainHooks& hooks = {});

/// Dispatches on config.task.
TrainResult train(const TrainConfig& config, const Network& lossnet,
                  const std::optional<Checkpoint>& resume = std::nullopt,
                  const TrainHooks& hooks = {});

/// Applies a trained network to one image (eval mode).
ImagePlane apply_network(const Network& net, const ImagePlane& input);

}  // namespace percept
