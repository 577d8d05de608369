// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "percept/synthesis.hpp"

namespace percept {

// ---------------------------------------------------------------------------
// Metrics

enum class MetricChannels { y, rgb };

struct MetricOptions {
  /// Y of full-range YCbCr, or all RGB channels.
  MetricChannels channels = MetricChannels::y;
  /// Round both images to 8-bit values first, as when comparing saved files.
  bool quantize = true;
};

/// SSIM constants, fixed and reported with every MetricReport.
struct SsimParams {
  static constexpr std::size_t kWindow = 11;
  static constexpr double kSigma = 1.5;
  static constexpr double kK1 = 0.01;
  static constexpr double kK2 = 0.03;
  static constexpr double kRange = 255.0;
};

/// 10 log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const ImagePlane& ref, const ImagePlane& test, const MetricOptions& opts = {});
/// Mean local SSIM over all fully-contained 11x11 windows (mean over channels
/// in RGB mode). Images must be at least 11 pixels on each side.
double ssim(const ImagePlane& ref, const ImagePlane& test, const MetricOptions& opts = {});

struct MetricRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  MetricOptions options;
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

MetricReport evaluate_images(const std::vector<std::pair<std::string, ImagePlane>>& refs,
                             const std::vector<ImagePlane>& tests, const MetricOptions& opts = {});
/// Pairs images with the same file name in two folders.
MetricReport evaluate_folders(const std::filesystem::path& ref_dir,
                              const std::filesystem::path& test_dir, const MetricOptions& opts = {});

// ---------------------------------------------------------------------------
// Objective comparison

struct ComparisonRow {
  std::string name;
  std::size_t height = 0, width = 0;
  /// Objective at y = the content image.
  double content_objective = 0.0;
  /// Objective of the feed-forward output.
  double feedforward_objective = 0.0;
  /// Optimization baseline from white noise (empty when disabled).
  IterTrace baseline;
};

struct ComparisonReport {
  ObjectiveSpec objective;
  std::vector<ComparisonRow> rows;

  /// Fraction of rows whose feed-forward objective is below the content
  /// objective.
  double feedforward_win_rate() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Evaluates one shared objective (content target = each image) on the
/// content image, on the network output and along an optimization baseline.
ComparisonReport compare_objectives(const std::vector<std::pair<std::string, ImagePlane>>& images,
                                    const ObjectiveSpec& objective, const Network& lossnet,
                                    const StyleTargets& style_grams, const Network& net,
                                    std::size_t baseline_iters, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Architecture analysis

/// Multiply-adds of all conv, conv_transpose and residual-block convolutions
/// for a C x height x width input. A transposed layer is counted as the
/// strided convolution it is the adjoint of (its zero taps are not counted).
std::uint64_t count_multiply_adds(const NetworkSpec& spec, std::size_t height, std::size_t width);

/// Largest input extent (in pixels, along one axis) that can influence a
/// single output pixel, ignoring image borders. Strided chains reduce to
/// r += (k - 1) * jump, jump *= stride.
std::size_t receptive_field(const NetworkSpec& spec);

/// Same quantity measured from the support of the input gradient of single
/// output pixels of a linearized copy of the network (positive weights, no
/// biases, batch norm or activations) on a size x size input. Bounded by the
/// input size.
std::size_t empirical_receptive_field(const NetworkSpec& spec, std::size_t size);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchRow {
  std::size_t size = 0;
  double feedforward_seconds = 0.0;  // median
  double baseline_seconds = 0.0;     // median
  std::size_t baseline_iters = 0;
  double speedup = 0.0;
  /// Every feed-forward repeat was faster than every baseline repeat.
  bool ordering_consistent = false;
  std::vector<double> feedforward_samples, baseline_samples;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  std::string to_table() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Reference timings from the original GPU benchmark, printed for context.
struct PublishedTiming {
  std::size_t size;
  double baseline_100, baseline_300, baseline_500, feedforward;
};
const std::vector<PublishedTiming>& published_timings();

struct BenchOptions {
  std::vector<std::size_t> sizes{64};
  std::size_t baseline_iters = 100;
  std::size_t feedforward_repeats = 5;
  std::size_t baseline_repeats = 1;
  std::uint64_t seed = 0;
};

/// Times the network against the optimization baseline on `content` resized
/// to each size. Runs single-threaded.
BenchReport benchmark(const Network& net, const ObjectiveSpec& objective, const Network& lossnet,
                      const StyleTargets& style_grams, const ImagePlane& content,
                      const BenchOptions& opts);

}  // namespace percept
