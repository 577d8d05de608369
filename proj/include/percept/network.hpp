// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "percept/autodiff.hpp"
#include "percept/image.hpp"
#include "percept/ops.hpp"

namespace percept {

enum class LayerKind {
  input,
  conv,
  conv_transpose,
  batch_norm,
  relu,
  scaled_tanh,
  residual_block,
  max_pool,
  output,
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One entry of a sequential network description.
///
/// conv / conv_transpose use in/out channels, kernel, stride and padding.
/// batch_norm and residual_block use `out_channels` as their width. A
/// residual block is conv-bn-relu-conv-bn added to its input.
struct LayerSpec {
  LayerKind kind = LayerKind::input;
  std::string name;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Padding padding = Padding::zero;
  bool bias = true;
  std::string tap;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-channel (x - mean) / stddev applied before the first layer. Empty
/// vectors mean no preprocessing.
struct Preprocessing {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const noexcept { return mean.empty(); }
  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

struct NetworkSpec {
  std::string family = "custom";
  std::size_t in_channels = 3;
  /// Input height and width must be multiples of this.
  std::size_t spatial_multiple = 1;
  std::vector<LayerSpec> layers;
  Preprocessing preprocessing;

  std::vector<std::string> taps() const;
  std::size_t out_channels() const;
  std::size_t residual_block_count() const;
  /// Checks channel chaining, tap uniqueness and preprocessing width.
  void validate() const;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Activation shape C x H x W.
using FeatureShape = std::array<std::size_t, 3>;

struct ShapeReport {
  FeatureShape output{};
  std::map<std::string, FeatureShape> taps;
};

/// Static shape inference for a C x H x W input.
ShapeReport infer_shapes(const NetworkSpec& spec, std::size_t height, std::size_t width);

struct StyleNetOptions {
  std::size_t width1 = 32, width2 = 64, width3 = 128;
  std::size_t residual_blocks = 5;
};
/// Downsample x4, residual body, learned upsample x4, 9x9 output conv with a
/// scaled tanh.
NetworkSpec build_style_net(const StyleNetOptions& opts = {});

struct SrNetOptions {
  std::size_t width = 64;
  std::size_t residual_blocks = 4;
};
/// Residual body at input resolution followed by log2(factor) learned 2x
/// upsampling layers. `factor` must be a power of two >= 2.
NetworkSpec build_sr_net(std::size_t factor, const SrNetOptions& opts = {});

/// Four stages of [conv3x3+relu, conv3x3+relu (tap relu{s}_2), max_pool] with
/// widths 8/16/32/64 and zero padding.
NetworkSpec build_mini_loss_net_spec();
/// Passes the input through unchanged; single tap "input".
NetworkSpec build_identity_loss_net_spec(std::size_t channels = 3);

/// Activations keyed by tap name.
using FeatureTaps = std::map<std::string, Tensor>;

struct ForwardOptions {
  Mode mode = Mode::eval;
  std::vector<std::string> taps;
  /// Bind parameters so backward() fills their gradients. Otherwise they are
  /// recorded as constants.
  bool track_parameters = false;
  /// Stop once every requested tap is produced.
  bool stop_after_taps = false;
  /// Receptive-field probe: skip biases, batch norm and activations; pool by
  /// summing.
  bool linearize = false;
};

struct ForwardResult {
  Var output;
  std::map<std::string, Var> taps;
};

/// A NetworkSpec with its parameters and batch-norm running statistics.
class Network {
public:
  Network() = default;
  /// Allocates zero parameters; running statistics start uninitialized.
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const;

  /// Batch-norm state keyed by layer name ("body.0.bn1" for blocks).
  std::map<std::string, BatchNormState>& batch_norm_states() noexcept { return bn_; }
  const std::map<std::string, BatchNormState>& batch_norm_states() const noexcept { return bn_; }

  /// Centred uniform weights with half-width sqrt(6 / (fan_in + fan_out)),
  /// zero biases, gamma 1, beta 0, running mean 0 / variance 1.
  void initialize(std::uint64_t seed);
  /// Like initialize() but with half-width sqrt(6 / fan_in).
  void initialize_he(std::uint64_t seed);

  void zero_grad();

  /// Mutating forward: train mode updates running statistics and
  /// `track_parameters` binds gradients.
  ForwardResult forward(Tape& tape, const Var& input, const ForwardOptions& opts);
  /// Eval-mode forward without parameter tracking; safe to call concurrently.
  ForwardResult forward(Tape& tape, const Var& input, const ForwardOptions& opts) const;

  /// Convenience eval forward on a plain batch.
  Tensor run(const Tensor& batch) const;

  friend bool operator==(const Network& a, const Network& b);

private:
  ForwardResult forward_impl(Tape& tape, const Var& input, const ForwardOptions& opts,
                             Network* mutable_self) const;
  void initialize_impl(std::uint64_t seed, bool he);
  std::size_t index_of(const std::string& name) const;

  NetworkSpec spec_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, BatchNormState> bn_;
};

inline constexpr std::uint64_t kMiniLossNetSeed = 0x5EEDF00DULL;

/// Builds and seeds the built-in mini loss network.
Network make_mini_loss_net(std::uint64_t seed = kMiniLossNetSeed);
Network make_identity_loss_net(std::size_t channels = 3);

/// Loss-network activations for an image or N x C x H x W batch. The loss
/// network's parameters never receive gradients; gradients flow to `image`.
/// Throws listing available taps when one is unknown.
std::map<std::string, Var> loss_net_features(const Network& lossnet, const Var& image,
                                             const std::vector<std::string>& taps);
FeatureTaps loss_net_features(const Network& lossnet, const ImagePlane& image,
                              const std::vector<std::string>& taps);

/// Training bookkeeping stored alongside parameters.
struct TrainingMeta {
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::string objective_digest;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  Network network;
  TrainingMeta meta;
  /// Optional additional tensors (optimizer moments), saved after the
  /// network parameters.
  std::map<std::string, Tensor> extra_tensors;
};

}  // namespace percept
