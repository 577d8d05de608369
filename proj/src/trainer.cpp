// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace percept {
namespace {

using nlohmann::json;

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kCropStream = 0x4352;
constexpr std::uint64_t kInitStream = 0x494e;

// Training images in a fixed order; prepared lazily and cached.
class Dataset {
public:
  Dataset(const TrainConfig& cfg) : cfg_(cfg) {
    if (!cfg.images.empty()) {
      count_ = cfg.images.size();
    } else {
      if (cfg.data_dir.empty()) throw Error("no training data: set a data directory");
      paths_ = list_images(cfg.data_dir);
      count_ = paths_.size();
      if (count_ == 0) throw Error(cfg.data_dir.string() + ": no images found");
    }
    if (count_ < cfg.batch_size) {
      throw Error("training set has " + std::to_string(count_) + " images, fewer than the batch size " +
                  std::to_string(cfg.batch_size));
    }
    cache_.resize(count_);
  }

  std::size_t size() const { return count_; }

  const ImagePlane& get(std::size_t i) {
    if (!cache_[i]) {
      ImagePlane img = cfg_.images.empty() ? load_image(paths_[i]) : cfg_.images[i];
      if (img.colorspace() != ColorSpace::rgb) {
        throw Error(describe(i) + ": expected an RGB image");
      }
      if (cfg_.task == Task::style) {
        img = center_crop_square(img);
        if (img.height() != cfg_.image_size) {
          img = resize_bicubic(img, cfg_.image_size, cfg_.image_size);
        }
      } else if (img.height() < cfg_.image_size || img.width() < cfg_.image_size) {
        throw Error(describe(i) + ": smaller than the " + std::to_string(cfg_.image_size) +
                    "px training crop");
      }
      cache_[i] = std::move(img);
    }
    return *cache_[i];
  }

  std::string describe(std::size_t i) const {
    return paths_.empty() ? "training image " + std::to_string(i) : paths_[i].string();
  }

  /// Dataset index of sample k in the seeded epoch-wise shuffled stream.
  std::size_t sample_index(std::size_t k) {
    const std::size_t epoch = k / count_;
    if (epoch != epoch_) {
      order_.resize(count_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng rng(derive_seed(cfg_.seed, kShuffleStream, epoch));
      for (std::size_t i = count_; i > 1; --i) std::swap(order_[i - 1], order_[rng.index(i)]);
      epoch_ = epoch;
    }
    return order_[k % count_];
  }

private:
  const TrainConfig& cfg_;
  std::vector<std::filesystem::path> paths_;
  std::size_t count_ = 0;
  std::vector<std::optional<ImagePlane>> cache_;
  std::vector<std::size_t> order_;
  std::size_t epoch_ = static_cast<std::size_t>(-1);
};

ImagePlane style_target_image(const TrainConfig& cfg) {
  if (cfg.style) return *cfg.style;
  if (cfg.style_path.empty()) throw Error("style training needs a style image");
  return load_image(cfg.style_path);
}

void round_batch_norm(Network& net) {
  for (auto& [_, st] : net.batch_norm_states()) {
    if (!st.initialized) continue;
    round_to_float(st.running_mean);
    round_to_float(st.running_var);
  }
}

json config_json(const TrainConfig& cfg) {
  return {{"task", to_string(cfg.task)},
          {"objective", cfg.effective_objective().to_json()},
          {"image_size", cfg.image_size},
          {"factor", cfg.factor},
          {"sr_loss", to_string(cfg.sr_loss)},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate}};
}

Checkpoint make_checkpoint(const Network& net, const TrainConfig& cfg, const AdamState& adam,
                           std::size_t iteration) {
  Checkpoint ck;
  ck.network = net;
  ck.meta.iteration = iteration;
  ck.meta.seed = cfg.seed;
  ck.meta.objective_digest = cfg.effective_objective().digest();
  ck.meta.extra = {{"config", config_json(cfg)}, {"adam_step", adam.step}};
  for (const auto& [name, t] : adam.m) ck.extra_tensors["adam.m/" + name] = t;
  for (const auto& [name, t] : adam.v) ck.extra_tensors["adam.v/" + name] = t;
  return ck;
}

// Shared loop. `make_batch` fills (input, target) for an iteration.
using BatchFn = std::function<void(std::size_t iteration, Tensor& input, ObjectiveTargets& targets)>;

TrainResult run_training(const TrainConfig& cfg, const Network& lossnet, Network net,
                         const ObjectiveSpec& objective, const BatchFn& make_batch,
                         const std::optional<Checkpoint>& resume, const TrainHooks& hooks) {
  AdamState adam;
  std::size_t start = 1;
  if (resume) {
    if (!(resume->network.spec() == net.spec())) {
      throw Error("resume checkpoint was trained with a different network");
    }
    if (resume->meta.objective_digest != objective.digest()) {
      throw Error("resume checkpoint was trained with a different objective");
    }
    net = resume->network;
    start = resume->meta.iteration + 1;
    adam.step = resume->meta.extra.value("adam_step", std::uint64_t{0});
    for (const auto& [name, t] : resume->extra_tensors) {
      if (name.rfind("adam.m/", 0) == 0) adam.m[name.substr(7)] = t;
      if (name.rfind("adam.v/", 0) == 0) adam.v[name.substr(7)] = t;
    }
  }

  AdamOptions aopts;
  aopts.learning_rate = cfg.learning_rate;
  aopts.single_precision = true;

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t it = start; it <= cfg.iterations; ++it) {
    Tensor input;
    ObjectiveTargets targets;
    make_batch(it, input, targets);

    net.zero_grad();
    Tape tape;
    const Var x = tape.constant(input);
    ForwardOptions fo;
    fo.mode = Mode::train;
    fo.track_parameters = true;
    const Var y = net.forward(tape, x, fo).output;
    ObjectiveTerms terms = build_objective(objective, lossnet, y, targets);
    if (!std::isfinite(terms.breakdown.total)) {
      throw Error("non-finite loss at iteration " + std::to_string(it));
    }
    tape.backward(terms.total);
    if (hooks.on_step) hooks.on_step(it, terms.breakdown, net);
    try {
      adam_step(net.parameters(), adam, aopts);
    } catch (const Error& ex) {
      throw Error(std::string(ex.what()) + " at iteration " + std::to_string(it));
    }
    round_batch_norm(net);

    if ((it - start) % cfg.log_stride == 0 || it == cfg.iterations) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.entries.push_back({it, terms.breakdown, secs});
    }
    if (cfg.checkpoint_stride > 0 && it % cfg.checkpoint_stride == 0 && !cfg.checkpoint_path.empty()) {
      save_checkpoint(make_checkpoint(net, cfg, adam, it), cfg.checkpoint_path);
    }
  }
  const std::size_t last = std::max<std::size_t>(cfg.iterations, start - 1);
  result.checkpoint = make_checkpoint(net, cfg, adam, last);
  if (!cfg.checkpoint_path.empty()) save_checkpoint(result.checkpoint, cfg.checkpoint_path);
  return result;
}

}  // namespace

void adam_step(std::vector<Parameter>& params, AdamState& state, const AdamOptions& opts) {
  for (const Parameter& p : params) {
    if (p.grad.shape() != p.value.shape()) {
      throw ShapeError("gradient of '" + p.name + "' has shape " + to_string(p.grad.shape()));
    }
    if (!p.grad.all_finite()) throw Error("non-finite gradient for parameter '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (Parameter& p : params) {
    auto [mit, m_new] = state.m.try_emplace(p.name, p.value.shape());
    auto [vit, v_new] = state.v.try_emplace(p.name, p.value.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (m.shape() != p.value.shape() || v.shape() != p.value.shape()) {
      throw ShapeError("Adam moments for '" + p.name + "' do not match the parameter shape");
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g;
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g * g;
      p.value[i] -= opts.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts.epsilon);
    }
    if (opts.single_precision) {
      round_to_float(m);
      round_to_float(v);
      round_to_float(p.value);
    }
  }
}

SrPair make_sr_pair(const ImagePlane& high, std::size_t factor) {
  if (factor < 1) throw Error("super-resolution factor must be >= 1");
  if (high.height() % factor != 0 || high.width() % factor != 0) {
    throw ShapeError("patch " + std::to_string(high.height()) + "x" + std::to_string(high.width()) +
                     " is not divisible by factor " + std::to_string(factor));
  }
  ImagePlane low = resize_bicubic(gaussian_blur(high, 1.0), high.height() / factor,
                                  high.width() / factor);
  return {std::move(low), high};
}

std::string to_string(Task t) { return t == Task::style ? "style" : "sr"; }

Task task_from_string(const std::string& s) {
  if (s == "style") return Task::style;
  if (s == "sr") return Task::sr;
  throw Error("unknown task '" + s + "' (expected style or sr)");
}

std::string to_string(SrLoss l) { return l == SrLoss::pixel ? "pixel" : "feat"; }

SrLoss sr_loss_from_string(const std::string& s) {
  if (s == "pixel") return SrLoss::pixel;
  if (s == "feat") return SrLoss::feat;
  throw Error("unknown SR loss '" + s + "' (expected pixel or feat)");
}

TrainConfig TrainConfig::style_preset() {
  TrainConfig c;
  c.task = Task::style;
  c.objective.lambda_c = 1.0;
  c.objective.lambda_s = 5.0;
  c.objective.lambda_tv = 1e-5;
  c.image_size = 256;
  c.batch_size = 4;
  c.iterations = 40000;
  c.learning_rate = 1e-3;
  return c;
}

TrainConfig TrainConfig::sr_preset(std::size_t factor) {
  TrainConfig c;
  c.task = Task::sr;
  c.objective.lambda_c = 1.0;
  c.objective.lambda_s = 0.0;
  c.objective.lambda_tv = 1e-5;
  c.objective.content_tap = "relu2_2";
  c.sr_loss = SrLoss::feat;
  c.factor = factor;
  c.image_size = 288;
  c.batch_size = 4;
  c.iterations = 200000;
  c.learning_rate = 1e-3;
  return c;
}

TrainConfig TrainConfig::desk_style_preset() {
  TrainConfig c = style_preset();
  c.objective.lambda_c = 1.0;
  c.objective.lambda_s = 50.0;
  c.objective.lambda_tv = 1e-5;
  c.image_size = 64;
  c.batch_size = 2;
  c.iterations = 300;
  c.learning_rate = 1e-3;
  c.style_net = {16, 32, 64, 3};
  return c;
}

TrainConfig TrainConfig::desk_sr_preset() {
  TrainConfig c = sr_preset(4);
  c.sr_loss = SrLoss::pixel;
  c.objective.lambda_tv = 0.0;
  c.image_size = 96;
  c.batch_size = 4;
  c.iterations = 500;
  c.learning_rate = 1e-3;
  c.sr_net = {32, 4};
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (iterations < 1) throw Error("iteration count must be >= 1");
  if (log_stride < 1) throw Error("log stride must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (task == Task::sr) {
    if (factor < 2 || (factor & (factor - 1)) != 0) {
      throw Error("super-resolution factor must be a power of two >= 2");
    }
    if (image_size % factor != 0) {
      throw Error("crop size " + std::to_string(image_size) + " is not divisible by factor " +
                  std::to_string(factor));
    }
    if (image_size / factor < 5) {
      throw Error("crop size " + std::to_string(image_size) + " leaves a low-resolution side of " +
                  std::to_string(image_size / factor) + "; the 9x9 input layer needs at least 5");
    }
  } else {
    if (factor != 0) throw Error("factor is only valid for super-resolution training");
    if (image_size % 4 != 0) throw Error("style training size must be a multiple of 4");
    if (objective.lambda_s > 0.0 && !style && style_path.empty()) {
      throw Error("style training needs a style image");
    }
  }
}

ObjectiveSpec TrainConfig::effective_objective() const {
  if (task == Task::style) return objective;
  ObjectiveSpec o;
  o.lambda_s = 0.0;
  o.style_taps = {};
  o.lambda_tv = objective.lambda_tv;
  o.content_tap = objective.content_tap;
  if (sr_loss == SrLoss::pixel) {
    o.lambda_c = 0.0;
    o.lambda_pixel = 1.0;
  } else {
    o.lambda_c = 1.0;
    o.lambda_pixel = 0.0;
  }
  return o;
}

TrainResult train_style(const TrainConfig& config, const Network& lossnet,
                        const std::optional<Checkpoint>& resume, const TrainHooks& hooks) {
  if (config.task != Task::style) throw Error("train_style needs a style config");
  config.validate();
  const ObjectiveSpec objective = config.effective_objective();
  objective.validate(lossnet);

  Dataset data(config);
  StyleTargets grams;
  if (objective.lambda_s > 0.0) {
    grams = style_targets(lossnet, style_target_image(config), objective.style_taps);
  }

  Network net(build_style_net(config.style_net));
  net.initialize(derive_seed(config.seed, kInitStream));

  auto batch = [&](std::size_t it, Tensor& input, ObjectiveTargets& targets) {
    std::vector<ImagePlane> imgs;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      imgs.push_back(data.get(data.sample_index((it - 1) * config.batch_size + b)));
    }
    input = stack_batch(imgs);
    targets.content = input;
    targets.style_grams = grams;
  };
  return run_training(config, lossnet, std::move(net), objective, batch, resume, hooks);
}

TrainResult train_sr(const TrainConfig& config, const Network& lossnet,
                     const std::optional<Checkpoint>& resume, const TrainHooks& hooks) {
  if (config.task != Task::sr) throw Error("train_sr needs a super-resolution config");
  config.validate();
  const ObjectiveSpec objective = config.effective_objective();
  objective.validate(lossnet);

  Dataset data(config);
  Network net(build_sr_net(config.factor, config.sr_net));
  net.initialize(derive_seed(config.seed, kInitStream));

  const std::size_t s = config.image_size;
  auto batch = [&](std::size_t it, Tensor& input, ObjectiveTargets& targets) {
    std::vector<ImagePlane> lows, highs;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const ImagePlane& img = data.get(data.sample_index((it - 1) * config.batch_size + b));
      Rng rng(derive_seed(config.seed, kCropStream + it, b));
      const std::size_t top = rng.index(img.height() - s + 1);
      const std::size_t left = rng.index(img.width() - s + 1);
      SrPair pair = make_sr_pair(crop(img, top, left, s, s), config.factor);
      lows.push_back(std::move(pair.low));
      highs.push_back(std::move(pair.high));
    }
    input = stack_batch(lows);
    Tensor hr = stack_batch(highs);
    if (objective.lambda_pixel > 0.0) targets.pixel = hr;
    if (objective.lambda_c > 0.0) targets.content = std::move(hr);
  };
  return run_training(config, lossnet, std::move(net), objective, batch, resume, hooks);
}

TrainResult train(const TrainConfig& config, const Network& lossnet,
                  const std::optional<Checkpoint>& resume, const TrainHooks& hooks) {
  return config.task == Task::style ? train_style(config, lossnet, resume, hooks)
                                    : train_sr(config, lossnet, resume, hooks);
}

ImagePlane apply_network(const Network& net, const ImagePlane& input) {
  if (input.channels() != net.spec().in_channels) {
    throw ShapeError("network expects " + std::to_string(net.spec().in_channels) +
                     " channels, image has " + std::to_string(input.channels()));
  }
  return ImagePlane::from_batch(net.run(input.as_batch()), 0, input.colorspace());
}

}  // namespace percept
