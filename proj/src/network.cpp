// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace percept {
namespace {

using nlohmann::json;

LayerSpec conv_layer(std::string name, std::size_t in, std::size_t out, std::size_t k,
                     std::size_t stride, Padding padding, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.name = std::move(name);
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = k;
  l.stride = stride;
  l.padding = padding;
  l.bias = bias;
  return l;
}

LayerSpec upsample_layer(std::string name, std::size_t in, std::size_t out, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::conv_transpose;
  l.name = std::move(name);
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = 3;
  l.stride = 2;
  l.bias = bias;
  return l;
}

LayerSpec simple_layer(LayerKind kind, std::string name, std::size_t channels = 0) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  l.out_channels = channels;
  return l;
}

LayerSpec residual_layer(std::string name, std::size_t channels) {
  LayerSpec l;
  l.kind = LayerKind::residual_block;
  l.name = std::move(name);
  l.in_channels = channels;
  l.out_channels = channels;
  l.kernel = 3;
  l.padding = Padding::reflect;
  l.bias = false;
  return l;
}

// conv (no bias) -> batch_norm -> relu
void push_conv_bn_relu(std::vector<LayerSpec>& layers, const LayerSpec& conv,
                       const std::string& suffix) {
  layers.push_back(conv);
  layers.push_back(simple_layer(LayerKind::batch_norm, "bn_" + suffix, conv.out_channels));
  layers.push_back(simple_layer(LayerKind::relu, "relu_" + suffix));
}

struct ParamDecl {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0, fan_out = 0;  // 0 for non-weight parameters
  double fill = 0.0;
};

void declare_conv(std::vector<ParamDecl>& out, const std::string& prefix, std::size_t in,
                  std::size_t outc, std::size_t k, bool bias) {
  out.push_back({prefix + ".weight", Shape{outc, in, k, k}, in * k * k, outc * k * k, 0.0});
  if (bias) out.push_back({prefix + ".bias", Shape{outc}, 0, 0, 0.0});
}

void declare_bn(std::vector<ParamDecl>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + ".gamma", Shape{c}, 0, 0, 1.0});
  out.push_back({prefix + ".beta", Shape{c}, 0, 0, 0.0});
}

std::vector<ParamDecl> declare_parameters(const NetworkSpec& spec) {
  std::vector<ParamDecl> decls;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        declare_conv(decls, l.name, l.in_channels, l.out_channels, l.kernel, l.bias);
        break;
      case LayerKind::conv_transpose: {
        const std::size_t k = l.kernel;
        decls.push_back({l.name + ".weight", Shape{l.in_channels, l.out_channels, k, k},
                         l.out_channels * k * k, l.in_channels * k * k, 0.0});
        if (l.bias) decls.push_back({l.name + ".bias", Shape{l.out_channels}, 0, 0, 0.0});
        break;
      }
      case LayerKind::batch_norm:
        declare_bn(decls, l.name, l.out_channels);
        break;
      case LayerKind::residual_block: {
        const std::size_t c = l.out_channels;
        declare_conv(decls, l.name + ".conv1", c, c, l.kernel, l.bias);
        declare_bn(decls, l.name + ".bn1", c);
        declare_conv(decls, l.name + ".conv2", c, c, l.kernel, l.bias);
        declare_bn(decls, l.name + ".bn2", c);
        break;
      }
      default:
        break;
    }
  }
  return decls;
}

std::vector<std::pair<std::string, std::size_t>> batch_norm_layers(const NetworkSpec& spec) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::batch_norm) out.emplace_back(l.name, l.out_channels);
    if (l.kind == LayerKind::residual_block) {
      out.emplace_back(l.name + ".bn1", l.out_channels);
      out.emplace_back(l.name + ".bn2", l.out_channels);
    }
  }
  return out;
}

std::string padding_name(Padding p) { return p == Padding::zero ? "zero" : "reflect"; }

Padding padding_from_name(const std::string& s) {
  if (s == "zero") return Padding::zero;
  if (s == "reflect") return Padding::reflect;
  throw Error("unknown padding mode '" + s + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::scaled_tanh: return "scaled_tanh";
    case LayerKind::residual_block: return "residual_block";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::output: return "output";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::input, LayerKind::conv, LayerKind::conv_transpose,
                      LayerKind::batch_norm, LayerKind::relu, LayerKind::scaled_tanh,
                      LayerKind::residual_block, LayerKind::max_pool, LayerKind::output}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown layer kind '" + name + "'");
}

std::vector<std::string> NetworkSpec::taps() const {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    if (!l.tap.empty()) out.push_back(l.tap);
  }
  return out;
}

std::size_t NetworkSpec::out_channels() const {
  std::size_t c = in_channels;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_transpose) c = l.out_channels;
  }
  return c;
}

std::size_t NetworkSpec::residual_block_count() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const auto& l) {
    return l.kind == LayerKind::residual_block;
  }));
}

void NetworkSpec::validate() const {
  if (in_channels == 0) throw Error("network spec: in_channels must be positive");
  if (!preprocessing.empty() && (preprocessing.mean.size() != in_channels ||
                                 preprocessing.stddev.size() != in_channels)) {
    throw Error("network spec: preprocessing has " + std::to_string(preprocessing.mean.size()) +
                " channels, network input has " + std::to_string(in_channels));
  }
  std::set<std::string> tap_names, layer_names;
  std::size_t c = in_channels;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + l.name + ")";
    if (!l.tap.empty() && !tap_names.insert(l.tap).second) {
      throw Error("network spec: duplicate tap name '" + l.tap + "'");
    }
    if (!l.name.empty() && !layer_names.insert(l.name).second) {
      throw Error("network spec: duplicate layer name '" + l.name + "'");
    }
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::conv_transpose:
        if (l.in_channels != c) {
          throw Error("network spec: " + where + " expects " + std::to_string(l.in_channels) +
                      " input channels but receives " + std::to_string(c));
        }
        if (l.kernel % 2 == 0 || l.out_channels == 0) {
          throw Error("network spec: " + where + " needs an odd kernel and positive width");
        }
        if (l.kind == LayerKind::conv_transpose && l.stride != 2) {
          throw Error("network spec: " + where + " must upsample by 2");
        }
        c = l.out_channels;
        break;
      case LayerKind::batch_norm:
      case LayerKind::residual_block:
        if (l.out_channels != c) {
          throw Error("network spec: " + where + " has width " + std::to_string(l.out_channels) +
                      " but receives " + std::to_string(c) + " channels");
        }
        break;
      default:
        break;
    }
  }
}

json NetworkSpec::to_json() const {
  json j;
  j["family"] = family;
  j["in_channels"] = in_channels;
  j["spatial_multiple"] = spatial_multiple;
  j["preprocessing"] = {{"mean", preprocessing.mean}, {"stddev", preprocessing.stddev}};
  json arr = json::array();
  for (const auto& l : layers) {
    json e;
    e["kind"] = to_string(l.kind);
    e["name"] = l.name;
    e["in_channels"] = l.in_channels;
    e["out_channels"] = l.out_channels;
    e["kernel"] = l.kernel;
    e["stride"] = l.stride;
    e["padding"] = padding_name(l.padding);
    e["bias"] = l.bias;
    e["tap"] = l.tap;
    arr.push_back(std::move(e));
  }
  j["layers"] = std::move(arr);
  return j;
}

NetworkSpec NetworkSpec::from_json(const json& j) {
  NetworkSpec s;
  s.family = j.at("family").get<std::string>();
  s.in_channels = j.at("in_channels").get<std::size_t>();
  s.spatial_multiple = j.at("spatial_multiple").get<std::size_t>();
  s.preprocessing.mean = j.at("preprocessing").at("mean").get<std::vector<double>>();
  s.preprocessing.stddev = j.at("preprocessing").at("stddev").get<std::vector<double>>();
  for (const auto& e : j.at("layers")) {
    LayerSpec l;
    l.kind = layer_kind_from_string(e.at("kind").get<std::string>());
    l.name = e.at("name").get<std::string>();
    l.in_channels = e.at("in_channels").get<std::size_t>();
    l.out_channels = e.at("out_channels").get<std::size_t>();
    l.kernel = e.at("kernel").get<std::size_t>();
    l.stride = e.at("stride").get<std::size_t>();
    l.padding = padding_from_name(e.at("padding").get<std::string>());
    l.bias = e.at("bias").get<bool>();
    l.tap = e.at("tap").get<std::string>();
    s.layers.push_back(std::move(l));
  }
  s.validate();
  return s;
}

ShapeReport infer_shapes(const NetworkSpec& spec, std::size_t height, std::size_t width) {
  if (height % spec.spatial_multiple != 0 || width % spec.spatial_multiple != 0) {
    throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not a multiple of " + std::to_string(spec.spatial_multiple));
  }
  ShapeReport report;
  std::size_t c = spec.in_channels, h = height, w = width;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        const std::size_t pad = l.kernel / 2;
        if (l.padding == Padding::reflect && (pad >= h || pad >= w)) {
          throw ShapeError("layer " + l.name + ": reflect padding " + std::to_string(pad) +
                           " needs spatial size above " + std::to_string(pad));
        }
        h = (h + 2 * pad - l.kernel) / l.stride + 1;
        w = (w + 2 * pad - l.kernel) / l.stride + 1;
        c = l.out_channels;
        break;
      }
      case LayerKind::conv_transpose:
        h *= 2;
        w *= 2;
        c = l.out_channels;
        break;
      case LayerKind::max_pool:
        if (h % 2 || w % 2) {
          throw ShapeError("layer " + l.name + ": max_pool needs even spatial dims, got " +
                           std::to_string(h) + "x" + std::to_string(w));
        }
        h /= 2;
        w /= 2;
        break;
      case LayerKind::residual_block:
        if (l.padding == Padding::reflect && (l.kernel / 2 >= h || l.kernel / 2 >= w)) {
          throw ShapeError("layer " + l.name + ": spatial size too small for reflect padding");
        }
        break;
      default:
        break;
    }
    if (!l.tap.empty()) report.taps[l.tap] = {c, h, w};
  }
  report.output = {c, h, w};
  return report;
}

NetworkSpec build_style_net(const StyleNetOptions& opts) {
  NetworkSpec s;
  s.family = "style";
  s.in_channels = 3;
  s.spatial_multiple = 4;
  auto& L = s.layers;
  L.push_back(simple_layer(LayerKind::input, "input"));
  push_conv_bn_relu(L, conv_layer("conv_in", 3, opts.width1, 9, 1, Padding::reflect, false), "in");
  push_conv_bn_relu(L, conv_layer("down1", opts.width1, opts.width2, 3, 2, Padding::reflect, false),
                    "down1");
  push_conv_bn_relu(L, conv_layer("down2", opts.width2, opts.width3, 3, 2, Padding::reflect, false),
                    "down2");
  for (std::size_t i = 0; i < opts.residual_blocks; ++i) {
    L.push_back(residual_layer("res" + std::to_string(i + 1), opts.width3));
  }
  push_conv_bn_relu(L, upsample_layer("up1", opts.width3, opts.width2, false), "up1");
  push_conv_bn_relu(L, upsample_layer("up2", opts.width2, opts.width1, false), "up2");
  L.push_back(conv_layer("conv_out", opts.width1, 3, 9, 1, Padding::reflect, true));
  L.push_back(simple_layer(LayerKind::scaled_tanh, "tanh_out"));
  L.push_back(simple_layer(LayerKind::output, "output"));
  s.validate();
  return s;
}

NetworkSpec build_sr_net(std::size_t factor, const SrNetOptions& opts) {
  if (factor < 2 || (factor & (factor - 1)) != 0) {
    throw Error("super-resolution factor must be a power of two >= 2, got " +
                std::to_string(factor));
  }
  NetworkSpec s;
  s.family = "sr_x" + std::to_string(factor);
  s.in_channels = 3;
  s.spatial_multiple = 1;
  auto& L = s.layers;
  L.push_back(simple_layer(LayerKind::input, "input"));
  push_conv_bn_relu(L, conv_layer("conv_in", 3, opts.width, 9, 1, Padding::reflect, false), "in");
  for (std::size_t i = 0; i < opts.residual_blocks; ++i) {
    L.push_back(residual_layer("res" + std::to_string(i + 1), opts.width));
  }
  std::size_t up = 0;
  for (std::size_t f = factor; f > 1; f /= 2) {
    const std::string name = "up" + std::to_string(++up);
    push_conv_bn_relu(L, upsample_layer(name, opts.width, opts.width, false), name);
  }
  L.push_back(conv_layer("conv_out", opts.width, 3, 9, 1, Padding::reflect, true));
  L.push_back(simple_layer(LayerKind::scaled_tanh, "tanh_out"));
  L.push_back(simple_layer(LayerKind::output, "output"));
  s.validate();
  return s;
}

NetworkSpec build_mini_loss_net_spec() {
  NetworkSpec s;
  s.family = "mini_vgg";
  s.in_channels = 3;
  s.spatial_multiple = 16;
  s.preprocessing.mean = {127.5, 127.5, 127.5};
  s.preprocessing.stddev = {1.0, 1.0, 1.0};
  auto& L = s.layers;
  L.push_back(simple_layer(LayerKind::input, "input"));
  const std::size_t widths[] = {8, 16, 32, 64};
  std::size_t c = 3;
  for (std::size_t stage = 1; stage <= 4; ++stage) {
    const std::string st = std::to_string(stage);
    const std::size_t w = widths[stage - 1];
    L.push_back(conv_layer("conv" + st + "_1", c, w, 3, 1, Padding::zero, true));
    L.push_back(simple_layer(LayerKind::relu, "relu" + st + "_1"));
    L.push_back(conv_layer("conv" + st + "_2", w, w, 3, 1, Padding::zero, true));
    LayerSpec r = simple_layer(LayerKind::relu, "relu" + st + "_2");
    r.tap = "relu" + st + "_2";
    L.push_back(r);
    L.push_back(simple_layer(LayerKind::max_pool, "pool" + st));
    c = w;
  }
  L.push_back(simple_layer(LayerKind::output, "output"));
  s.validate();
  return s;
}

NetworkSpec build_identity_loss_net_spec(std::size_t channels) {
  NetworkSpec s;
  s.family = "identity";
  s.in_channels = channels;
  LayerSpec in = simple_layer(LayerKind::input, "input");
  in.tap = "input";
  s.layers.push_back(in);
  s.layers.push_back(simple_layer(LayerKind::output, "output"));
  s.validate();
  return s;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const ParamDecl& d : declare_parameters(spec_)) {
    index_[d.name] = params_.size();
    params_.emplace_back(d.name, Tensor(d.shape, d.fill));
  }
  for (const auto& [name, channels] : batch_norm_layers(spec_)) bn_[name] = BatchNormState{};
}

std::size_t Network::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("network has no parameter named '" + name + "'");
  return it->second;
}

Parameter& Network::parameter(const std::string& name) { return params_[index_of(name)]; }
const Parameter& Network::parameter(const std::string& name) const {
  return params_[index_of(name)];
}
bool Network::has_parameter(const std::string& name) const { return index_.count(name) > 0; }

void Network::initialize(std::uint64_t seed) { initialize_impl(seed, false); }
void Network::initialize_he(std::uint64_t seed) { initialize_impl(seed, true); }

void Network::initialize_impl(std::uint64_t seed, bool he) {
  Rng rng(seed);
  const auto decls = declare_parameters(spec_);
  for (std::size_t i = 0; i < decls.size(); ++i) {
    const ParamDecl& d = decls[i];
    Tensor& v = params_[i].value;
    if (d.fan_in == 0) {
      v.fill(d.fill);
      continue;
    }
    const double fan = he ? static_cast<double>(d.fan_in) : static_cast<double>(d.fan_in + d.fan_out);
    const double half_width = std::sqrt(6.0 / fan);
    for (double& x : v.data()) x = rng.uniform(-half_width, half_width);
    round_to_float(v);
  }
  for (const auto& [name, channels] : batch_norm_layers(spec_)) {
    bn_[name] = BatchNormState::fresh(channels);
  }
  zero_grad();
}

void Network::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ForwardResult Network::forward(Tape& tape, const Var& input, const ForwardOptions& opts) {
  return forward_impl(tape, input, opts, this);
}

ForwardResult Network::forward(Tape& tape, const Var& input, const ForwardOptions& opts) const {
  if (opts.mode != Mode::eval || opts.track_parameters) {
    throw Error("forward on a const network supports eval mode without parameter tracking only");
  }
  return forward_impl(tape, input, opts, nullptr);
}

ForwardResult Network::forward_impl(Tape& tape, const Var& input, const ForwardOptions& opts,
                                    Network* self) const {
  const Tensor& x0 = input.value();
  if (x0.rank() != 4) {
    throw ShapeError("network input must be N x C x H x W, got " + to_string(x0.shape()));
  }
  if (x0.dim(1) != spec_.in_channels) {
    throw ShapeError("network expects " + std::to_string(spec_.in_channels) +
                     " input channels, got " + std::to_string(x0.dim(1)));
  }
  if (x0.dim(2) % spec_.spatial_multiple != 0 || x0.dim(3) % spec_.spatial_multiple != 0) {
    throw ShapeError("network input spatial size " + std::to_string(x0.dim(2)) + "x" +
                     std::to_string(x0.dim(3)) + " must be a multiple of " +
                     std::to_string(spec_.spatial_multiple));
  }
  const auto available = spec_.taps();
  for (const auto& t : opts.taps) {
    if (std::find(available.begin(), available.end(), t) == available.end()) {
      throw Error("unknown tap '" + t + "'; available taps: " + join(available));
    }
  }

  auto bind = [&](const std::string& name) -> Var {
    if (opts.track_parameters) return tape.parameter(self->parameter(name));
    return tape.constant(parameter(name).value);
  };
  auto bn = [&](const Var& x, const std::string& name) -> Var {
    if (opts.linearize) return x;
    const Var gamma = bind(name + ".gamma");
    const Var beta = bind(name + ".beta");
    if (self) return batch_norm(x, gamma, beta, self->bn_.at(name), opts.mode);
    BatchNormState state = bn_.at(name);
    return batch_norm(x, gamma, beta, state, opts.mode);
  };
  auto conv = [&](const Var& x, const std::string& name, std::size_t k, std::size_t stride,
                  Padding padding, bool bias) -> Var {
    const Var w = bind(name + ".weight");
    const Var b = bias && !opts.linearize ? bind(name + ".bias") : Var();
    return conv2d(x, w, b, Conv2dOptions{stride, k / 2, padding});
  };

  ForwardResult result;
  Var x = input;
  if (!spec_.preprocessing.empty()) {
    x = normalize_channels(x, spec_.preprocessing.mean, spec_.preprocessing.stddev);
  }
  for (const LayerSpec& l : spec_.layers) {
    switch (l.kind) {
      case LayerKind::input:
      case LayerKind::output:
        break;
      case LayerKind::conv:
        x = conv(x, l.name, l.kernel, l.stride, l.padding, l.bias);
        break;
      case LayerKind::conv_transpose: {
        const Var w = bind(l.name + ".weight");
        const Var b = l.bias && !opts.linearize ? bind(l.name + ".bias") : Var();
        x = conv2d_transpose(x, w, b, 2);
        break;
      }
      case LayerKind::batch_norm:
        x = bn(x, l.name);
        break;
      case LayerKind::relu:
        if (!opts.linearize) x = relu(x);
        break;
      case LayerKind::scaled_tanh:
        if (!opts.linearize) x = scaled_tanh(x);
        break;
      case LayerKind::max_pool:
        x = opts.linearize ? sum_pool2d(x) : max_pool2d(x);
        break;
      case LayerKind::residual_block: {
        Var y = conv(x, l.name + ".conv1", l.kernel, 1, l.padding, l.bias);
        y = bn(y, l.name + ".bn1");
        if (!opts.linearize) y = relu(y);
        y = conv(y, l.name + ".conv2", l.kernel, 1, l.padding, l.bias);
        y = bn(y, l.name + ".bn2");
        x = add(x, y);
        break;
      }
    }
    if (!l.tap.empty() &&
        std::find(opts.taps.begin(), opts.taps.end(), l.tap) != opts.taps.end()) {
      result.taps[l.tap] = x;
      if (opts.stop_after_taps && result.taps.size() == opts.taps.size()) break;
    }
  }
  result.output = x;
  return result;
}

Tensor Network::run(const Tensor& batch) const {
  Tape tape;
  const Var in = tape.constant(batch);
  return forward(tape, in, ForwardOptions{}).output.value();
}

bool operator==(const Network& a, const Network& b) {
  if (!(a.spec_ == b.spec_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  for (const auto& [name, s] : a.bn_) {
    auto it = b.bn_.find(name);
    if (it == b.bn_.end() || it->second.initialized != s.initialized ||
        !(it->second.running_mean == s.running_mean) || !(it->second.running_var == s.running_var)) {
      return false;
    }
  }
  return true;
}

Network make_mini_loss_net(std::uint64_t seed) {
  Network net(build_mini_loss_net_spec());
  net.initialize_he(seed);
  // Positive biases keep most early ReLUs active, so shallow taps retain
  // most of the image and information is lost mainly through pooling. Much
  // larger values make the Gram matrices mean-dominated and style transfer
  // generalizes worse across image sizes.
  for (Parameter& p : net.parameters()) {
    if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) p.value.fill(30.0);
  }
  return net;
}

Network make_identity_loss_net(std::size_t channels) {
  return Network(build_identity_loss_net_spec(channels));
}

std::map<std::string, Var> loss_net_features(const Network& lossnet, const Var& image,
                                             const std::vector<std::string>& taps) {
  ForwardOptions opts;
  opts.taps = taps;
  opts.stop_after_taps = true;
  return lossnet.forward(image.tape(), image, opts).taps;
}

FeatureTaps loss_net_features(const Network& lossnet, const ImagePlane& image,
                              const std::vector<std::string>& taps) {
  Tape tape;
  const Var in = tape.constant(image.as_batch());
  FeatureTaps out;
  for (const auto& [name, v] : loss_net_features(lossnet, in, taps)) {
    const Tensor& t = v.value();
    out[name] = t.reshaped(Shape{t.dim(1), t.dim(2), t.dim(3)});
  }
  return out;
}

}  // namespace percept
