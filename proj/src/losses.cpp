// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/losses.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <Eigen/Dense>

namespace percept {
namespace {

using nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Splits a 3-D map or 4-D batch into (samples, C, H*W).
struct Layout {
  std::size_t n, c, hw;
};

Layout layout_of(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1] * s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2] * s[3]};
  throw ShapeError(std::string(op) + ": expected C x H x W or N x C x H x W, got " + to_string(s));
}

Var mean_squared_difference(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  layout_of(a.shape(), op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const double inv = 1.0 / static_cast<double>(av.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return a.tape().record(Tensor::scalar(acc * inv), {a, b},
                         [a, b, inv](Tape& tape, const Tensor& g) {
                           const double k = 2.0 * inv * g[0];
                           const Tensor& av = a.value();
                           const Tensor& bv = b.value();
                           if (tape.wants_grad(a)) {
                             Tensor& ga = tape.grad_slot(a.id());
                             for (std::size_t i = 0; i < av.size(); ++i) ga[i] += k * (av[i] - bv[i]);
                           }
                           if (tape.wants_grad(b)) {
                             Tensor& gb = tape.grad_slot(b.id());
                             for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= k * (av[i] - bv[i]);
                           }
                         });
}

double tv_value(const Tensor& y, const Layout& l, std::size_t h, std::size_t w) {
  double acc = 0.0;
  for (std::size_t p = 0; p < l.n * l.c; ++p) {
    const double* img = y.data().data() + p * l.hw;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double v = img[i * w + j];
        if (i + 1 < h) {
          const double d = img[(i + 1) * w + j] - v;
          acc += d * d;
        }
        if (j + 1 < w) {
          const double d = img[i * w + j + 1] - v;
          acc += d * d;
        }
      }
    }
  }
  return acc / static_cast<double>(l.n);
}

Tensor gram_value(const Tensor& f, const Layout& l) {
  const double inv = 1.0 / static_cast<double>(l.c * l.hw);
  Tensor out(l.n == 1 && f.rank() == 3 ? Shape{l.c, l.c} : Shape{l.n, l.c, l.c});
  for (std::size_t n = 0; n < l.n; ++n) {
    ConstMatMap psi(f.data().data() + n * l.c * l.hw, static_cast<long>(l.c),
                    static_cast<long>(l.hw));
    MatMap g(out.data().data() + n * l.c * l.c, static_cast<long>(l.c), static_cast<long>(l.c));
    g.setZero();
    g.selfadjointView<Eigen::Lower>().rankUpdate(psi, inv);
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Tensor as_batch4(const Tensor& t) {
  if (t.rank() == 3) return t.reshaped(Shape{1, t.dim(0), t.dim(1), t.dim(2)});
  return t;
}

}  // namespace

Var feature_loss(const Var& f_hat, const Var& f_target) {
  return mean_squared_difference(f_hat, f_target, "feature_loss");
}

Var pixel_loss(const Var& y_hat, const Var& y) {
  return mean_squared_difference(y_hat, y, "pixel_loss");
}

Var gram(const Var& features) {
  const Layout l = layout_of(features.shape(), "gram");
  Tensor out = gram_value(features.value(), l);
  return features.tape().record(
      std::move(out), {features}, [features, l](Tape& tape, const Tensor& g) {
        // dG/dpsi contribution: (dG + dG^T) psi / CHW.
        const double inv = 1.0 / static_cast<double>(l.c * l.hw);
        const Tensor& f = features.value();
        Tensor& gf = tape.grad_slot(features.id());
        for (std::size_t n = 0; n < l.n; ++n) {
          ConstMatMap psi(f.data().data() + n * l.c * l.hw, static_cast<long>(l.c),
                          static_cast<long>(l.hw));
          ConstMatMap dg(g.data().data() + n * l.c * l.c, static_cast<long>(l.c),
                         static_cast<long>(l.c));
          MatMap dpsi(gf.data().data() + n * l.c * l.hw, static_cast<long>(l.c),
                      static_cast<long>(l.hw));
          dpsi.noalias() += (dg + dg.transpose()) * psi * inv;
        }
      });
}

Var style_layer_loss(const Var& f_hat, const Tensor& target_gram) {
  const Layout l = layout_of(f_hat.shape(), "style_layer_loss");
  if (target_gram.shape() != Shape{l.c, l.c}) {
    throw ShapeError("style_layer_loss: target Gram has shape " + to_string(target_gram.shape()) +
                     ", features have " + std::to_string(l.c) + " channels");
  }
  const Var g = gram(f_hat);
  const Tensor& gv = g.value();
  double acc = 0.0;
  for (std::size_t n = 0; n < l.n; ++n) {
    for (std::size_t i = 0; i < l.c * l.c; ++i) {
      const double d = gv[n * l.c * l.c + i] - target_gram[i];
      acc += d * d;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(l.n);
  return f_hat.tape().record(
      Tensor::scalar(acc * inv_n), {g}, [g, target_gram, l, inv_n](Tape& tape, const Tensor& go) {
        const Tensor& gv = g.value();
        Tensor& gg = tape.grad_slot(g.id());
        const double k = 2.0 * inv_n * go[0];
        for (std::size_t n = 0; n < l.n; ++n) {
          for (std::size_t i = 0; i < l.c * l.c; ++i) {
            gg[n * l.c * l.c + i] += k * (gv[n * l.c * l.c + i] - target_gram[i]);
          }
        }
      });
}

Var tv_loss(const Var& y_hat) {
  const Shape& s = y_hat.shape();
  const Layout l = layout_of(s, "tv_loss");
  const std::size_t h = s[s.size() - 2];
  const std::size_t w = s[s.size() - 1];
  return y_hat.tape().record(
      Tensor::scalar(tv_value(y_hat.value(), l, h, w)), {y_hat},
      [y_hat, l, h, w](Tape& tape, const Tensor& g) {
        const double k = 2.0 * g[0] / static_cast<double>(l.n);
        const Tensor& y = y_hat.value();
        Tensor& gy = tape.grad_slot(y_hat.id());
        for (std::size_t p = 0; p < l.n * l.c; ++p) {
          const double* img = y.data().data() + p * l.hw;
          double* out = gy.data().data() + p * l.hw;
          for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
              const double v = img[i * w + j];
              if (i + 1 < h) {
                const double d = k * (img[(i + 1) * w + j] - v);
                out[(i + 1) * w + j] += d;
                out[i * w + j] -= d;
              }
              if (j + 1 < w) {
                const double d = k * (img[i * w + j + 1] - v);
                out[i * w + j + 1] += d;
                out[i * w + j] -= d;
              }
            }
          }
        }
      });
}

double feature_loss(const Tensor& f_hat, const Tensor& f_target) {
  Tape tape;
  return feature_loss(tape.constant(f_hat), tape.constant(f_target)).value().item();
}

double pixel_loss(const Tensor& y_hat, const Tensor& y) {
  Tape tape;
  return pixel_loss(tape.constant(y_hat), tape.constant(y)).value().item();
}

GramMatrix gram_matrix(const Tensor& features, std::string tap) {
  if (features.rank() != 3) {
    throw ShapeError("gram_matrix: expected C x H x W features, got " + to_string(features.shape()));
  }
  return {std::move(tap), gram_value(features, layout_of(features.shape(), "gram_matrix"))};
}

double tv_loss(const Tensor& y_hat) {
  const Shape& s = y_hat.shape();
  return tv_value(y_hat, layout_of(s, "tv_loss"), s[s.size() - 2], s[s.size() - 1]);
}

double style_loss(const FeatureTaps& taps_hat, const StyleTargets& targets) {
  Tape tape;
  double total = 0.0;
  for (const auto& [name, target] : targets) {
    auto it = taps_hat.find(name);
    if (it == taps_hat.end()) throw Error("style_loss: no features for layer '" + name + "'");
    total += style_layer_loss(tape.constant(it->second), target).value().item();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Objective

void ObjectiveSpec::validate(const Network& lossnet) const {
  for (double l : {lambda_c, lambda_s, lambda_tv, lambda_pixel}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error("objective weights must be finite and >= 0");
  }
  if (lambda_c == 0.0 && lambda_s == 0.0 && lambda_tv == 0.0 && lambda_pixel == 0.0) {
    throw Error("objective has no positive weight");
  }
  if (lambda_s > 0.0 && style_taps.empty()) throw Error("style weight set but no style layers given");
  const std::vector<std::string> available = lossnet.spec().taps();
  const std::set<std::string> known(available.begin(), available.end());
  for (const std::string& tap : required_taps()) {
    if (!known.count(tap)) {
      std::string list;
      for (const auto& a : available) list += (list.empty() ? "" : ", ") + a;
      throw Error("unknown loss-network layer '" + tap + "' (available: " + list + ")");
    }
  }
}

std::vector<std::string> ObjectiveSpec::required_taps() const {
  std::set<std::string> taps;
  if (lambda_c > 0.0) taps.insert(content_tap);
  if (lambda_s > 0.0) taps.insert(style_taps.begin(), style_taps.end());
  return {taps.begin(), taps.end()};
}

json ObjectiveSpec::to_json() const {
  return {{"lambda_c", lambda_c},         {"lambda_s", lambda_s},
          {"lambda_tv", lambda_tv},       {"lambda_pixel", lambda_pixel},
          {"content_layer", content_tap}, {"style_layers", style_taps}};
}

ObjectiveSpec ObjectiveSpec::from_json(const json& j) {
  ObjectiveSpec s;
  s.lambda_c = j.value("lambda_c", s.lambda_c);
  s.lambda_s = j.value("lambda_s", s.lambda_s);
  s.lambda_tv = j.value("lambda_tv", s.lambda_tv);
  s.lambda_pixel = j.value("lambda_pixel", s.lambda_pixel);
  s.content_tap = j.value("content_layer", s.content_tap);
  s.style_taps = j.value("style_layers", s.style_taps);
  return s;
}

std::string ObjectiveSpec::digest() const {
  // FNV-1a over the canonical JSON text.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

double LossBreakdown::style_sum() const {
  double s = 0.0;
  for (const auto& [_, v] : style) s += v;
  return s;
}

double LossBreakdown::weighted_sum() const {
  return lambda_c * feat + lambda_s * style_sum() + lambda_tv * tv + lambda_pixel * pixel;
}

json LossBreakdown::to_json() const {
  return {{"total", total}, {"feat", feat},   {"style", style_sum()}, {"style_layers", style},
          {"tv", tv},       {"pixel", pixel}, {"lambda_c", lambda_c}, {"lambda_s", lambda_s},
          {"lambda_tv", lambda_tv}, {"lambda_pixel", lambda_pixel}};
}

ObjectiveTerms build_objective(const ObjectiveSpec& spec, const Network& lossnet,
                               const Var& y_hat, const ObjectiveTargets& targets) {
  spec.validate(lossnet);
  if (y_hat.shape().size() != 4) {
    throw ShapeError("objective: expected an N x C x H x W image batch, got " +
                     to_string(y_hat.shape()));
  }
  if (spec.lambda_c > 0.0 && !targets.content) {
    throw Error("objective: feature term needs a content target");
  }
  if (spec.lambda_pixel > 0.0 && !targets.pixel) {
    throw Error("objective: pixel term needs a pixel target");
  }
  if (spec.lambda_s > 0.0) {
    for (const auto& tap : spec.style_taps) {
      if (!targets.style_grams.count(tap)) {
        throw Error("objective: missing style target for layer '" + tap + "'");
      }
    }
  }

  Tape& tape = y_hat.tape();
  ObjectiveTerms terms;
  LossBreakdown& b = terms.breakdown;
  b.lambda_c = spec.lambda_c;
  b.lambda_s = spec.lambda_s;
  b.lambda_tv = spec.lambda_tv;
  b.lambda_pixel = spec.lambda_pixel;
  std::vector<std::pair<double, Var>> weighted;

  const std::vector<std::string> taps = spec.required_taps();
  std::map<std::string, Var> feats;
  if (!taps.empty()) feats = loss_net_features(lossnet, y_hat, taps);

  if (spec.lambda_c > 0.0) {
    Tensor content = as_batch4(*targets.content);
    if (content.shape() != y_hat.shape()) {
      throw ShapeError("objective: content target " + to_string(content.shape()) +
                       " does not match output " + to_string(y_hat.shape()));
    }
    const Var c = tape.constant(std::move(content));
    const Var target = detach(loss_net_features(lossnet, c, {spec.content_tap}).at(spec.content_tap));
    terms.feat = feature_loss(feats.at(spec.content_tap), target);
    b.feat = terms.feat->value().item();
    weighted.emplace_back(spec.lambda_c, *terms.feat);
  }
  if (spec.lambda_s > 0.0) {
    // Uniform weights across style layers.
    for (const auto& tap : spec.style_taps) {
      const Var l = style_layer_loss(feats.at(tap), targets.style_grams.at(tap));
      terms.style[tap] = l;
      b.style[tap] = l.value().item();
      weighted.emplace_back(spec.lambda_s, l);
    }
  }
  if (spec.lambda_tv > 0.0) {
    terms.tv = tv_loss(y_hat);
    b.tv = terms.tv->value().item();
    weighted.emplace_back(spec.lambda_tv, *terms.tv);
  }
  if (spec.lambda_pixel > 0.0) {
    Tensor px = as_batch4(*targets.pixel);
    terms.pixel = pixel_loss(y_hat, tape.constant(std::move(px)));
    b.pixel = terms.pixel->value().item();
    weighted.emplace_back(spec.lambda_pixel, *terms.pixel);
  }
  terms.total = weighted_sum(weighted);
  b.total = terms.total.value().item();
  return terms;
}

LossBreakdown evaluate_objective(const ObjectiveSpec& spec, const Network& lossnet,
                                 const ImagePlane& y_hat, const ObjectiveTargets& targets) {
  Tape tape;
  const Var y = tape.constant(y_hat.as_batch());
  return build_objective(spec, lossnet, y, targets).breakdown;
}

StyleTargets style_targets(const Network& lossnet, const ImagePlane& style,
                           const std::vector<std::string>& taps) {
  StyleTargets out;
  for (auto& [name, f] : loss_net_features(lossnet, style, taps)) {
    out[name] = gram_matrix(f, name).matrix;
  }
  return out;
}

}  // namespace percept
