// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <sstream>

namespace percept {
namespace {

double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

void clip(Tensor& t, double lo, double hi) {
  for (double& v : t.data()) v = clampd(v, lo, hi);
}

struct Pair {
  Tensor s, y;
  double rho;
};

double projected_gradient_norm(const Tensor& x, const Tensor& g, double lo, double hi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = clampd(x[i] - g[i], lo, hi) - x[i];
    acc += p * p;
  }
  return std::sqrt(acc);
}

// Gradient with components zeroed where the bound blocks descent.
Tensor free_gradient(const Tensor& x, const Tensor& g, double lo, double hi) {
  Tensor q = g;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0)) q[i] = 0.0;
  }
  return q;
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

LbfgsResult minimize_lbfgs(const ObjectiveFn& f, Tensor x0, const LbfgsOptions& opts,
                           const IterateFn& on_iterate) {
  if (opts.history == 0) throw Error("L-BFGS history must be >= 1");
  if (!(opts.lower < opts.upper)) throw Error("L-BFGS bounds must satisfy lower < upper");
  const double lo = opts.lower, hi = opts.upper;

  LbfgsResult res;
  Tensor x = std::move(x0);
  clip(x, lo, hi);
  Tensor g(x.shape());
  double fx = f(x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.all_finite()) {
    throw Error("objective is not finite at the starting point");
  }
  res.x = x;
  res.value = fx;
  if (on_iterate) on_iterate(0, x, fx);

  std::deque<Pair> hist;
  res.stop_reason = "iteration limit";
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    if (projected_gradient_norm(x, g, lo, hi) < opts.gradient_tolerance) {
      res.converged = true;
      res.stop_reason = "projected gradient below tolerance";
      break;
    }
    const Tensor q0 = free_gradient(x, g, lo, hi);

    auto steepest = [&] {
      const double scale = opts.initial_step_fraction * (hi - lo) / std::max(q0.max_abs(), 1e-300);
      return (-scale) * q0;
    };

    Tensor d;
    if (hist.empty()) {
      d = steepest();
    } else {
      // Two-loop recursion.
      Tensor q = q0;
      std::vector<double> alpha(hist.size());
      for (std::size_t k = hist.size(); k-- > 0;) {
        alpha[k] = hist[k].rho * hist[k].s.dot(q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * hist[k].y[i];
      }
      const Pair& last = hist.back();
      const double gamma = 1.0 / (last.rho * last.y.dot(last.y));
      q *= gamma;
      for (std::size_t k = 0; k < hist.size(); ++k) {
        const double beta = hist[k].rho * hist[k].y.dot(q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * hist[k].s[i];
      }
      d = (-1.0) * q;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (q0[i] == 0.0 && g[i] != 0.0) d[i] = 0.0;
      }
      if (!(d.dot(g) < 0.0)) {
        hist.clear();
        d = steepest();
      }
    }

    double step = 1.0;
    bool accepted = false;
    Tensor xt, gt(x.shape());
    double ft = 0.0;
    for (std::size_t bt = 0; bt <= opts.max_backtracks; ++bt, step *= opts.backtrack) {
      xt = x;
      for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = clampd(x[i] + step * d[i], lo, hi);
      gt.fill(0.0);
      ft = f(xt, gt);
      ++res.evaluations;
      double decrease = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) decrease += g[i] * (xt[i] - x[i]);
      if (std::isfinite(ft) && gt.all_finite() && ft <= fx &&
          ft <= fx + opts.armijo * std::min(decrease, 0.0)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!hist.empty()) {
        hist.clear();
        continue;
      }
      res.stop_reason = "line search failed";
      break;
    }

    Tensor s = xt - x;
    Tensor y = gt - g;
    const double sy = s.dot(y);
    const double yy = y.dot(y);
    if (sy > 0.0 && yy > 0.0 && std::isfinite(sy)) {
      hist.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (hist.size() > opts.history) hist.pop_front();
    }
    const bool moved = !(xt == x);
    x = std::move(xt);
    g = gt;
    fx = ft;
    res.iterations = it;
    if (fx <= res.value) {
      res.x = x;
      res.value = fx;
    }
    if (on_iterate) on_iterate(it, x, fx);
    if (!moved) {
      res.stop_reason = "no progress";
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

std::string to_string(OptimizerKind k) { return k == OptimizerKind::lbfgs ? "lbfgs" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "lbfgs") return OptimizerKind::lbfgs;
  if (s == "adam") return OptimizerKind::adam;
  throw Error("unknown optimizer '" + s + "' (expected lbfgs or adam)");
}

void OptimizeConfig::validate() const {
  if (max_iters < 1) throw Error("max iterations must be >= 1");
  if (history < 1) throw Error("L-BFGS history must be >= 1");
  if (trace_stride < 1) throw Error("trace stride must be >= 1");
  if (!(clip_lower < clip_upper)) throw Error("clip range must satisfy lower < upper");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (init == InitKind::image && !init_image) throw Error("init=image requires an initial image");
}

bool IterTrace::non_increasing() const {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].loss.total > entries[i - 1].loss.total) return false;
  }
  return true;
}

std::string IterTrace::to_csv(bool zero_times) const {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,total,feat,style,pixel,tv,seconds\n";
  for (const TraceEntry& e : entries) {
    os << e.iteration << ',' << e.loss.total << ',' << e.loss.feat << ',' << e.loss.style_sum()
       << ',' << e.loss.pixel << ',' << e.loss.tv << ',' << (zero_times ? 0.0 : e.seconds) << '\n';
  }
  return os.str();
}

OptimizeResult optimize_image(const ObjectiveSpec& objective, const Network& lossnet,
                              const ObjectiveTargets& targets, std::size_t height,
                              std::size_t width, const OptimizeConfig& config) {
  config.validate();
  objective.validate(lossnet);
  const std::size_t channels = lossnet.spec().in_channels;
  const ColorSpace cs = channels == 1 ? ColorSpace::y : ColorSpace::rgb;
  const Shape shape{1, channels, height, width};

  Tensor x0;
  if (config.init == InitKind::image) {
    const ImagePlane& init = *config.init_image;
    if (init.channels() != channels || init.height() != height || init.width() != width) {
      throw ShapeError("initial image is " + to_string(init.tensor().shape()) + ", expected " +
                       to_string(Shape{channels, height, width}));
    }
    x0 = init.as_batch();
  } else {
    Rng rng(derive_seed(config.seed, 0x1417));
    x0 = uniform_tensor(shape, config.clip_lower, config.clip_upper, rng);
  }

  LossBreakdown last;
  auto evaluate = [&](const Tensor& x, Tensor& grad) {
    Tape tape;
    const Var v = tape.input(x);
    ObjectiveTerms terms = build_objective(objective, lossnet, v, targets);
    tape.backward(terms.total);
    grad = tape.grad(v);
    last = terms.breakdown;
    return terms.breakdown.total;
  };

  OptimizeResult out;
  const Stopwatch clock;
  std::optional<TraceEntry> pending;
  auto record = [&](std::size_t it) {
    pending = TraceEntry{it, last, clock.seconds()};
    if (it % config.trace_stride == 0) {
      out.trace.entries.push_back(*pending);
      pending.reset();
    }
  };

  Tensor best;
  if (config.method == OptimizerKind::lbfgs) {
    LbfgsOptions opts;
    opts.max_iters = config.max_iters;
    opts.history = config.history;
    opts.lower = config.clip_lower;
    opts.upper = config.clip_upper;
    LbfgsResult r = minimize_lbfgs(evaluate, std::move(x0), opts,
                                   [&](std::size_t it, const Tensor&, double) { record(it); });
    best = std::move(r.x);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.stop_reason = r.stop_reason;
  } else {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Tensor x = std::move(x0);
    clip(x, config.clip_lower, config.clip_upper);
    Tensor g(shape);
    double fx = evaluate(x, g);
    if (!std::isfinite(fx)) throw Error("objective is not finite at the starting point");
    record(0);
    best = x;
    double fbest = fx;
    Tensor m(shape), v(shape);
    out.stop_reason = "iteration limit";
    for (std::size_t t = 1; t <= config.max_iters; ++t) {
      if (projected_gradient_norm(x, g, config.clip_lower, config.clip_upper) < 1e-8) {
        out.converged = true;
        out.stop_reason = "projected gradient below tolerance";
        break;
      }
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double upd = config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        x[i] = clampd(x[i] - upd, config.clip_lower, config.clip_upper);
      }
      fx = evaluate(x, g);
      if (!std::isfinite(fx)) throw Error("objective became non-finite at iteration " + std::to_string(t));
      out.iterations = t;
      record(t);
      if (fx <= fbest) {
        fbest = fx;
        best = x;
      }
    }
  }
  if (pending) out.trace.entries.push_back(*pending);
  out.image = ImagePlane::from_batch(best, 0, cs);
  return out;
}

OptimizeResult invert_features(const Network& lossnet, const std::string& tap,
                               const ImagePlane& target, const OptimizeConfig& config,
                               double lambda_tv) {
  ObjectiveSpec spec;
  spec.lambda_c = 1.0;
  spec.lambda_s = 0.0;
  spec.lambda_tv = lambda_tv;
  spec.content_tap = tap;
  ObjectiveTargets targets;
  targets.content = target.as_batch();
  return optimize_image(spec, lossnet, targets, target.height(), target.width(), config);
}

OptimizeResult invert_style(const Network& lossnet, const std::vector<std::string>& taps,
                            const ImagePlane& style, std::size_t height, std::size_t width,
                            const OptimizeConfig& config, double lambda_tv) {
  ObjectiveSpec spec;
  spec.lambda_c = 0.0;
  spec.lambda_s = 1.0;
  spec.lambda_tv = lambda_tv;
  spec.style_taps = taps;
  spec.validate(lossnet);
  ObjectiveTargets targets;
  targets.style_grams = style_targets(lossnet, style, taps);
  return optimize_image(spec, lossnet, targets, height, width, config);
}

}  // namespace percept
