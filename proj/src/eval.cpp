// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "percept/parallel.hpp"

namespace percept {
namespace {

using nlohmann::json;

ImagePlane metric_plane(const ImagePlane& img, const MetricOptions& opts) {
  const ImagePlane q = opts.quantize ? quantize(img) : img;
  if (opts.channels == MetricChannels::rgb || q.colorspace() == ColorSpace::y) return q;
  return y_channel(q);
}

void require_same_size(const ImagePlane& a, const ImagePlane& b, const char* what) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": image sizes differ (" +
                     to_string(a.tensor().shape()) + " vs " + to_string(b.tensor().shape()) + ")");
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> w(SsimParams::kWindow);
  const double c = (SsimParams::kWindow - 1) / 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2 * SsimParams::kSigma * SsimParams::kSigma));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

// Valid-region separable filtering of an h x w plane.
std::vector<double> filter_valid(const double* p, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * p[i * w + j + t];
      tmp[i * ow + j] = s;
    }
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = s;
    }
  return out;
}

double ssim_plane(const double* a, const double* b, std::size_t h, std::size_t w) {
  static const std::vector<double> k = gaussian_window();
  const double c1 = std::pow(SsimParams::kK1 * SsimParams::kRange, 2);
  const double c2 = std::pow(SsimParams::kK2 * SsimParams::kRange, 2);
  std::vector<double> aa(h * w), bb(h * w), ab(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, k), mu_b = filter_valid(b, h, w, k);
  const auto e_aa = filter_valid(aa.data(), h, w, k), e_bb = filter_valid(bb.data(), h, w, k);
  const auto e_ab = filter_valid(ab.data(), h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string full(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double time_seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Reverse 1-D interval maps: output interval -> input interval.
struct Interval {
  long lo, hi;
};

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
long ceil_div(long a, long b) { return -floor_div(-a, b); }

Interval through_layer(const LayerSpec& l, Interval o) {
  const long k = static_cast<long>(l.kernel);
  const long p = k / 2;
  switch (l.kind) {
    case LayerKind::conv: {
      const long s = static_cast<long>(l.stride);
      return {s * o.lo - p, s * o.hi - p + k - 1};
    }
    case LayerKind::conv_transpose: {
      // Fine position j reads coarse i when 2i - p <= j <= 2i - p + k - 1.
      return {ceil_div(o.lo - k + 1 + p, 2), floor_div(o.hi + p, 2)};
    }
    case LayerKind::max_pool:
      return {2 * o.lo, 2 * o.hi + 1};
    case LayerKind::residual_block:
      // Two stride-1 convs; the identity branch is contained in the result.
      return {o.lo - 2 * p, o.hi + 2 * p};
    default:
      return o;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

double psnr(const ImagePlane& ref, const ImagePlane& test, const MetricOptions& opts) {
  require_same_size(ref, test, "psnr");
  const ImagePlane a = metric_plane(ref, opts), b = metric_plane(test, opts);
  double mse = 0.0;
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const double d = ta[i] - tb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ta.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImagePlane& ref, const ImagePlane& test, const MetricOptions& opts) {
  require_same_size(ref, test, "ssim");
  if (ref.height() < SsimParams::kWindow || ref.width() < SsimParams::kWindow) {
    throw ShapeError("ssim: images must be at least 11x11, got " + std::to_string(ref.height()) +
                     "x" + std::to_string(ref.width()));
  }
  const ImagePlane a = metric_plane(ref, opts), b = metric_plane(test, opts);
  const std::size_t h = a.height(), w = a.width(), plane = h * w;
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    total += ssim_plane(a.tensor().data().data() + c * plane, b.tensor().data().data() + c * plane,
                        h, w);
  }
  return total / static_cast<double>(a.channels());
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "image,psnr,ssim\n";
  for (const MetricRow& r : rows) os << r.name << ',' << full(r.psnr) << ',' << full(r.ssim) << '\n';
  os << "mean," << full(mean_psnr) << ',' << full(mean_ssim) << '\n';
  return os.str();
}

json MetricReport::to_json() const {
  json j;
  j["channels"] = options.channels == MetricChannels::y ? "y" : "rgb";
  j["quantize"] = options.quantize;
  j["ssim"] = {{"window", SsimParams::kWindow},
               {"sigma", SsimParams::kSigma},
               {"k1", SsimParams::kK1},
               {"k2", SsimParams::kK2},
               {"range", SsimParams::kRange}};
  json arr = json::array();
  for (const MetricRow& r : rows) {
    arr.push_back({{"image", r.name}, {"psnr", number_or_string(r.psnr)}, {"ssim", r.ssim}});
  }
  j["images"] = std::move(arr);
  j["mean_psnr"] = number_or_string(mean_psnr);
  j["mean_ssim"] = mean_ssim;
  return j;
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os << "channels=" << (options.channels == MetricChannels::y ? "Y" : "RGB")
     << " quantize=" << (options.quantize ? "on" : "off")
     << " ssim(window=11, sigma=1.5, K1=0.01, K2=0.03, L=255)\n";
  std::size_t width = 5;
  for (const MetricRow& r : rows) width = std::max(width, r.name.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %10s  %8s\n", static_cast<int>(width), "image", "PSNR(dB)",
                "SSIM");
  os << line;
  for (const MetricRow& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %10s  %8.4f\n", static_cast<int>(width), r.name.c_str(),
                  fmt(r.psnr).c_str(), r.ssim);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-*s  %10s  %8.4f\n", static_cast<int>(width), "mean",
                fmt(mean_psnr).c_str(), mean_ssim);
  os << line;
  return os.str();
}

MetricReport evaluate_images(const std::vector<std::pair<std::string, ImagePlane>>& refs,
                             const std::vector<ImagePlane>& tests, const MetricOptions& opts) {
  if (refs.size() != tests.size()) throw Error("evaluate: reference and test counts differ");
  if (refs.empty()) throw Error("evaluate: no images");
  MetricReport report;
  report.options = opts;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    MetricRow row{refs[i].first, psnr(refs[i].second, tests[i], opts),
                  ssim(refs[i].second, tests[i], opts)};
    report.mean_psnr += row.psnr;
    report.mean_ssim += row.ssim;
    report.rows.push_back(std::move(row));
  }
  report.mean_psnr /= static_cast<double>(refs.size());
  report.mean_ssim /= static_cast<double>(refs.size());
  return report;
}

MetricReport evaluate_folders(const std::filesystem::path& ref_dir,
                              const std::filesystem::path& test_dir, const MetricOptions& opts) {
  if (!std::filesystem::is_directory(ref_dir)) throw Error(ref_dir.string() + ": not a directory");
  if (!std::filesystem::is_directory(test_dir)) throw Error(test_dir.string() + ": not a directory");
  std::vector<std::pair<std::string, ImagePlane>> refs;
  std::vector<ImagePlane> tests;
  for (const auto& path : list_images(ref_dir)) {
    const auto other = test_dir / path.filename();
    if (!std::filesystem::exists(other)) throw Error(other.string() + ": missing test image");
    refs.emplace_back(path.filename().string(), load_image(path));
    tests.push_back(load_image(other));
  }
  return evaluate_images(refs, tests, opts);
}

// ---------------------------------------------------------------------------

double ComparisonReport::feedforward_win_rate() const {
  if (rows.empty()) return 0.0;
  std::size_t wins = 0;
  for (const ComparisonRow& r : rows) wins += r.feedforward_objective < r.content_objective;
  return static_cast<double>(wins) / static_cast<double>(rows.size());
}

std::string ComparisonReport::to_csv() const {
  std::ostringstream os;
  os << "image,height,width,content_objective,feedforward_objective,baseline_iterations,"
        "baseline_final_objective\n";
  for (const ComparisonRow& r : rows) {
    os << r.name << ',' << r.height << ',' << r.width << ',' << full(r.content_objective) << ','
       << full(r.feedforward_objective) << ',';
    if (r.baseline.entries.empty()) {
      os << "0,\n";
    } else {
      os << r.baseline.entries.back().iteration << ','
         << full(r.baseline.entries.back().loss.total) << '\n';
    }
  }
  return os.str();
}

json ComparisonReport::to_json() const {
  json j;
  j["objective"] = objective.to_json();
  json arr = json::array();
  for (const ComparisonRow& r : rows) {
    json trace = json::array();
    for (const TraceEntry& e : r.baseline.entries) {
      trace.push_back({{"iteration", e.iteration}, {"total", e.loss.total}});
    }
    arr.push_back({{"image", r.name},
                   {"height", r.height},
                   {"width", r.width},
                   {"content_objective", r.content_objective},
                   {"feedforward_objective", r.feedforward_objective},
                   {"baseline", std::move(trace)}});
  }
  j["images"] = std::move(arr);
  j["feedforward_win_rate"] = feedforward_win_rate();
  return j;
}

ComparisonReport compare_objectives(const std::vector<std::pair<std::string, ImagePlane>>& images,
                                    const ObjectiveSpec& objective, const Network& lossnet,
                                    const StyleTargets& style_grams, const Network& net,
                                    std::size_t baseline_iters, std::uint64_t seed) {
  objective.validate(lossnet);
  ComparisonReport report;
  report.objective = objective;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& [name, img] = images[i];
    ObjectiveTargets targets;
    targets.content = img.as_batch();
    targets.style_grams = style_grams;
    ComparisonRow row;
    row.name = name;
    row.height = img.height();
    row.width = img.width();
    row.content_objective = evaluate_objective(objective, lossnet, img, targets).total;
    const ImagePlane out = ImagePlane::from_batch(net.run(img.as_batch()), 0, img.colorspace());
    row.feedforward_objective = evaluate_objective(objective, lossnet, out, targets).total;
    if (baseline_iters > 0) {
      OptimizeConfig cfg;
      cfg.max_iters = baseline_iters;
      cfg.seed = derive_seed(seed, i);
      row.baseline =
          optimize_image(objective, lossnet, targets, img.height(), img.width(), cfg).trace;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::uint64_t count_multiply_adds(const NetworkSpec& spec, std::size_t height, std::size_t width) {
  spec.validate();
  std::uint64_t total = 0;
  std::uint64_t h = height, w = width, c = spec.in_channels;
  for (const LayerSpec& l : spec.layers) {
    const std::uint64_t k2 = static_cast<std::uint64_t>(l.kernel) * l.kernel;
    switch (l.kind) {
      case LayerKind::conv: {
        const std::uint64_t pad = l.kernel / 2;
        h = (h + 2 * pad - l.kernel) / l.stride + 1;
        w = (w + 2 * pad - l.kernel) / l.stride + 1;
        total += k2 * h * w * l.in_channels * l.out_channels;
        c = l.out_channels;
        break;
      }
      case LayerKind::conv_transpose:
        total += k2 * h * w * l.in_channels * l.out_channels;
        h *= 2;
        w *= 2;
        c = l.out_channels;
        break;
      case LayerKind::residual_block:
        total += 2 * k2 * h * w * c * c;
        break;
      case LayerKind::max_pool:
        h /= 2;
        w /= 2;
        break;
      default:
        break;
    }
  }
  return total;
}

std::size_t receptive_field(const NetworkSpec& spec) {
  spec.validate();
  // Output phases repeat with the product of all resolution changes; 64
  // consecutive positions cover every phase of the supported networks.
  long best = 0;
  for (long o = 1024; o < 1024 + 64; ++o) {
    Interval iv{o, o};
    for (auto it = spec.layers.rbegin(); it != spec.layers.rend(); ++it) iv = through_layer(*it, iv);
    best = std::max(best, iv.hi - iv.lo + 1);
  }
  return static_cast<std::size_t>(best);
}

std::size_t empirical_receptive_field(const NetworkSpec& full, std::size_t size) {
  full.validate();
  // Gradient support depends only on kernels, strides and padding, so probe
  // a one-channel copy of the network.
  NetworkSpec spec = full;
  spec.in_channels = 1;
  spec.preprocessing = {};
  for (LayerSpec& l : spec.layers) {
    if (l.in_channels) l.in_channels = 1;
    if (l.out_channels) l.out_channels = 1;
  }
  Network probe(spec);
  for (Parameter& p : probe.parameters()) {
    const Shape& s = p.value.shape();
    if (s.size() != 4) continue;
    // Positive weights, so contributions cannot cancel.
    const double fan = static_cast<double>(s[1] * s[2] * s[3]);
    p.value.fill(1.0 / fan);
  }
  const std::size_t c = spec.in_channels;
  const ShapeReport shapes = infer_shapes(spec, size, size);
  const std::size_t oh = shapes.output[1], ow = shapes.output[2];
  // Probe output pixels along the diagonal through the centre, one phase
  // period either side.
  std::size_t best = 0;
  for (long d = -8; d < 8; ++d) {
    const long i = static_cast<long>(oh / 2) + d, j = static_cast<long>(ow / 2) + d;
    if (i < 0 || j < 0 || i >= static_cast<long>(oh) || j >= static_cast<long>(ow)) continue;
    Tape tape;
    const Var x = tape.input(Tensor(Shape{1, c, size, size}, 0.0));
    ForwardOptions fo;
    fo.linearize = true;
    const Var y = probe.forward(tape, x, fo).output;
    // Select output pixel (0, i, j) via a one-hot weighted sum.
    Tensor mask(y.shape());
    mask.at(0, 0, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1.0;
    const Var picked = tape.record(Tensor::scalar(y.value().dot(mask)), {y},
                                   [y, mask](Tape& t, const Tensor& g) {
                                     Tensor& slot = t.grad_slot(y.id());
                                     for (std::size_t k = 0; k < mask.size(); ++k) {
                                       slot[k] += g[0] * mask[k];
                                     }
                                   });
    tape.backward(picked);
    const Tensor gx = tape.grad(x);
    std::size_t r0 = size, r1 = 0, c0 = size, c1 = 0;
    bool any = false;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t q = 0; q < size; ++q) {
          if (gx.at(0, ch, r, q) == 0.0) continue;
          any = true;
          r0 = std::min(r0, r);
          r1 = std::max(r1, r);
          c0 = std::min(c0, q);
          c1 = std::max(c1, q);
        }
    if (any) best = std::max({best, r1 - r0 + 1, c1 - c0 + 1});
  }
  return best;
}

// ---------------------------------------------------------------------------

const std::vector<PublishedTiming>& published_timings() {
  static const std::vector<PublishedTiming> rows{{256, 3.17, 9.52, 15.86, 0.015},
                                                 {512, 10.97, 32.91, 54.85, 0.05},
                                                 {1024, 42.89, 128.66, 214.44, 0.21}};
  return rows;
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%6s  %14s  %10s  %14s  %9s  %s\n", "size", "feedforward(s)",
                "baseline", "baseline(s)", "speedup", "ordering");
  os << line;
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof line, "%6zu  %14.6f  %5zu iters  %14.6f  %8.1fx  %s\n", r.size,
                  r.feedforward_seconds, r.baseline_iters, r.baseline_seconds, r.speedup,
                  r.ordering_consistent ? "consistent" : "INCONSISTENT");
    os << line;
  }
  os << "\nReference (original GPU measurements, context only):\n";
  std::snprintf(line, sizeof line, "%6s  %10s  %10s  %10s  %8s  %8s  %8s\n", "size", "100 it",
                "300 it", "500 it", "ours", "x100", "x500");
  os << line;
  for (const PublishedTiming& p : published_timings()) {
    std::snprintf(line, sizeof line, "%6zu  %9.2fs  %9.2fs  %9.2fs  %7.3fs  %7.0fx  %7.0fx\n", p.size,
                  p.baseline_100, p.baseline_300, p.baseline_500, p.feedforward,
                  p.baseline_100 / p.feedforward, p.baseline_500 / p.feedforward);
    os << line;
  }
  return os.str();
}

std::string BenchReport::to_csv() const {
  std::ostringstream os;
  os << "size,feedforward_seconds,baseline_iters,baseline_seconds,speedup,ordering_consistent\n";
  for (const BenchRow& r : rows) {
    os << r.size << ',' << full(r.feedforward_seconds) << ',' << r.baseline_iters << ','
       << full(r.baseline_seconds) << ',' << full(r.speedup) << ',' << r.ordering_consistent << '\n';
  }
  return os.str();
}

json BenchReport::to_json() const {
  json j;
  json arr = json::array();
  for (const BenchRow& r : rows) {
    arr.push_back({{"size", r.size},
                   {"feedforward_seconds", r.feedforward_seconds},
                   {"baseline_iters", r.baseline_iters},
                   {"baseline_seconds", r.baseline_seconds},
                   {"speedup", r.speedup},
                   {"ordering_consistent", r.ordering_consistent},
                   {"feedforward_samples", r.feedforward_samples},
                   {"baseline_samples", r.baseline_samples}});
  }
  j["rows"] = std::move(arr);
  json ref = json::array();
  for (const PublishedTiming& p : published_timings()) {
    ref.push_back({{"size", p.size},
                   {"baseline_100", p.baseline_100},
                   {"baseline_300", p.baseline_300},
                   {"baseline_500", p.baseline_500},
                   {"feedforward", p.feedforward}});
  }
  j["reference"] = std::move(ref);
  return j;
}

BenchReport benchmark(const Network& net, const ObjectiveSpec& objective, const Network& lossnet,
                      const StyleTargets& style_grams, const ImagePlane& content,
                      const BenchOptions& opts) {
  if (opts.feedforward_repeats < 5) throw Error("benchmark needs at least 5 feed-forward repeats");
  if (opts.baseline_repeats < 1 || opts.baseline_iters < 1) {
    throw Error("benchmark needs at least one baseline run of at least one iteration");
  }
  objective.validate(lossnet);
  const std::size_t saved_threads = thread_count();
  set_thread_count(1);
  BenchReport report;
  try {
    for (std::size_t size : opts.sizes) {
      const ImagePlane img = resize_bicubic(center_crop_square(content), size, size);
      BenchRow row;
      row.size = size;
      row.baseline_iters = opts.baseline_iters;
      const Tensor batch = img.as_batch();
      net.run(batch);  // warm-up
      for (std::size_t r = 0; r < opts.feedforward_repeats; ++r) {
        row.feedforward_samples.push_back(time_seconds([&] { net.run(batch); }));
      }
      ObjectiveTargets targets;
      targets.content = batch;
      targets.style_grams = style_grams;
      for (std::size_t r = 0; r < opts.baseline_repeats; ++r) {
        OptimizeConfig cfg;
        cfg.max_iters = opts.baseline_iters;
        cfg.seed = derive_seed(opts.seed, size, r);
        row.baseline_samples.push_back(time_seconds(
            [&] { optimize_image(objective, lossnet, targets, size, size, cfg); }));
      }
      row.feedforward_seconds = median(row.feedforward_samples);
      row.baseline_seconds = median(row.baseline_samples);
      row.speedup = row.baseline_seconds / row.feedforward_seconds;
      row.ordering_consistent =
          *std::max_element(row.feedforward_samples.begin(), row.feedforward_samples.end()) <
          *std::min_element(row.baseline_samples.begin(), row.baseline_samples.end());
      report.rows.push_back(std::move(row));
    }
  } catch (...) {
    set_thread_count(saved_threads);
    throw;
  }
  set_thread_count(saved_threads);
  return report;
}

}  // namespace percept
