// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "percept/checkpoint.hpp"
#include "percept/eval.hpp"
#include "percept/trainer.hpp"

namespace percept {
namespace {

using nlohmann::json;

// Usage problems detected after parsing (missing files are runtime errors).
class UsageError : public Error {
public:
  using Error::Error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(static_cast<std::size_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw UsageError("invalid size '" + item + "'");
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(path.string() + ": cannot open for writing");
  f << text;
  if (!f) throw Error(path.string() + ": write failed");
}

ImagePlane load_rgb(const std::string& path) {
  ImagePlane img = load_image(path);
  if (img.colorspace() != ColorSpace::rgb) throw Error(path + ": expected an RGB image");
  return img;
}

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string config;
  std::string loss_net;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
    app->add_flag("--deterministic", deterministic,
                  "Reproducible outputs: wall-clock columns in reports are written as 0");
    app->add_option("--config", config, "JSON file of flag values; explicit flags override it");
    app->add_option("--loss-net", loss_net,
                    "Loss-network checkpoint (default: built-in mini network)");
  }

  Network lossnet() const {
    if (loss_net.empty()) return make_mini_loss_net();
    return load_checkpoint(loss_net).network;
  }
};

struct ObjectiveFlags {
  double lambda_c, lambda_s, lambda_tv;
  std::string content_layer, style_layers;

  explicit ObjectiveFlags(const ObjectiveSpec& d)
      : lambda_c(d.lambda_c),
        lambda_s(d.lambda_s),
        lambda_tv(d.lambda_tv),
        content_layer(d.content_tap),
        style_layers(join_list(d.style_taps)) {}

  void add(CLI::App* app) {
    app->add_option("--lambda-c", lambda_c, "Feature reconstruction weight")->capture_default_str();
    app->add_option("--lambda-s", lambda_s, "Style reconstruction weight")->capture_default_str();
    app->add_option("--lambda-tv", lambda_tv, "Total variation weight")->capture_default_str();
    app->add_option("--content-layer", content_layer, "Loss-network layer for the feature loss")
        ->capture_default_str();
    app->add_option("--style-layers", style_layers, "Comma-separated style loss layers")
        ->capture_default_str();
  }

  ObjectiveSpec spec() const {
    ObjectiveSpec s;
    s.lambda_c = lambda_c;
    s.lambda_s = lambda_s;
    s.lambda_tv = lambda_tv;
    s.content_tap = content_layer;
    s.style_taps = split_list(style_layers);
    return s;
  }
};

bool given(CLI::App* app, const std::string& name) { return app->count(name) > 0; }

// ---------------------------------------------------------------------------

struct TrainCmd {
  Common common;
  std::string task = "style", preset = "paper", data, style, output, log, resume, sr_loss = "feat";
  std::size_t size = 256, factor = 4, batch = 4, iters = 40000, log_stride = 100, every = 0;
  double lr = 1e-3;
  ObjectiveFlags obj{TrainConfig::style_preset().objective};
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("train", "Train a style-transfer or super-resolution network");
    common.add(app);
    app->add_option("--task", task, "style or sr")->capture_default_str()->check(
        CLI::IsMember({"style", "sr"}));
    app->add_option("--preset", preset, "paper (full scale) or desk (small test runs)")
        ->capture_default_str()
        ->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--data", data, "Directory of training images")->required();
    app->add_option("--style", style, "Style image (style task)");
    app->add_option("--output", output, "Checkpoint to write")->required();
    app->add_option("--log", log, "CSV training log to write");
    app->add_option("--resume", resume, "Checkpoint to continue training from");
    app->add_option("--size", size, "Training resolution (style) or crop size (sr: paper 288)")
        ->capture_default_str();
    app->add_option("--factor", factor, "Super-resolution factor")->capture_default_str();
    app->add_option("--sr-loss", sr_loss, "Super-resolution loss: feat or pixel")
        ->capture_default_str()
        ->check(CLI::IsMember({"feat", "pixel"}));
    app->add_option("--batch", batch, "Batch size")->capture_default_str();
    app->add_option("--iters", iters, "Iterations (paper: style 40000, sr 200000)")
        ->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--log-stride", log_stride, "Progress/log interval")->capture_default_str();
    app->add_option("--checkpoint-every", every, "Also save the checkpoint every n iterations")
        ->capture_default_str();
    obj.add(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    const bool sr = task == "sr";
    TrainConfig cfg = sr ? (preset == "desk" ? TrainConfig::desk_sr_preset()
                                             : TrainConfig::sr_preset(factor))
                         : (preset == "desk" ? TrainConfig::desk_style_preset()
                                             : TrainConfig::style_preset());
    if (given(app, "--size")) cfg.image_size = size;
    if (sr && given(app, "--factor")) cfg.factor = factor;
    if (!sr && given(app, "--factor")) throw UsageError("--factor applies to --task sr only");
    if (given(app, "--sr-loss")) cfg.sr_loss = sr_loss_from_string(sr_loss);
    if (given(app, "--batch")) cfg.batch_size = batch;
    if (given(app, "--iters")) cfg.iterations = iters;
    if (given(app, "--lr")) cfg.learning_rate = lr;
    if (given(app, "--lambda-c")) cfg.objective.lambda_c = obj.lambda_c;
    if (given(app, "--lambda-s")) cfg.objective.lambda_s = obj.lambda_s;
    if (given(app, "--lambda-tv")) cfg.objective.lambda_tv = obj.lambda_tv;
    if (given(app, "--content-layer")) cfg.objective.content_tap = obj.content_layer;
    if (given(app, "--style-layers")) cfg.objective.style_taps = split_list(obj.style_layers);
    cfg.seed = common.seed;
    cfg.data_dir = data;
    cfg.checkpoint_path = output;
    cfg.checkpoint_stride = every;
    cfg.log_stride = std::max<std::size_t>(log_stride, 1);
    if (!sr) {
      if (style.empty()) throw UsageError("--style is required for --task style");
      cfg.style = load_rgb(style);
    }
    try {
      cfg.validate();
    } catch (const Error& ex) {
      throw UsageError(ex.what());
    }
    const Network lossnet = common.lossnet();
    std::optional<Checkpoint> from;
    if (!resume.empty()) from = load_checkpoint(resume);

    TrainHooks hooks;
    hooks.on_step = [&](std::size_t it, const LossBreakdown& b, const Network&) {
      if (it % cfg.log_stride == 0 || it == cfg.iterations) {
        err << "iter " << it << "/" << cfg.iterations << " total " << b.total << " feat " << b.feat
            << " style " << b.style_sum() << " pixel " << b.pixel << " tv " << b.tv << '\n';
      }
    };
    TrainResult result = train(cfg, lossnet, from, hooks);
    if (!log.empty()) write_text(log, result.log.to_csv(common.deterministic));
    out << "wrote " << output << " (" << result.checkpoint.meta.iteration << " iterations)\n";
    return kExitOk;
  }
};

struct StylizeCmd {
  Common common;
  std::string model, input, output;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("stylize", "Apply a trained style network to an image");
    common.add(app);
    app->add_option("--model", model, "Style network checkpoint")->required();
    app->add_option("--input", input, "Input image")->required();
    app->add_option("--output", output, "Output image (.png, .ppm)")->required();
  }

  int run(std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(model);
    const ImagePlane img = load_rgb(input);
    const std::size_t m = ck.network.spec().spatial_multiple;
    if (img.height() % m || img.width() % m) {
      throw Error(input + ": size " + std::to_string(img.height()) + "x" +
                  std::to_string(img.width()) + " must be a multiple of " + std::to_string(m));
    }
    save_image(quantize(apply_network(ck.network, img)), output);
    out << "wrote " << output << '\n';
    return kExitOk;
  }
};

struct SuperresCmd {
  Common common;
  std::string model, input, output;
  bool hist = false;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("superres", "Upscale an image with a trained super-resolution network");
    common.add(app);
    app->add_option("--model", model, "Super-resolution checkpoint")->required();
    app->add_option("--input", input, "Low-resolution input image")->required();
    app->add_option("--output", output, "Output image")->required();
    app->add_flag("--hist-match", hist,
                  "Match the output histogram to the low-resolution input (per RGB channel)");
  }

  int run(std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(model);
    const ImagePlane low = load_rgb(input);
    ImagePlane y = quantize(apply_network(ck.network, low));
    if (hist) y = histogram_match(y, low);
    save_image(y, output);
    out << "wrote " << output << '\n';
    return kExitOk;
  }
};

struct OptimizeCmd {
  Common common;
  std::string mode = "style", content, style, output, trace, method = "lbfgs", init = "noise";
  std::size_t iters = 500, height = 0, width = 0, history = 10, stride = 1;
  double lr = 1.0;
  ObjectiveFlags obj{TrainConfig::style_preset().objective};
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("optimize",
                              "Optimization baseline: style transfer, feature or style inversion");
    common.add(app);
    app->add_option("--mode", mode, "style, invert-feat or invert-style")
        ->capture_default_str()
        ->check(CLI::IsMember({"style", "invert-feat", "invert-style"}));
    app->add_option("--content", content, "Content image (style, invert-feat)");
    app->add_option("--style", style, "Style image (style, invert-style)");
    app->add_option("--output", output, "Output image")->required();
    app->add_option("--trace", trace, "CSV objective trace to write");
    app->add_option("--iters", iters, "Maximum iterations")->capture_default_str();
    app->add_option("--method", method, "lbfgs or adam")
        ->capture_default_str()
        ->check(CLI::IsMember({"lbfgs", "adam"}));
    app->add_option("--lr", lr, "Adam step size (pixel units)")->capture_default_str();
    app->add_option("--history", history, "L-BFGS history size")->capture_default_str();
    app->add_option("--init", init, "noise or content")
        ->capture_default_str()
        ->check(CLI::IsMember({"noise", "content"}));
    app->add_option("--height", height, "Output height for invert-style (default: style height)");
    app->add_option("--width", width, "Output width for invert-style (default: style width)");
    app->add_option("--trace-stride", stride, "Record every n-th iteration")->capture_default_str();
    obj.add(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    OptimizeConfig cfg;
    cfg.method = optimizer_from_string(method);
    cfg.max_iters = iters;
    cfg.seed = common.seed;
    cfg.learning_rate = lr;
    cfg.history = history;
    cfg.trace_stride = std::max<std::size_t>(stride, 1);
    try {
      cfg.validate();
    } catch (const Error& ex) {
      throw UsageError(ex.what());
    }
    const Network lossnet = common.lossnet();
    OptimizeResult res;
    if (mode == "style") {
      if (content.empty() || style.empty()) throw UsageError("--mode style needs --content and --style");
      const ImagePlane c = load_rgb(content), s = load_rgb(style);
      const ObjectiveSpec spec = obj.spec();
      spec.validate(lossnet);
      ObjectiveTargets targets;
      targets.content = c.as_batch();
      if (spec.lambda_s > 0.0) targets.style_grams = style_targets(lossnet, s, spec.style_taps);
      if (init == "content") {
        cfg.init = InitKind::image;
        cfg.init_image = c;
      }
      res = optimize_image(spec, lossnet, targets, c.height(), c.width(), cfg);
    } else if (mode == "invert-feat") {
      if (content.empty()) throw UsageError("--mode invert-feat needs --content");
      const ImagePlane c = load_rgb(content);
      if (init == "content") {
        cfg.init = InitKind::image;
        cfg.init_image = c;
      }
      res = invert_features(lossnet, obj.content_layer, c, cfg, obj.lambda_tv);
    } else {
      if (style.empty()) throw UsageError("--mode invert-style needs --style");
      const ImagePlane s = load_rgb(style);
      const std::size_t h = height ? height : s.height(), w = width ? width : s.width();
      if (init == "content") {
        if (content.empty()) throw UsageError("--init content needs --content");
        cfg.init = InitKind::image;
        cfg.init_image = load_rgb(content);
      }
      res = invert_style(lossnet, split_list(obj.style_layers), s, h, w, cfg, obj.lambda_tv);
    }
    save_image(quantize(res.image), output);
    if (!trace.empty()) write_text(trace, res.trace.to_csv(common.deterministic));
    const auto& e = res.trace.entries;
    err << "iterations " << res.iterations << " (" << res.stop_reason << "), objective "
        << e.front().loss.total << " -> " << e.back().loss.total << '\n';
    out << "wrote " << output << '\n';
    return kExitOk;
  }
};

struct EvalCmd {
  Common common;
  std::string ref, test, channels = "y", report;
  bool no_quantize = false, as_json = false;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("eval", "PSNR and SSIM between two folders of same-named images");
    common.add(app);
    app->add_option("--ref", ref, "Folder of reference images")->required();
    app->add_option("--test", test, "Folder of images to score")->required();
    app->add_option("--channels", channels, "y (luma of YCbCr) or rgb")
        ->capture_default_str()
        ->check(CLI::IsMember({"y", "rgb"}));
    app->add_flag("--no-quantize", no_quantize, "Score unrounded values");
    app->add_option("--report", report, "Write the report (CSV, or JSON with --json)");
    app->add_flag("--json", as_json, "Emit JSON instead of a table");
  }

  int run(std::ostream& out, std::ostream&) {
    MetricOptions opts;
    opts.channels = channels == "rgb" ? MetricChannels::rgb : MetricChannels::y;
    opts.quantize = !no_quantize;
    const MetricReport r = evaluate_folders(ref, test, opts);
    if (!report.empty()) write_text(report, as_json ? r.to_json().dump(2) + "\n" : r.to_csv());
    out << (as_json ? r.to_json().dump(2) + "\n" : r.to_table());
    return kExitOk;
  }
};

std::vector<std::pair<std::string, ImagePlane>> load_folder(const std::string& dir,
                                                            std::size_t size) {
  if (!std::filesystem::is_directory(dir)) throw Error(dir + ": not a directory");
  std::vector<std::pair<std::string, ImagePlane>> images;
  for (const auto& p : list_images(dir)) {
    ImagePlane img = load_rgb(p.string());
    if (size > 0) img = resize_bicubic(center_crop_square(img), size, size);
    images.emplace_back(p.filename().string(), std::move(img));
  }
  if (images.empty()) throw Error(dir + ": no images found");
  return images;
}

struct CompareCmd {
  Common common;
  std::string model, style, images, report;
  std::size_t baseline_iters = 500, size = 0;
  bool as_json = false;
  ObjectiveFlags obj{TrainConfig::style_preset().objective};
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand(
        "compare", "Objective of content image vs network output vs optimization baseline");
    common.add(app);
    app->add_option("--model", model, "Style network checkpoint")->required();
    app->add_option("--style", style, "Style image")->required();
    app->add_option("--images", images, "Folder of held-out content images")->required();
    app->add_option("--size", size, "Centre-crop and resize images to this size (0 = as is)")
        ->capture_default_str();
    app->add_option("--baseline-iters", baseline_iters, "Baseline iterations (0 disables)")
        ->capture_default_str();
    app->add_option("--report", report, "Write the report (CSV, or JSON with --json)");
    app->add_flag("--json", as_json, "Emit JSON");
    obj.add(app);
  }

  int run(std::ostream& out, std::ostream&) {
    const Network lossnet = common.lossnet();
    const Checkpoint ck = load_checkpoint(model);
    ObjectiveSpec spec = obj.spec();
    // Without explicit weights, use the objective the network was trained on.
    const json& trained = ck.meta.extra.contains("config") ? ck.meta.extra["config"]["objective"] : json();
    if (!trained.is_null()) {
      const ObjectiveSpec t = ObjectiveSpec::from_json(trained);
      if (!given(app, "--lambda-c")) spec.lambda_c = t.lambda_c;
      if (!given(app, "--lambda-s")) spec.lambda_s = t.lambda_s;
      if (!given(app, "--lambda-tv")) spec.lambda_tv = t.lambda_tv;
      if (!given(app, "--content-layer")) spec.content_tap = t.content_tap;
      if (!given(app, "--style-layers")) spec.style_taps = t.style_taps;
    }
    spec.validate(lossnet);
    const StyleTargets grams = spec.lambda_s > 0.0
                                   ? style_targets(lossnet, load_rgb(style), spec.style_taps)
                                   : StyleTargets{};
    const ComparisonReport r = compare_objectives(load_folder(images, size), spec, lossnet, grams,
                                                  ck.network, baseline_iters, common.seed);
    if (!report.empty()) write_text(report, as_json ? r.to_json().dump(2) + "\n" : r.to_csv());
    if (as_json) {
      out << r.to_json().dump(2) << '\n';
    } else {
      out << r.to_csv() << "feed-forward below content objective: " << r.feedforward_win_rate() * 100
          << "%\n";
    }
    return kExitOk;
  }
};

struct BenchCmd {
  Common common;
  std::string model, style, input, sizes = "64", report;
  std::size_t baseline_iters = 100, repeats = 5, baseline_repeats = 1;
  bool as_json = false;
  ObjectiveFlags obj{TrainConfig::style_preset().objective};
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("bench", "Time feed-forward stylization against the baseline");
    common.add(app);
    app->add_option("--model", model, "Style network checkpoint")->required();
    app->add_option("--style", style, "Style image")->required();
    app->add_option("--input", input, "Content image")->required();
    app->add_option("--sizes", sizes, "Comma-separated square sizes")->capture_default_str();
    app->add_option("--baseline-iters", baseline_iters, "Baseline iterations")->capture_default_str();
    app->add_option("--repeats", repeats, "Feed-forward repeats (>= 5; median reported)")
        ->capture_default_str();
    app->add_option("--baseline-repeats", baseline_repeats, "Baseline repeats")->capture_default_str();
    app->add_option("--report", report, "Write the report (CSV, or JSON with --json)");
    app->add_flag("--json", as_json, "Emit JSON");
    obj.add(app);
  }

  int run(std::ostream& out, std::ostream&) {
    const Network lossnet = common.lossnet();
    const Checkpoint ck = load_checkpoint(model);
    const ObjectiveSpec spec = obj.spec();
    spec.validate(lossnet);
    BenchOptions opts;
    opts.sizes = split_sizes(sizes);
    opts.baseline_iters = baseline_iters;
    opts.feedforward_repeats = repeats;
    opts.baseline_repeats = baseline_repeats;
    opts.seed = common.seed;
    if (repeats < 5) throw UsageError("--repeats must be at least 5");
    const StyleTargets grams = spec.lambda_s > 0.0
                                   ? style_targets(lossnet, load_rgb(style), spec.style_taps)
                                   : StyleTargets{};
    const BenchReport r = benchmark(ck.network, spec, lossnet, grams, load_rgb(input), opts);
    if (!report.empty()) {
      // Timings never repeat; a deterministic report keeps only the layout.
      BenchReport w = r;
      if (common.deterministic) {
        for (BenchRow& row : w.rows) {
          row.feedforward_seconds = row.baseline_seconds = row.speedup = 0.0;
          row.ordering_consistent = false;
          std::fill(row.feedforward_samples.begin(), row.feedforward_samples.end(), 0.0);
          std::fill(row.baseline_samples.begin(), row.baseline_samples.end(), 0.0);
        }
      }
      write_text(report, as_json ? w.to_json().dump(2) + "\n" : w.to_csv());
    }
    out << (as_json ? r.to_json().dump(2) + "\n" : r.to_table());
    return kExitOk;
  }
};

struct InspectCmd {
  Common common;
  std::string what, model, net = "style";
  std::size_t factor = 4, size = 256, probe = 0;
  bool as_json = false;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("inspect", "Network analysis: flops, receptive-field or spec");
    common.add(app);
    app->add_option("what", what, "flops, receptive-field or spec")
        ->required()
        ->check(CLI::IsMember({"flops", "receptive-field", "spec"}));
    app->add_option("--model", model, "Checkpoint to inspect (overrides --net)");
    app->add_option("--net", net, "Built-in network: style, sr or mini")
        ->capture_default_str()
        ->check(CLI::IsMember({"style", "sr", "mini"}));
    app->add_option("--factor", factor, "Super-resolution factor for --net sr")->capture_default_str();
    app->add_option("--size", size, "Input height and width for flops")->capture_default_str();
    app->add_option("--probe", probe, "Also measure the receptive field on a probe of this size");
    app->add_flag("--json", as_json, "Emit JSON");
  }

  int run(std::ostream& out, std::ostream&) {
    NetworkSpec spec;
    if (!model.empty()) {
      spec = load_checkpoint(model).network.spec();
    } else if (net == "style") {
      spec = build_style_net();
    } else if (net == "sr") {
      try {
        spec = build_sr_net(factor);
      } catch (const Error& ex) {
        throw UsageError(ex.what());
      }
    } else {
      spec = build_mini_loss_net_spec();
    }
    json j{{"network", spec.family}};
    if (what == "spec") {
      out << spec.to_json().dump(2) << '\n';
      return kExitOk;
    }
    if (what == "flops") {
      j["height"] = size;
      j["width"] = size;
      j["multiply_adds"] = count_multiply_adds(spec, size, size);
    } else {
      j["receptive_field"] = receptive_field(spec);
      if (probe > 0) {
        j["probe_size"] = probe;
        j["empirical_receptive_field"] = empirical_receptive_field(spec, probe);
      }
    }
    if (as_json) {
      out << j.dump(2) << '\n';
    } else {
      for (const auto& [k, v] : j.items()) out << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }
    return kExitOk;
  }
};

// Expands `--config FILE` into flags placed before the command-line flags, so
// explicit flags win (every option keeps its last value).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  std::ifstream f(path);
  if (!f) throw Error(path + ": cannot open config file");
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::exception& ex) {
    throw UsageError(path + ": invalid JSON: " + ex.what());
  }
  if (!cfg.is_object()) throw UsageError(path + ": config must be a JSON object");
  std::vector<std::string> out{args[0]};
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::vector<std::string> items;
      for (const auto& v : value) items.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      out.push_back(flag);
      out.push_back(join_list(items));
    } else {
      out.push_back(flag);
      out.push_back(value.dump());
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"percept: perceptual-loss style transfer and super-resolution toolkit", "percept"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainCmd train_cmd;
  StylizeCmd stylize_cmd;
  SuperresCmd superres_cmd;
  OptimizeCmd optimize_cmd;
  EvalCmd eval_cmd;
  CompareCmd compare_cmd;
  BenchCmd bench_cmd;
  InspectCmd inspect_cmd;
  train_cmd.add(app);
  stylize_cmd.add(app);
  superres_cmd.add(app);
  optimize_cmd.add(app);
  eval_cmd.add(app);
  compare_cmd.add(app);
  bench_cmd.add(app);
  inspect_cmd.add(app);

  try {
    std::vector<std::string> argv = expand_config(args);
    std::reverse(argv.begin(), argv.end());  // CLI11 consumes from the back
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  try {
    if (train_cmd.app->parsed()) return train_cmd.run(out, err);
    if (stylize_cmd.app->parsed()) return stylize_cmd.run(out, err);
    if (superres_cmd.app->parsed()) return superres_cmd.run(out, err);
    if (optimize_cmd.app->parsed()) return optimize_cmd.run(out, err);
    if (eval_cmd.app->parsed()) return eval_cmd.run(out, err);
    if (compare_cmd.app->parsed()) return compare_cmd.run(out, err);
    if (bench_cmd.app->parsed()) return bench_cmd.run(out, err);
    if (inspect_cmd.app->parsed()) return inspect_cmd.run(out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace percept
