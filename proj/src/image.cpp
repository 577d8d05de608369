// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include "percept/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include <png.h>

namespace percept {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(path, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImagePlane from_bytes(const unsigned char* bytes, std::size_t channels, std::size_t height,
                      std::size_t width) {
  ImagePlane img(channels == 1 ? ColorSpace::y : ColorSpace::rgb, height, width);
  for (std::size_t h = 0; h < height; ++h) {
    for (std::size_t w = 0; w < width; ++w) {
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(c, h, w) = bytes[(h * width + w) * channels + c];
      }
    }
  }
  return img;
}

std::vector<unsigned char> to_interleaved_bytes(const ImagePlane& image) {
  const std::size_t C = image.channels(), H = image.height(), W = image.width();
  std::vector<unsigned char> out(C * H * W);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      for (std::size_t c = 0; c < C; ++c) out[(h * W + w) * C + c] = to_byte(image.at(c, h, w));
    }
  }
  return out;
}

ImagePlane decode_png(const std::filesystem::path& path, const std::vector<unsigned char>& buf) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, buf.data(), buf.size())) {
    throw ImageIoError(path, std::string("invalid PNG: ") + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    const std::string reason = img.message;
    png_image_free(&img);
    throw ImageIoError(path, "truncated or corrupt PNG: " + reason);
  }
  return from_bytes(pixels.data(), color ? 3 : 1, img.height, img.width);
}

// Parses the next whitespace-delimited header token, skipping comments.
bool next_token(const std::vector<unsigned char>& buf, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') {
    token.push_back(static_cast<char>(buf[pos++]));
  }
  return !token.empty();
}

ImagePlane decode_pnm(const std::filesystem::path& path, const std::vector<unsigned char>& buf) {
  std::size_t pos = 2;
  const std::size_t channels = buf[1] == '6' ? 3 : 1;
  std::array<std::size_t, 3> header{};
  std::string tok;
  for (auto& field : header) {
    if (!next_token(buf, pos, tok)) throw ImageIoError(path, "truncated PNM header");
    try {
      field = std::stoul(tok);
    } catch (const std::exception&) {
      throw ImageIoError(path, "malformed PNM header field '" + tok + "'");
    }
  }
  const auto [width, height, maxval] = header;
  if (maxval != 255) {
    throw ImageIoError(path, "unsupported PNM maxval " + std::to_string(maxval));
  }
  if (width == 0 || height == 0) throw ImageIoError(path, "empty PNM image");
  ++pos;  // single whitespace byte after maxval
  const std::size_t need = width * height * channels;
  if (buf.size() < pos + need) {
    throw ImageIoError(path, "truncated PNM payload: expected " + std::to_string(need) +
                                 " bytes, found " +
                                 std::to_string(buf.size() > pos ? buf.size() - pos : 0));
  }
  return from_bytes(buf.data() + pos, channels, height, width);
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct AxisTaps {
  std::vector<std::array<std::size_t, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

AxisTaps bicubic_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  taps.index.resize(out);
  taps.weight.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const long last = static_cast<long>(in) - 1;
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const long i = static_cast<long>(base) - 1 + k;
      taps.index[o][k] = static_cast<std::size_t>(std::clamp(i, 0L, last));
      taps.weight[o][k] = cubic_weight(t - (k - 1));
    }
  }
  return taps;
}

std::size_t mirror(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

}  // namespace

std::string to_string(ColorSpace cs) {
  switch (cs) {
    case ColorSpace::rgb: return "RGB";
    case ColorSpace::ycbcr: return "YCbCr";
    case ColorSpace::y: return "Y";
  }
  return "?";
}

std::size_t channel_count(ColorSpace cs) { return cs == ColorSpace::y ? 1 : 3; }

ImageIoError::ImageIoError(const std::filesystem::path& path, const std::string& reason)
    : Error(path.string() + ": " + reason), path_(path) {}

ImagePlane::ImagePlane(ColorSpace cs, std::size_t height, std::size_t width, double fill)
    : cs_(cs), pixels_(Shape{channel_count(cs), height, width}, fill) {}

ImagePlane::ImagePlane(ColorSpace cs, Tensor chw) : cs_(cs), pixels_(std::move(chw)) {
  if (pixels_.rank() != 3 || pixels_.dim(0) != channel_count(cs)) {
    throw ShapeError(to_string(cs) + " image needs " + std::to_string(channel_count(cs)) +
                     " channels, got tensor " + to_string(pixels_.shape()));
  }
}

Tensor ImagePlane::as_batch() const {
  return pixels_.reshaped(Shape{1, channels(), height(), width()});
}

ImagePlane ImagePlane::from_batch(const Tensor& batch, std::size_t n, ColorSpace cs) {
  if (batch.rank() != 4 || n >= batch.dim(0)) {
    throw ShapeError("cannot take sample " + std::to_string(n) + " of batch " +
                     to_string(batch.shape()));
  }
  const std::size_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  const auto first = batch.storage().begin() + static_cast<long>(n * C * H * W);
  return ImagePlane(cs, Tensor(Shape{C, H, W},
                               std::vector<double>(first, first + static_cast<long>(C * H * W))));
}

Tensor stack_batch(const std::vector<ImagePlane>& images) {
  if (images.empty()) throw Error("stack_batch: no images");
  const Shape one = images.front().tensor().shape();
  std::vector<double> values;
  values.reserve(images.size() * numel(one));
  for (const auto& img : images) {
    if (img.tensor().shape() != one) {
      throw ShapeError("stack_batch: image " + to_string(img.tensor().shape()) +
                       " differs from " + to_string(one));
    }
    values.insert(values.end(), img.tensor().storage().begin(), img.tensor().storage().end());
  }
  return Tensor(Shape{images.size(), one[0], one[1], one[2]}, std::move(values));
}

std::uint8_t to_byte(double value) noexcept {
  if (!(value > 0.0)) return 0;  // also maps NaN to 0
  if (value >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::round(value));
}

ImagePlane quantize(const ImagePlane& image) {
  ImagePlane out = image;
  for (double& v : out.tensor().data()) v = to_byte(v);
  return out;
}

ImagePlane load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ImageIoError(path, "file does not exist");
  const auto buf = read_file(path);
  static constexpr std::array<unsigned char, 8> png_magic{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() >= 8 && std::equal(png_magic.begin(), png_magic.end(), buf.begin())) {
    return decode_png(path, buf);
  }
  if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '6')) {
    return decode_pnm(path, buf);
  }
  if (buf.empty()) throw ImageIoError(path, "empty file");
  throw ImageIoError(path, "unsupported image format (expected PNG, P5 or P6)");
}

void save_image(const ImagePlane& image, const std::filesystem::path& path) {
  const std::size_t C = image.channels();
  if (C != 1 && C != 3) throw ImageIoError(path, "cannot save image with " + std::to_string(C) + " channels");
  const auto bytes = to_interleaved_bytes(image);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
      throw ImageIoError(path, std::string("PNG write failed: ") + img.message);
    }
    return;
  }
  if (!ext.empty() && ext != ".ppm" && ext != ".pgm" && ext != ".pnm") {
    throw ImageIoError(path, "unsupported output extension '" + ext + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError(path, "cannot open for writing");
  out << (C == 3 ? "P6" : "P5") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError(path, "write failed");
}

ImagePlane resize_bicubic(const ImagePlane& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bicubic: output dims must be >= 1");
  const std::size_t C = image.channels(), H = image.height(), W = image.width();
  const AxisTaps rows = bicubic_taps(H, out_h);
  const AxisTaps cols = bicubic_taps(W, out_w);

  // Horizontal pass: C x H x out_w.
  std::vector<double> tmp(C * H * out_w);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t o = 0; o < out_w; ++o) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += cols.weight[o][k] * image.at(c, h, cols.index[o][k]);
        tmp[(c * H + h) * out_w + o] = s;
      }
    }
  }
  ImagePlane out(image.colorspace(), out_h, out_w);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t o = 0; o < out_h; ++o) {
      for (std::size_t w = 0; w < out_w; ++w) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += rows.weight[o][k] * tmp[(c * H + rows.index[o][k]) * out_w + w];
        out.at(c, o, w) = s;
      }
    }
  }
  return out;
}

ImagePlane gaussian_blur(const ImagePlane& image, double sigma) {
  if (!(sigma > 0.0)) throw Error("gaussian_blur: sigma must be positive");
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& v : kernel) v /= total;

  const std::size_t C = image.channels(), H = image.height(), W = image.width();
  ImagePlane tmp(image.colorspace(), H, W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        double s = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          s += kernel[k + radius] * image.at(c, h, mirror(static_cast<long>(w) + k, W));
        }
        tmp.at(c, h, w) = s;
      }
    }
  }
  ImagePlane out(image.colorspace(), H, W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        double s = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          s += kernel[k + radius] * tmp.at(c, mirror(static_cast<long>(h) + k, H), w);
        }
        out.at(c, h, w) = s;
      }
    }
  }
  return out;
}

ImagePlane rgb_to_ycbcr(const ImagePlane& image) {
  if (image.colorspace() != ColorSpace::rgb) {
    throw Error("rgb_to_ycbcr: expected an RGB image, got " + to_string(image.colorspace()));
  }
  ImagePlane out(ColorSpace::ycbcr, image.height(), image.width());
  for (std::size_t h = 0; h < image.height(); ++h) {
    for (std::size_t w = 0; w < image.width(); ++w) {
      const double r = image.at(0, h, w), g = image.at(1, h, w), b = image.at(2, h, w);
      out.at(0, h, w) = 0.299 * r + 0.587 * g + 0.114 * b;
      out.at(1, h, w) = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      out.at(2, h, w) = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }
  return out;
}

ImagePlane y_channel(const ImagePlane& image) {
  switch (image.colorspace()) {
    case ColorSpace::y:
      return image;
    case ColorSpace::ycbcr: {
      ImagePlane out(ColorSpace::y, image.height(), image.width());
      for (std::size_t h = 0; h < image.height(); ++h) {
        for (std::size_t w = 0; w < image.width(); ++w) out.at(0, h, w) = image.at(0, h, w);
      }
      return out;
    }
    case ColorSpace::rgb:
      return y_channel(rgb_to_ycbcr(image));
  }
  return image;
}

ImagePlane histogram_match(const ImagePlane& source, const ImagePlane& reference) {
  if (source.channels() != reference.channels()) {
    throw ShapeError("histogram_match: source has " + std::to_string(source.channels()) +
                     " channels, reference has " + std::to_string(reference.channels()));
  }
  const std::size_t src_px = source.height() * source.width();
  const std::size_t ref_px = reference.height() * reference.width();
  ImagePlane out(source.colorspace(), source.height(), source.width());

  for (std::size_t c = 0; c < source.channels(); ++c) {
    std::array<double, 256> src_cdf{}, ref_cdf{};
    const double* src = source.tensor().data().data() + c * src_px;
    const double* ref = reference.tensor().data().data() + c * ref_px;
    for (std::size_t i = 0; i < src_px; ++i) src_cdf[to_byte(src[i])] += 1.0;
    for (std::size_t i = 0; i < ref_px; ++i) ref_cdf[to_byte(ref[i])] += 1.0;
    std::array<double, 256> src_mass{};
    double run_s = 0.0, run_r = 0.0;
    for (std::size_t k = 0; k < 256; ++k) {
      src_mass[k] = src_cdf[k] / static_cast<double>(src_px);
      run_s += src_mass[k];
      src_cdf[k] = run_s;
      run_r += ref_cdf[k] / static_cast<double>(ref_px);
      ref_cdf[k] = run_r;
    }
    src_cdf[255] = ref_cdf[255] = 1.0;

    for (std::size_t i = 0; i < src_px; ++i) {
      // Position of the value inside its bin [k - 0.5, k + 0.5).
      const double v = std::clamp(src[i], 0.0, 255.0);
      const std::uint8_t k = to_byte(v);
      const double t = std::clamp(v - (static_cast<double>(k) - 0.5), 0.0, 1.0);
      const double below = k == 0 ? 0.0 : src_cdf[k - 1];
      const double p = below + t * src_mass[k];
      // Smallest occupied reference level whose CDF reaches p.
      std::size_t r = static_cast<std::size_t>(
          std::lower_bound(ref_cdf.begin(), ref_cdf.end(), p) - ref_cdf.begin());
      r = std::min<std::size_t>(r, 255);
      while (r < 255 && ref_cdf[r] <= 0.0) ++r;
      out.tensor()[c * src_px + i] = static_cast<double>(r);
    }
  }
  return out;
}

ImagePlane center_crop_square(const ImagePlane& image) {
  const std::size_t side = std::min(image.height(), image.width());
  return crop(image, (image.height() - side) / 2, (image.width() - side) / 2, side, side);
}

ImagePlane crop(const ImagePlane& image, std::size_t top, std::size_t left, std::size_t height,
                std::size_t width) {
  if (top + height > image.height() || left + width > image.width()) {
    throw ShapeError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                     std::to_string(top) + "," + std::to_string(left) + ") exceeds image " +
                     std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  ImagePlane out(image.colorspace(), height, width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w) out.at(c, h, w) = image.at(c, top + h, left + w);
    }
  }
  return out;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ImageIoError(dir, "not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_extension(entry.path());
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace percept
