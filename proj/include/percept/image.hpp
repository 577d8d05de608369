// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "percept/tensor.hpp"

namespace percept {

enum class ColorSpace { rgb, ycbcr, y };

std::string to_string(ColorSpace cs);
std::size_t channel_count(ColorSpace cs);

/// Raised for unreadable, truncated or unsupported image files.
class ImageIoError : public Error {
public:
  ImageIoError(const std::filesystem::path& path, const std::string& reason);

  const std::filesystem::path& path() const noexcept { return path_; }

private:
  std::filesystem::path path_;
};

/// C x H x W image with nominal value range [0, 255].
class ImagePlane {
public:
  ImagePlane() = default;
  ImagePlane(ColorSpace cs, std::size_t height, std::size_t width, double fill = 0.0);
  /// Wraps a C x H x W tensor; C must match the colour space.
  ImagePlane(ColorSpace cs, Tensor chw);

  ColorSpace colorspace() const noexcept { return cs_; }
  std::size_t channels() const noexcept { return pixels_.empty() ? 0 : pixels_.dim(0); }
  std::size_t height() const noexcept { return pixels_.empty() ? 0 : pixels_.dim(1); }
  std::size_t width() const noexcept { return pixels_.empty() ? 0 : pixels_.dim(2); }

  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return pixels_[(c * height() + h) * width() + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return pixels_[(c * height() + h) * width() + w];
  }

  const Tensor& tensor() const noexcept { return pixels_; }
  Tensor& tensor() noexcept { return pixels_; }

  /// The image as a 1 x C x H x W batch.
  Tensor as_batch() const;
  /// Sample `n` of an N x C x H x W batch.
  static ImagePlane from_batch(const Tensor& batch, std::size_t n,
                               ColorSpace cs = ColorSpace::rgb);

  friend bool operator==(const ImagePlane& a, const ImagePlane& b) noexcept {
    return a.cs_ == b.cs_ && a.pixels_ == b.pixels_;
  }

private:
  ColorSpace cs_ = ColorSpace::rgb;
  Tensor pixels_;
};

/// Stacks same-sized images into an N x C x H x W batch.
Tensor stack_batch(const std::vector<ImagePlane>& images);

/// Clamps to [0, 255] and rounds half away from zero.
std::uint8_t to_byte(double value) noexcept;
/// Rounds every value to the byte grid (values stay doubles).
ImagePlane quantize(const ImagePlane& image);

/// Reads PNG (8-bit gray/RGB, alpha dropped) or binary PGM/PPM (P5/P6,
/// maxval 255). Format is detected from the file contents.
ImagePlane load_image(const std::filesystem::path& path);
/// Writes PNG for ".png", otherwise PPM/PGM by channel count. Values are
/// clamped and rounded to bytes.
void save_image(const ImagePlane& image, const std::filesystem::path& path);

/// Separable bicubic resampling (a = -0.5) with pixel-centre alignment and
/// clamped edge samples.
ImagePlane resize_bicubic(const ImagePlane& image, std::size_t out_h, std::size_t out_w);

/// Normalized separable Gaussian with radius ceil(3 sigma) and mirrored
/// (half-sample symmetric) boundary.
ImagePlane gaussian_blur(const ImagePlane& image, double sigma);

/// Full-range BT.601 conversion.
ImagePlane rgb_to_ycbcr(const ImagePlane& image);
/// Luma channel of an RGB or YCbCr image.
ImagePlane y_channel(const ImagePlane& image);

/// Per-channel monotone remapping of `source` so its 256-bin histogram
/// follows `reference`. Output values lie on the byte grid.
ImagePlane histogram_match(const ImagePlane& source, const ImagePlane& reference);

/// Largest centred square crop.
ImagePlane center_crop_square(const ImagePlane& image);
ImagePlane crop(const ImagePlane& image, std::size_t top, std::size_t left,
                std::size_t height, std::size_t width);

/// Images (png/ppm/pgm) in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace percept
