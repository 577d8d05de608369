// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "percept/autodiff.hpp"
#include "percept/image.hpp"

namespace percept::testing {

/// Smooth colour gradients plus a few flat-shaded discs and boxes; a stand-in
/// for natural photographs.
ImagePlane synthetic_photo(std::uint64_t seed, std::size_t height, std::size_t width);
std::vector<ImagePlane> synthetic_photos(std::uint64_t seed, std::size_t count, std::size_t height,
                                         std::size_t width);

/// Oriented colour stripes with a second harmonic; a strongly textured style
/// target.
ImagePlane synthetic_style(std::uint64_t seed, std::size_t height, std::size_t width);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Finite-difference check of d(f)/d(x) against `analytic` at `samples`
/// random coordinates (all coordinates if samples == 0). Returns the largest
/// relative error max|a - n| / max(|a|, |n|, floor).
///
/// A coordinate whose estimate changes when h is halved has a kink (ReLU,
/// max-pool switch) within the stencil; it has no derivative to check there
/// and is skipped, counted in `kinks` when given.
double max_fd_error(const std::function<double(const Tensor&)>& f, const Tensor& x,
                    const Tensor& analytic, std::size_t samples, std::uint64_t seed,
                    double h = 1e-5, double floor = 1e-6, std::size_t* kinks = nullptr);

/// Scalar <w, y> recorded on y's tape; turns any op into a scalar probe whose
/// input gradient is the vector-Jacobian product with w.
Var contract(const Var& y, const Tensor& w);

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central-difference check of op's gradient with respect to inputs[which],
/// probed with a random output weighting. Returns max_fd_error over all
/// coordinates.
double op_fd_error(const OpFn& op, const std::vector<Tensor>& inputs, std::size_t which,
                   std::uint64_t seed, std::size_t* kinks = nullptr, double h = 1e-5);

}  // namespace percept::testing
