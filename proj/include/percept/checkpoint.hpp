// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "percept/network.hpp"

namespace percept {

/// Weight file layout: magic "PFNW", u32 version, u64 metadata length, UTF-8
/// JSON metadata, then float32 little-endian parameter payload in manifest
/// order.
inline constexpr char kCheckpointMagic[4] = {'P', 'F', 'N', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
public:
  enum class Kind {
    io,
    not_a_checkpoint,
    version_mismatch,
    truncated,
    malformed,
    shape_mismatch,
    missing_parameter,
  };

  CheckpointError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Metadata JSON exactly as written to the file header.
nlohmann::json checkpoint_metadata(const Checkpoint& checkpoint);

}  // namespace percept
