// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace percept {

/// Worker thread cap. Reads PF_THREADS on first use; defaults to 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Each index is processed by exactly one
/// worker, so results that depend only on i are identical for any thread
/// count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace percept
