// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace krf {

/// Number of worker threads used by node-parallel maps. Defaults to 1.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, count). Chunks are contiguous, so any body that
/// only writes slot i is deterministic regardless of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> values);

}  // namespace krf
