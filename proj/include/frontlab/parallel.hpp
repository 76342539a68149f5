#pragma once

#include <cstddef>
#include <functional>

namespace frontlab {

/// Worker count used by parallel_for (default: hardware concurrency, at least 1).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) for i in [0, n) over contiguous static chunks. Each index is handled by
/// exactly one worker, so results do not depend on the worker count as long as body(i)
/// writes only data owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace frontlab
