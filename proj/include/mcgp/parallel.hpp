#pragma once

#include <cstddef>
#include <functional>

namespace mcgp {

/// Worker count from MCGP_THREADS (default 1, capped at 256).
std::size_t thread_count();

/// Calls fn(i) for i in [0, n) on up to thread_count() threads. Work is handed
/// out by index so results written to slot i do not depend on scheduling. The
/// first exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mcgp
