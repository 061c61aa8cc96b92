#pragma once

#include <cstddef>
#include <functional>

namespace nmlrd {

/// Worker count: NMLRD_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, count) across thread_count() workers in
/// contiguous chunks. Callers write results into per-index slots and reduce
/// in index order afterwards, so results do not depend on the thread count.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace nmlrd
