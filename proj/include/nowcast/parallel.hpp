#pragma once

#include <cstddef>
#include <functional>

namespace nowcast {

// Worker cap from NOWCAST_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
// visited exactly once; the first exception thrown is rethrown after join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nowcast

namespace nowcast {

// Keeps freed tensor storage in the process heap instead of returning it to
// the OS after every graph, which otherwise dominates training time through
// page faults. Process-wide; call once from main().
void tune_allocator();

}  // namespace nowcast
