#pragma once

#include <cstddef>
#include <functional>

namespace polaron {

// Worker count for parallel loops; defaults to POLARON_THREADS or the hardware count.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n) on up to thread_count() threads; rethrows the first exception.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace polaron
