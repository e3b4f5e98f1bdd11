#pragma once

#include <cstddef>
#include <functional>

namespace mgnet {

/// Number of worker threads used by parallel_for (1 = run inline).
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Indices are split into contiguous static
/// chunks, one per worker; callers must only write state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mgnet
