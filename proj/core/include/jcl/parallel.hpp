#pragma once

#include <exception>
#include <functional>

namespace jcl {

// Worker count: hardware concurrency, capped by JCL_THREADS when set.
int worker_threads();

// Runs body(i) for i in [0, n) on contiguous static chunks. Nested calls run
// serially. If several chunks throw, the exception from the lowest chunk wins.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace jcl
