#pragma once

#include <cstddef>
#include <functional>

namespace qbe {

// Process-wide worker count for parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned effective_thread_count();

// Runs fn(begin, end) over disjoint slices of [0, n). Callers get determinism
// by writing to preassigned slots only; no reduction happens here.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace qbe
