#pragma once

#include <cstddef>
#include <functional>

namespace rcmcl {

// Process-wide worker count for kernels that split independent rows across
// threads. Every parallel region writes disjoint outputs, so results do not
// depend on this value.
void set_num_threads(int n);
int num_threads() noexcept;

// Runs fn(begin, end) over [0, n) split into contiguous chunks. Falls back to
// a single call when one thread is configured or n is below `min_chunk`.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

// Keeps large freed blocks in the heap instead of returning them to the OS.
// Training allocates and frees many same-sized matrices per step; on glibc the
// default mmap threshold turns each into a syscall pair. No-op elsewhere.
void configure_allocator() noexcept;

}  // namespace rcmcl
