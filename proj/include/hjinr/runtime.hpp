#pragma once

namespace hjinr {

/// Keeps large Eigen temporaries on the heap instead of fresh mmap regions.
/// Batched network passes allocate many half-megabyte blocks per epoch and
/// the default glibc policy maps and unmaps each one. Call once at startup;
/// a no-op on other C libraries.
void tune_allocator();

}  // namespace hjinr
