#pragma once

#include <cstddef>

// Process-wide allocation gauge. On glibc targets src/memtrack.cpp wraps the
// C allocation entry points (malloc, calloc, realloc, aligned variants, free)
// with counting versions, so heap traffic from any source, including matrix
// buffers and operator new, is visible. The counters are approximate
// (allocator-usable sizes, not request sizes) and exist for the benchmark's
// resource-bound checks, not accounting. On other platforms the counters stay
// at zero.

namespace aspus::memtrack {

/// Bytes currently allocated through the tracked entry points.
std::size_t current() noexcept;

/// Highest value current() has reached since the last reset.
std::size_t high_water() noexcept;

/// Sets the high-water mark back to the current level and returns it.
std::size_t reset_high_water() noexcept;

}  // namespace aspus::memtrack
