#pragma once

namespace dng {

/// Process-wide allocator settings for training workloads: keeps large tensor buffers on
/// the heap instead of mapping and unmapping them on every step. Call once at startup.
void configure_runtime();

}  // namespace dng
