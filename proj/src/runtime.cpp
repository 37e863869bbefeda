#include "dng/runtime.hpp"

#include <malloc.h>

namespace dng {

void configure_runtime() {
    // glibc caps the mmap threshold at 32 MiB on 64-bit targets
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TOP_PAD, 64 * 1024 * 1024);
}

}  // namespace dng
