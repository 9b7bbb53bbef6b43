#pragma once

namespace mvcl {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS. Training allocates and frees the same large buffers every step, and
/// fresh mmap pages cost a fault per page on first touch. Call once at
/// process start; a no-op outside glibc.
void KeepHeapResident();

}  // namespace mvcl
