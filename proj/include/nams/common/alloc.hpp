#pragma once

namespace nams {

/// Keeps large freed blocks inside the heap instead of returning them to the
/// OS. The training and search loops allocate and free the same multi-MB
/// tensors thousands of times; without this glibc maps and faults them in
/// afresh every iteration. No-op on other allocators.
void tune_allocator();

}  // namespace nams
