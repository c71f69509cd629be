#pragma once

#include <cstddef>
#include <functional>

namespace pareg {

/// Splits [0, n) into consecutive blocks of `block` items and runs
/// body(begin, end) for each block on up to `threads` workers. Block
/// boundaries do not depend on the thread count. The first exception thrown
/// by any block is rethrown after all workers join.
void parallel_blocks(std::size_t n, std::size_t block, int threads,
                     const std::function<void(std::size_t, std::size_t)>& body);

/// Worker count to use: `requested` when positive, else 1.
int resolve_threads(int requested);

}  // namespace pareg
