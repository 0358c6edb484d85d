#pragma once

#include <cstddef>
#include <functional>

namespace mdt {

// Runs fn(0..n-1) on up to `jobs` worker threads. fn must either be pure or
// write only to slot i of pre-sized output storage; under that contract the
// result is identical for every worker count and schedule. If several
// iterations throw, the exception of the lowest index is rethrown.
void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t)>& fn);

// 0 means "ask the hardware".
unsigned resolve_jobs(unsigned requested);

}  // namespace mdt
