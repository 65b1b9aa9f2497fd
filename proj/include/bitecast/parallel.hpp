#pragma once

#include <cstddef>
#include <functional>

namespace bitecast {

// Global thread cap used whenever a call site passes threads == 0.
// Defaults to the hardware concurrency; the CLI sets it from --threads.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for every i in [0, count). Work items must be independent and
// write only their own output slots, so results never depend on scheduling.
// Exceptions from workers are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace bitecast
