#pragma once

#include <cstddef>
#include <functional>

namespace mq {

/// Job count from MQ_JOBS, else 1.
int default_jobs();

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written to
/// index-keyed slots; the first exception by index is rethrown after joining.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace mq
