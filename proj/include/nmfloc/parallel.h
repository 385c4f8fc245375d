#ifndef NMFLOC_PARALLEL_H_
#define NMFLOC_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace nmfloc {

// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
// Each index runs exactly once; callers write results into slot i so output
// order never depends on scheduling. The first exception thrown by any body
// is rethrown after all workers join.
void ParallelFor(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace nmfloc

#endif  // NMFLOC_PARALLEL_H_
