#ifndef NMFLOC_SRC_FFTW_LOCK_H_
#define NMFLOC_SRC_FFTW_LOCK_H_

#include <mutex>

namespace nmfloc::internal {

// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& FftwPlannerMutex();

}  // namespace nmfloc::internal

#endif  // NMFLOC_SRC_FFTW_LOCK_H_
