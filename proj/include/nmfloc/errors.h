#ifndef NMFLOC_ERRORS_H_
#define NMFLOC_ERRORS_H_

#include <stdexcept>

namespace nmfloc {

// Input that is well formed but on which the requested quantity is undefined:
// silent frames, zero-power signals, coincident source and microphone.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmfloc

#endif  // NMFLOC_ERRORS_H_
