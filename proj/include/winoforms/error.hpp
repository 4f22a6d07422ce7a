#pragma once

#include <stdexcept>
#include <string>

namespace winoforms {

// Raised for every contract violation in the library: bad shapes, malformed
// input files, invalid hyperparameters.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace winoforms
