#pragma once

#include <stdexcept>
#include <string>

namespace dspgemm {

// Raised for malformed inputs: shape mismatches, bad configuration files,
// infeasible tiling requests.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dspgemm
