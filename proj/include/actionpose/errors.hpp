// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace actionpose {

// Invalid arguments or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during optimization. Carries the seed of the offending
// batch so the failure can be replayed. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::uint64_t batch_seed, long step)
      : std::runtime_error(what), batch_seed(batch_seed), step(step) {}
  std::uint64_t batch_seed = 0;
  long step = -1;
};

}  // namespace actionpose
