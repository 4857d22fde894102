// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ohmlab {

/// A numerical contract (unitarity, grid coverage, support condition, ...) failed.
class NumericalContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ohmlab
