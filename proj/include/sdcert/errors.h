#pragma once

#include <stdexcept>
#include <string>

namespace sdcert {

/// Raised when a numerical routine fails to produce a trustworthy result
/// (eigen solver failure, iteration cap reached, non-finite values).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sdcert
