#include "gpforge/errors.hpp"

namespace gpforge {

FactorizationError::FactorizationError(std::ptrdiff_t pivot, double value)
    : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " has value " + std::to_string(value)),
      pivot_(pivot),
      value_(value) {}

StreamingError::StreamingError(std::size_t emitted, const std::string& what)
    : std::runtime_error("streaming aborted after " + std::to_string(emitted) +
                         " elements: " + what),
      emitted_(emitted) {}

}  // namespace gpforge
