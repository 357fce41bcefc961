#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bpre {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParameter : Error {
  using Error::Error;
};

// Raised when a count draw would exceed the exactly representable range.
// `partial` carries the last exact value before the ceiling was hit.
struct OverflowError : Error {
  OverflowError(const std::string& msg, double partial)
      : Error(msg), partial_value(partial) {}
  double partial_value;
};

// Raised by samplers/estimators that give up after a configured number of
// attempts or steps. Carries the work spent and the best running estimate.
struct BudgetExceeded : Error {
  BudgetExceeded(const std::string& msg, std::uint64_t spent, double running)
      : Error(msg), attempts(spent), running_estimate(running) {}
  std::uint64_t attempts;
  double running_estimate;
};

struct DegenerateSample : Error {
  using Error::Error;
};

struct InsufficientHorizon : Error {
  using Error::Error;
};

struct InsufficientK : Error {
  using Error::Error;
};

struct ExcessCensoring : Error {
  using Error::Error;
};

struct WrongFamily : Error {
  using Error::Error;
};

}  // namespace bpre
