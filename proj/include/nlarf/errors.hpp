#pragma once

#include <stdexcept>
#include <string>

namespace nlarf {

// Exception hierarchy. Everything derives from Error so callers that only care
// about "did it work" can catch one type; the CLI maps ConfigError to exit 1
// and everything else to exit 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct SimulationError : Error {
  using Error::Error;
};

struct EstimationError : Error {
  using Error::Error;
};

struct ModelError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct InvariantError : Error {
  using Error::Error;
};

}  // namespace nlarf
