#pragma once

#include <stdexcept>
#include <string>

namespace wctdef {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError -> 1,
// IngestionError -> 2, NumericalError -> 3, everything else -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  double residual = 0.0;
  NumericalError(const std::string& msg, double res)
      : Error(msg), residual(res) {}
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

struct IngestionError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  int epoch = -1;
  TrainingError(const std::string& msg, int ep) : Error(msg), epoch(ep) {}
};

struct AttackError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

}  // namespace wctdef
