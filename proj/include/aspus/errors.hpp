#pragma once

#include <stdexcept>
#include <string>

namespace aspus {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data (bad CSV cell, bad dosage, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Subject sets of the input files do not line up.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// A fit did not converge and the caller did not allow that.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Covariate block is numerically rank-deficient.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (grids, plans, scenario parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace aspus
