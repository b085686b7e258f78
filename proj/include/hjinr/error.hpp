#pragma once

#include <stdexcept>
#include <string>

namespace hjinr {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, unknown catalog key or inconsistent dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value became NaN or infinite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (empty batch, missing partners, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An operation that the tape or an oracle does not implement.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Hopf-Lax requested for a Hamiltonian that is neither convex nor concave,
/// or a grid oracle requested outside its dimension range.
class UnsupportedOracle : public UnsupportedOperation {
 public:
  using UnsupportedOperation::UnsupportedOperation;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace hjinr
