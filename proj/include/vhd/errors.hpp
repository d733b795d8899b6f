#pragma once

#include <stdexcept>
#include <string>

namespace vhd {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor dimension / shape mismatches.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration values or incompatible settings.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or truncated input data (files, manifests, payloads).
struct DataError : Error {
  using Error::Error;
};

// Violated API precondition (non-scalar backward, non-deterministic
// objective handed to the finite-difference checker, ...).
struct ContractError : Error {
  using Error::Error;
};

// A verification step (gradient check, acceptance probe) failed.
struct CheckError : Error {
  using Error::Error;
};

// A video cannot be sampled (e.g. single-class label mask).
struct SamplerError : DataError {
  using DataError::DataError;
};

}  // namespace vhd
