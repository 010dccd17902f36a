// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mxql {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad data passed to an operation (non-finite residual, empty batch, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or configuration (odd expansion order, beta <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The evaluation grid does not cover the support of a density.
class SupportError : public Error {
 public:
  using Error::Error;
};

}  // namespace mxql
