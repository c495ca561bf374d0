// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dsresnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer configurations that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported audio input.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: unknown preset, missing files, unparseable spec text.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible binary file (model, feature cache).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training aborted (e.g. non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsresnet
