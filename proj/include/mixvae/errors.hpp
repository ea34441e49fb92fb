#pragma once

#include <stdexcept>
#include <string>

namespace mixvae {

/// Tensor or image extents that do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value in a configuration (or a call argument acting as one) is invalid.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The API was called in a state that does not allow it.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or inconsistent on-disk data (manifests, CSVs, checkpoints, images).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss term became NaN or infinite during training.
class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixvae
