/**
 * Copyright 2026 The xmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace xmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is numerically degenerate (near-zero norm, rank-0 data).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse (wrong call order, missing gradients, oversized batches).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A documented pre-condition on the data was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A stratified subsample could not include every class.
class StratificationError : public Error {
 public:
  using Error::Error;
};

/// The rendered target does not fit the frame; the caller should redraw.
class ResampleError : public Error {
 public:
  using Error::Error;
};

/// A referenced file does not exist or cannot be opened.
class MissingFileError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int epoch, long step)
      : Error(what + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  long step() const { return step_; }

 private:
  int epoch_;
  long step_;
};

}  // namespace xmc
