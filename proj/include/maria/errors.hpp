// Copyright 2026 The MARIA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace maria {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up for an operation.
struct DimensionError : Error {
  using Error::Error;
};

/// An API precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

/// Sequence longer than a model's maximum context.
struct LengthError : Error {
  using Error::Error;
};

/// Operation not supported for the model's attention mode.
struct ModeError : Error {
  using Error::Error;
};

/// An index (token id, mask position, ...) is out of range.
struct IndexError : Error {
  using Error::Error;
};

/// Input data is unusable (empty corpus, non-finite values, ...).
struct DataError : Error {
  using Error::Error;
};

/// A serialized artifact failed validation (checksum, magic, version).
struct IntegrityError : Error {
  using Error::Error;
};

/// Invalid configuration value.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace maria
