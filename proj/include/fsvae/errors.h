// Copyright 2026 The FSVAE Authors.
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

#ifndef FSVAE_ERRORS_H_
#define FSVAE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fsvae {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached a place that requires finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file, bad magic, checksum mismatch, I/O failure.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or precondition on a parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsvae

#endif  // FSVAE_ERRORS_H_
