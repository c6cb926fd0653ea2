// Copyright 2026 The posbias Authors.
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

#ifndef POSBIAS_ERRORS_H_
#define POSBIAS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace posbias {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data. `line` is 1-based, or 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message
                       : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// The design violates |E| >= 2|U| + |V| or a related size requirement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Iterative solver failure, indefinite matrices, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Bad configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace posbias

#endif  // POSBIAS_ERRORS_H_
