/*
 * Copyright 2026 The Praetorian Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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

namespace praetorian {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files. Carries the offending file and line.
class FormatError : public Error {
 public:
  FormatError(const std::string& file, long line, const std::string& what)
      : Error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) +
              ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  std::string file_;
  long line_;
};

// Violated precondition on an argument (unknown node id, bad dimension, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Invalid model / attack / experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during optimization (non-finite loss and the like).
class NumericError : public Error {
 public:
  using Error::Error;
};

// An internal consistency check failed; indicates a bug, not bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace praetorian
