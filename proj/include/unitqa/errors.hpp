// Copyright 2026 The UnitQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace unitqa {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us data that violates a documented precondition.
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

// An object is not in the state required for the requested operation
// (e.g. decoding with a model that was never trained).
class InvalidStateError : public Error {
 public:
  explicit InvalidStateError(const std::string& msg) : Error(msg) {}
};

// A serialized artifact failed its integrity check or is malformed.
class ChecksumError : public Error {
 public:
  explicit ChecksumError(const std::string& msg) : Error(msg) {}
};

// Training produced a non-finite loss or gradient.
class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(const std::string& msg) : Error(msg) {}
};

// A pipeline stage was invoked before the artifacts it consumes exist,
// or the artifacts were produced under a different configuration.
class StageDependencyError : public Error {
 public:
  explicit StageDependencyError(const std::string& msg) : Error(msg) {}
};

}  // namespace unitqa
