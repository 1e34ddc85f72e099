// Copyright (c) 2026 SceneGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SCENEGUARD_ERROR_H_
#define SCENEGUARD_ERROR_H_

#include <stdexcept>
#include <string>

namespace sceneguard {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unsupported file contents (bad RIFF header, unknown codec, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failures (unreadable/unwritable paths).
class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (cutoff above Nyquist, empty mel rows, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition (length mismatch, too-short
// signal, degenerate input).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Requested key not present (e.g. unknown scene label).
class LookupError : public Error {
 public:
  using Error::Error;
};

// External command hook failed (encoder, codec, ASR).
class BackendError : public Error {
 public:
  using Error::Error;
};

// A referenced input file could not be ingested.
class IngestionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sceneguard

#endif  // SCENEGUARD_ERROR_H_
