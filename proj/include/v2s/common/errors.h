// Copyright (c) 2026 The v2s Authors
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

#ifndef V2S_COMMON_ERRORS_H_
#define V2S_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace v2s {

// Process exit codes used by the command-line tools.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kTraining = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Bad shapes, ranges, or malformed inputs.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

// Missing checkpoints, unknown config keys, incompatible architectures.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

class PersistenceError : public Error {
 public:
  explicit PersistenceError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

// A training stage failed to reach its quality floor or diverged.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what)
      : Error(ExitCode::kTraining, what) {}
};

// Broken invariant inside the pipeline, e.g. frozen parameters drifted.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what)
      : Error(ExitCode::kTraining, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

}  // namespace v2s

#endif  // V2S_COMMON_ERRORS_H_
