// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPENS_ERROR_H_
#define DPENS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpens {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kCatalog,
  kShape,
  kInsufficientData,
  kAlignment,
  kSingular,
  kEmpty,
  kNegativeWeight,
  kBudgetExhausted,
  kUndefined,
  kInvariant,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this type. The code lets callers
// (notably the CLI) map a failure onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Writes a warning line to stderr. Library code never aborts on warnings.
void LogWarning(std::string_view message);

// Globally silences LogWarning (tests and the acceptance suite use this).
void SetWarningsEnabled(bool enabled);

}  // namespace dpens

#endif  // DPENS_ERROR_H_
