// Copyright 2026 The Pricure Authors
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

#ifndef PRICURE_ERRORS_H_
#define PRICURE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace pricure {

// Numeric values are part of the C API (see include/pricure/pricure.h) and
// must stay in sync with pricure_status.
enum class ErrorCode : int {
  kOk = 0,
  kUsage = 1,
  kContract = 2,
  kRange = 3,
  kParse = 4,
  kIo = 5,
  kProtocol = 10,
  kDesync = 11,
  kConfigMismatch = 12,
  kTripleReuse = 13,
  kTamper = 14,
  kBudgetExhausted = 20,
  kTimeout = 30,
  kConnectionReset = 31,
  kTransport = 32,
  kBadMagic = 40,
  kBadVersion = 41,
  kShortRead = 42,
  kLengthOverflow = 43,
  kUnknownType = 44,
  kInternal = 99,
};

const char* ErrorCodeName(ErrorCode code);

// Retryable transport failures, as opposed to protocol violations.
bool IsTransportError(ErrorCode code);
bool IsProtocolError(ErrorCode code);
bool IsParseError(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Throw(ErrorCode code, const std::string& message);

}  // namespace pricure

#define PRICURE_ENFORCE(cond, code, msg)        \
  do {                                          \
    if (!(cond)) ::pricure::Throw((code), (msg)); \
  } while (0)

#endif  // PRICURE_ERRORS_H_
