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

#include "pricure/errors.h"

namespace pricure {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kDesync: return "desync";
    case ErrorCode::kConfigMismatch: return "config-mismatch";
    case ErrorCode::kTripleReuse: return "triple-reuse";
    case ErrorCode::kTamper: return "tamper";
    case ErrorCode::kBudgetExhausted: return "budget-exhausted";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kConnectionReset: return "connection-reset";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kShortRead: return "short-read";
    case ErrorCode::kLengthOverflow: return "length-overflow";
    case ErrorCode::kUnknownType: return "unknown-type";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

bool IsTransportError(ErrorCode code) {
  return code == ErrorCode::kTimeout || code == ErrorCode::kConnectionReset ||
         code == ErrorCode::kTransport;
}

bool IsProtocolError(ErrorCode code) {
  switch (code) {
    case ErrorCode::kProtocol:
    case ErrorCode::kDesync:
    case ErrorCode::kConfigMismatch:
    case ErrorCode::kTripleReuse:
    case ErrorCode::kTamper:
      return true;
    default:
      return false;
  }
}

bool IsParseError(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kShortRead:
    case ErrorCode::kLengthOverflow:
    case ErrorCode::kUnknownType:
      return true;
    default:
      return false;
  }
}

void Throw(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pricure
