// Copyright 2026 The stfcache Authors.
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

#include "stf/error.hpp"

namespace stf {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidDimensions: return "InvalidDimensions";
    case Errc::kTooLarge: return "TooLarge";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kContentAlreadyCached: return "ContentAlreadyCached";
    case Errc::kNotNeighbors: return "NotNeighbors";
    case Errc::kWrongVariant: return "WrongVariant";
    case Errc::kZeroTotalRate: return "ZeroTotalRate";
    case Errc::kInvalidRange: return "InvalidRange";
    case Errc::kOutOfBounds: return "OutOfBounds";
    case Errc::kInvalidPopularity: return "InvalidPopularity";
    case Errc::kMissingLruTable: return "MissingLruTable";
    case Errc::kInvalidScheme: return "InvalidScheme";
    case Errc::kNotCached: return "NotCached";
    case Errc::kWindowTooShort: return "WindowTooShort";
    case Errc::kTooExpensive: return "TooExpensive";
    case Errc::kInvalidProbability: return "InvalidProbability";
    case Errc::kRowSumExceedsOne: return "RowSumExceedsOne";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kInfeasible: return "Infeasible";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kUnsupportedScheme: return "UnsupportedScheme";
    case Errc::kNoConvergence: return "NoConvergence";
    case Errc::kUnknownContent: return "UnknownContent";
    case Errc::kParseError: return "ParseError";
    case Errc::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace stf
