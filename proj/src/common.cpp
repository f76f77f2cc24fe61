/*
 Copyright 2026 The msslab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "msslab/common.hpp"

namespace msslab {

std::string_view to_string(Interpretation interpretation)
{
    switch (interpretation) {
    case Interpretation::Ito:
        return "ito";
    case Interpretation::Stratonovich:
        return "stratonovich";
    }
    return "unknown";
}

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OffGrid: return "OffGrid";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BadQuadrature: return "BadQuadrature";
    case ErrorCode::StratonovichNeedsRealization: return "StratonovichNeedsRealization";
    case ErrorCode::NeedsRealization: return "NeedsRealization";
    case ErrorCode::UnsupportedScheme: return "UnsupportedScheme";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularKroneckerSum: return "SingularKroneckerSum";
    case ErrorCode::NotMss: return "NotMss";
    case ErrorCode::SingularFixedPoint: return "SingularFixedPoint";
    case ErrorCode::BadGrid: return "BadGrid";
    case ErrorCode::MidpointNoConvergence: return "MidpointNoConvergence";
    case ErrorCode::InsufficientPaths: return "InsufficientPaths";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

} // namespace msslab
