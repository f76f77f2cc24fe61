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
#ifndef MSSLAB_COMMON_HPP
#define MSSLAB_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace msslab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Stochastic calculus used for the multiplicative feedback integral.
enum class Interpretation { Ito, Stratonovich };

std::string_view to_string(Interpretation interpretation);

enum class ErrorCode {
    DimensionMismatch,
    NonFinite,
    OffGrid,
    TooFewSamples,
    NotSymmetric,
    NotPsd,
    NonPositiveDt,
    NotHurwitz,
    SingularSystem,
    BadQuadrature,
    StratonovichNeedsRealization,
    NeedsRealization,
    UnsupportedScheme,
    NoConvergence,
    SingularKroneckerSum,
    NotMss,
    SingularFixedPoint,
    BadGrid,
    MidpointNoConvergence,
    InsufficientPaths,
    InvalidArgument,
    ConfigParse,
    SchemaViolation,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// All library failures are reported through this exception; `code()` lets
/// callers branch on the failure class without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace msslab

#endif // MSSLAB_COMMON_HPP
