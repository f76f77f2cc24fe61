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
#ifndef MSSLAB_ANALYSIS_HPP
#define MSSLAB_ANALYSIS_HPP

#include "msslab/common.hpp"
#include "msslab/loop_gain.hpp"
#include "msslab/noise.hpp"
#include "msslab/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace msslab {

/// Steady-state covariances of the loop signals: input du (U), feedback dr
/// (R) and output y (Y). U = W + R.
struct SteadyState {
    Matrix input_cov;
    Matrix feedback_cov;
    Matrix output_cov;
};

struct AnalysisOptions {
    double power_tol = kDefaultPowerTol;
    int power_max_iter = kDefaultPowerMaxIter;
    /// Overrides the default truncation whenever the quadrature backend is used.
    std::optional<QuadratureOptions> quadrature;
};

/// Mean-square stability verdict for one interpretation.
struct MssVerdict {
    Interpretation interpretation = Interpretation::Ito;
    /// Equivalent forward block: the system itself (Ito) or (A_S, B, C).
    LtiSystem forward_block;

    bool h2_finite = false;
    double h2_squared = 0.0; ///< +infinity when not finite

    double rho = 0.0;
    Backend rho_backend = Backend::Lyapunov;
    /// rho came from a finite-horizon truncation of a block with infinite H2
    /// norm; it diagnoses the second condition but is not the true radius.
    bool rho_truncated = false;
    bool power_converged = false;
    int power_iterations = 0;
    /// Power iteration stalled and rho was taken from the dense Kronecker matrix.
    bool rho_from_dense_fallback = false;

    bool mss = false;
    Matrix worst_case_cov;
    std::optional<SteadyState> steady_state;
};

/// Checks both stability conditions on the equivalent forward block. Instability
/// is a verdict, never an error; only malformed inputs throw.
MssVerdict analyze(const LtiSystem& system, const NoiseSpec& noise, Interpretation interpretation,
                   const AnalysisOptions& options = {});

/// Solves (I - K) vec(U) = vec(W) on the vectorised fixed point, then
/// R = L(U) and Y = int H U H^T. Throws NotMss or SingularFixedPoint.
SteadyState steady_state_covariances(const LtiSystem& system, const NoiseSpec& noise,
                                     Interpretation interpretation,
                                     const AnalysisOptions& options = {});

/// Covariances of the deterministic covariance loop on t_k = k dt.
struct CovarianceTrajectory {
    std::vector<double> times;
    std::vector<Matrix> input_cov;
    std::vector<Matrix> feedback_cov;
    std::vector<Matrix> output_cov;
};

/**
 * Explicit right-endpoint Volterra scheme:
 *   Y_k = sum_{j=1..k} H(j dt) U_{k-j} H(j dt)^T dt,  R_k = Gamma o Y_k,
 *   U_k = W + R_k,  U_0 = W.
 * State-space blocks evaluate the sum through the equivalent state recursion
 * P_k = Phi (P_{k-1} + B U_{k-1} B^T dt) Phi^T with Phi = e^{A dt}, which is
 * algebraically identical and O(N); sampled responses use the O(N^2) sum.
 */
CovarianceTrajectory covariance_trajectory(const LtiSystem& system, const NoiseSpec& noise,
                                           Interpretation interpretation, double horizon,
                                           double dt);

/// Same scheme, always evaluated as the direct O(N^2) convolution sum.
CovarianceTrajectory covariance_trajectory_convolution(const LtiSystem& system,
                                                       const NoiseSpec& noise,
                                                       Interpretation interpretation,
                                                       double horizon, double dt);

} // namespace msslab

#endif // MSSLAB_ANALYSIS_HPP
