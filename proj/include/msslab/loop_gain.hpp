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
#ifndef MSSLAB_LOOP_GAIN_HPP
#define MSSLAB_LOOP_GAIN_HPP

#include "msslab/common.hpp"
#include "msslab/lyapunov.hpp"
#include "msslab/system.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace msslab {

enum class Backend { Lyapunov, Quadrature };

/// Truncated-integral parameters: trapezoid on [0, horizon] with spacing step.
struct QuadratureOptions {
    double horizon = 0.0;
    double step = 0.0;
};

/// Default truncation for a forward block.
///  - Hurwitz realization: horizon 40 / |spectral abscissa|, step the smaller
///    of horizon / 40000 and 1e-3 / max |eigenvalue|.
///  - Non-Hurwitz realization: horizon 10 / max(max |eigenvalue|, 1e-3),
///    step horizon / 10000 (a finite-horizon diagnostic only).
///  - Sampled response: its own support and spacing.
QuadratureOptions default_quadrature(const LtiSystem& system);

/**
 * @brief The loop gain operator X -> Gamma o (int_0^inf H(t) X H(t)^T dt).
 *
 * `system()` is the equivalent forward block: the given system for Ito, the
 * converted system (A_S, B, C) for Stratonovich. Everything the apply path
 * needs (Lyapunov factorisation or kernel samples) is prepared at
 * construction; handles are immutable and cheap to copy.
 */
class LoopGainOperator {
public:
    const LtiSystem& system() const { return system_; }
    const Matrix& gamma_cov() const { return gamma_cov_; }
    Interpretation interpretation() const { return interpretation_; }
    Backend backend() const { return backend_; }

    /// Only meaningful for the quadrature backend.
    const QuadratureOptions& quadrature() const { return quadrature_; }

    /// Number of multiplicative gains; the operator acts on dim x dim matrices.
    Index dim() const { return gamma_cov_.rows(); }

    /// False when the Lyapunov backend was requested for a non-Hurwitz block.
    bool applicable() const;

    /// Dispatches on the backend.
    Matrix apply(const Matrix& x) const;

private:
    friend LoopGainOperator make_lgo(const LtiSystem&, const Matrix&, Interpretation, Backend,
                                     std::optional<QuadratureOptions>);
    friend Matrix apply_lgo_lyapunov(const LoopGainOperator&, const Matrix&);
    friend Matrix apply_lgo_quadrature(const LoopGainOperator&, const Matrix&);

    LtiSystem system_;
    Matrix gamma_cov_;
    Interpretation interpretation_ = Interpretation::Ito;
    Backend backend_ = Backend::Lyapunov;
    QuadratureOptions quadrature_;

    std::shared_ptr<const LyapunovSolver> lyapunov_;
    // Trapezoid-weighted kernel samples M(t_k) for the quadrature backend.
    std::shared_ptr<const std::vector<Matrix>> kernel_;
    std::shared_ptr<const std::vector<double>> weights_;
};

using LoopGainHandle = LoopGainOperator;

/// G = 1/2 M(0) o Gamma, the feedback correction absorbed by the Stratonovich
/// to Ito conversion.
Matrix stratonovich_correction_gain(const LtiSystem& system, const Matrix& gamma_cov);

/// (A + B G C, B, C): the Ito-equivalent forward block of a Stratonovich loop.
LtiSystem equivalent_ito_system(const LtiSystem& system, const Matrix& gamma_cov);

/// Builds the operator. Stratonovich requires a realization (conversion goes
/// through equivalent_ito_system); the Lyapunov backend requires one too.
/// When `quadrature` is empty the defaults from default_quadrature are used.
LoopGainOperator make_lgo(const LtiSystem& system, const Matrix& gamma_cov,
                          Interpretation interpretation, Backend backend,
                          std::optional<QuadratureOptions> quadrature = std::nullopt);

/// Gamma o (C Xbar C^T) with A_k Xbar + Xbar A_k^T + B X B^T = 0.
Matrix apply_lgo_lyapunov(const LoopGainOperator& op, const Matrix& x);

/// Gamma o sum_k w_k M(t_k) X M(t_k)^T with trapezoid weights on [0, horizon].
Matrix apply_lgo_quadrature(const LoopGainOperator& op, const Matrix& x);

struct SpectralResult {
    double rho = 0.0;
    Matrix eigen_matrix;
    int iterations = 0;
    bool converged = false;
};

inline constexpr double kDefaultPowerTol = 1e-10;
inline constexpr int kDefaultPowerMaxIter = 10000;

/**
 * Power iteration on the operator, starting from the normalised identity and
 * symmetrising every iterate. The eigenvalue estimate is the Rayleigh-style
 * quotient <L(X), X>_F / <X, X>_F. Stops when two successive estimates differ
 * by at most tol * max(1, rho) and the residual ||L(X) - rho X||_F is within
 * tol * max(1, rho) ||X||_F. Hitting max_iter returns the last estimate with
 * converged = false rather than throwing.
 */
SpectralResult spectral_radius_power(const LoopGainOperator& op, double tol = kDefaultPowerTol,
                                     int max_iter = kDefaultPowerMaxIter);

/// Dense n^2 x n^2 matrix K with vec(L(X)) = K vec(X), built directly from
/// Kronecker products. Independent of the apply path; used as an oracle and
/// for the steady-state fixed point.
Matrix lgo_matrix_kronecker(const LtiSystem& system, const Matrix& gamma_cov,
                            Interpretation interpretation);

/// Largest eigenvalue modulus from a dense eigendecomposition.
double spectral_radius_dense(const Matrix& k);

} // namespace msslab

#endif // MSSLAB_LOOP_GAIN_HPP
