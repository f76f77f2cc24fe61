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
#include "msslab/analysis.hpp"

#include "msslab/linalg.hpp"

#include <cmath>
#include <string>

namespace msslab {

namespace {

void check_disturbance_shape(const LtiSystem& system, const NoiseSpec& noise)
{
    if (noise.n_disturbances() != system.n_inputs()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "w_cov is " + std::to_string(noise.n_disturbances()) +
                        "-dimensional but the system has " + std::to_string(system.n_inputs()) +
                        " inputs");
    }
}

LtiSystem forward_block_for(const LtiSystem& system, const Matrix& gamma_cov,
                            Interpretation interpretation)
{
    return interpretation == Interpretation::Ito ? system
                                                 : equivalent_ito_system(system, gamma_cov);
}

// Matrix of the operator in the vec basis, one application per basis matrix.
Matrix operator_matrix_by_application(const LoopGainOperator& op)
{
    const Index n = op.dim();
    Matrix k(n * n, n * n);
    for (Index j = 0; j < n * n; ++j) {
        Matrix basis = Matrix::Zero(n, n);
        basis(j % n, j / n) = 1.0;
        k.col(j) = linalg::vec(op.apply(basis));
    }
    return k;
}

// int H U H^T over the same backend: the loop gain with an all-ones mask.
Matrix propagate_output_cov(const LtiSystem& forward, const Matrix& input_cov, Backend backend,
                            const std::optional<QuadratureOptions>& quadrature)
{
    const Index n = input_cov.rows();
    const LoopGainOperator unmasked = make_lgo(forward, Matrix::Ones(n, n), Interpretation::Ito,
                                               backend, quadrature);
    return unmasked.apply(input_cov);
}

} // namespace

MssVerdict analyze(const LtiSystem& system, const NoiseSpec& noise, Interpretation interpretation,
                   const AnalysisOptions& options)
{
    check_disturbance_shape(system, noise);

    MssVerdict verdict;
    verdict.interpretation = interpretation;
    verdict.forward_block = forward_block_for(system, noise.gamma_cov(), interpretation);
    verdict.h2_squared = h2_norm_squared(verdict.forward_block);
    verdict.h2_finite = std::isfinite(verdict.h2_squared);

    const bool lyapunov_ok = verdict.forward_block.has_realization() && verdict.h2_finite;
    verdict.rho_backend = lyapunov_ok ? Backend::Lyapunov : Backend::Quadrature;
    verdict.rho_truncated = !verdict.h2_finite;

    // The forward block is already converted, so the operator is built in the
    // Ito form on it.
    const LoopGainOperator op = make_lgo(verdict.forward_block, noise.gamma_cov(),
                                         Interpretation::Ito, verdict.rho_backend,
                                         options.quadrature);
    const SpectralResult spectral =
        spectral_radius_power(op, options.power_tol, options.power_max_iter);
    verdict.rho = spectral.rho;
    verdict.power_converged = spectral.converged;
    verdict.power_iterations = spectral.iterations;
    verdict.worst_case_cov = spectral.eigen_matrix;

    const Index n = noise.n_gains();
    if (!spectral.converged && lyapunov_ok && n * n <= 256 &&
        verdict.forward_block.n_states() * verdict.forward_block.n_states() <= 256) {
        verdict.rho = spectral_radius_dense(
            lgo_matrix_kronecker(verdict.forward_block, noise.gamma_cov(), Interpretation::Ito));
        verdict.rho_from_dense_fallback = true;
    }

    verdict.mss = verdict.h2_finite && verdict.rho < 1.0;
    if (verdict.mss) {
        verdict.steady_state = steady_state_covariances(system, noise, interpretation, options);
    }
    return verdict;
}

SteadyState steady_state_covariances(const LtiSystem& system, const NoiseSpec& noise,
                                     Interpretation interpretation,
                                     const AnalysisOptions& options)
{
    check_disturbance_shape(system, noise);
    const LtiSystem forward = forward_block_for(system, noise.gamma_cov(), interpretation);
    if (!std::isfinite(h2_norm_squared(forward))) {
        throw Error(ErrorCode::NotMss, "equivalent forward block has infinite H2 norm");
    }

    const Backend backend = forward.has_realization() ? Backend::Lyapunov : Backend::Quadrature;
    const Matrix k = backend == Backend::Lyapunov
                         ? lgo_matrix_kronecker(forward, noise.gamma_cov(), Interpretation::Ito)
                         : operator_matrix_by_application(make_lgo(
                               forward, noise.gamma_cov(), Interpretation::Ito, backend,
                               options.quadrature));
    const double rho = spectral_radius_dense(k);
    if (!(rho < 1.0)) {
        throw Error(ErrorCode::NotMss, "loop gain spectral radius " + std::to_string(rho) +
                                           " is not below 1");
    }

    const Index n = noise.n_gains();
    const Matrix fixed_point = Matrix::Identity(n * n, n * n) - k;
    Eigen::FullPivLU<Matrix> lu(fixed_point);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
        throw Error(ErrorCode::SingularFixedPoint,
                    "I - L is numerically singular (rho=" + std::to_string(rho) + ")");
    }

    SteadyState state;
    state.input_cov =
        linalg::symmetrize(linalg::unvec(lu.solve(linalg::vec(noise.w_cov())), n, n));
    state.output_cov =
        linalg::symmetrize(propagate_output_cov(forward, state.input_cov, backend,
                                                options.quadrature));
    state.feedback_cov = noise.gamma_cov().cwiseProduct(state.output_cov);
    return state;
}

namespace {

// Number of steps on t_k = k dt, k = 0..steps, with steps * dt <= horizon.
std::size_t grid_steps(double horizon, double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(horizon) || !(horizon >= dt)) {
        throw Error(ErrorCode::BadGrid, "need 0 < dt <= T, got dt=" + std::to_string(dt) +
                                            " T=" + std::to_string(horizon));
    }
    return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
}

CovarianceTrajectory start_trajectory(const NoiseSpec& noise, std::size_t steps)
{
    CovarianceTrajectory traj;
    const Index n = noise.n_gains();
    traj.times.reserve(steps + 1);
    traj.input_cov.reserve(steps + 1);
    traj.feedback_cov.reserve(steps + 1);
    traj.output_cov.reserve(steps + 1);
    traj.times.push_back(0.0);
    traj.input_cov.push_back(noise.w_cov());
    traj.feedback_cov.push_back(Matrix::Zero(n, n));
    traj.output_cov.push_back(Matrix::Zero(n, n));
    return traj;
}

void push_step(CovarianceTrajectory& traj, const NoiseSpec& noise, double t, Matrix output)
{
    output = linalg::symmetrize(output);
    Matrix feedback = noise.gamma_cov().cwiseProduct(output);
    traj.times.push_back(t);
    traj.input_cov.push_back(noise.w_cov() + feedback);
    traj.feedback_cov.push_back(std::move(feedback));
    traj.output_cov.push_back(std::move(output));
}

} // namespace

CovarianceTrajectory covariance_trajectory(const LtiSystem& system, const NoiseSpec& noise,
                                           Interpretation interpretation, double horizon,
                                           double dt)
{
    check_disturbance_shape(system, noise);
    const std::size_t steps = grid_steps(horizon, dt);
    const LtiSystem forward = forward_block_for(system, noise.gamma_cov(), interpretation);
    if (!forward.has_realization()) {
        return covariance_trajectory_convolution(system, noise, interpretation, horizon, dt);
    }
    if (forward.n_outputs() != noise.n_gains()) {
        throw Error(ErrorCode::DimensionMismatch, "system outputs must match the gain count");
    }

    const Matrix phi = matrix_exponential(forward.a(), dt);
    const Matrix& b = forward.b();
    const Matrix& c = forward.c();
    CovarianceTrajectory traj = start_trajectory(noise, steps);

    Matrix state_cov = Matrix::Zero(forward.n_states(), forward.n_states());
    for (std::size_t k = 1; k <= steps; ++k) {
        state_cov += (b * traj.input_cov[k - 1] * b.transpose()) * dt;
        state_cov = phi * state_cov * phi.transpose();
        state_cov = linalg::symmetrize(state_cov);
        push_step(traj, noise, static_cast<double>(k) * dt, c * state_cov * c.transpose());
    }
    return traj;
}

CovarianceTrajectory covariance_trajectory_convolution(const LtiSystem& system,
                                                       const NoiseSpec& noise,
                                                       Interpretation interpretation,
                                                       double horizon, double dt)
{
    check_disturbance_shape(system, noise);
    const std::size_t steps = grid_steps(horizon, dt);
    const LtiSystem forward = forward_block_for(system, noise.gamma_cov(), interpretation);
    if (forward.n_outputs() != noise.n_gains()) {
        throw Error(ErrorCode::DimensionMismatch, "system outputs must match the gain count");
    }

    const std::vector<Matrix> kernel = impulse_response_grid(forward, dt, steps);
    CovarianceTrajectory traj = start_trajectory(noise, steps);

    const Index n = noise.n_gains();
    Matrix output(n, n);
    Matrix left(n, n);
    for (std::size_t k = 1; k <= steps; ++k) {
        output.setZero();
        for (std::size_t j = 1; j <= k; ++j) {
            left.noalias() = kernel[j] * traj.input_cov[k - j];
            output.noalias() += left * kernel[j].transpose();
        }
        push_step(traj, noise, static_cast<double>(k) * dt, output * dt);
    }
    return traj;
}

} // namespace msslab
