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
#include "msslab/loop_gain.hpp"

#include "msslab/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <string>

namespace msslab {

namespace {

void check_feedback_shapes(const LtiSystem& system, const Matrix& gamma_cov)
{
    if (gamma_cov.rows() != gamma_cov.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "gamma_cov must be square");
    }
    const Index n = gamma_cov.rows();
    if (system.n_inputs() != n || system.n_outputs() != n) {
        throw Error(ErrorCode::DimensionMismatch,
                    "feedback needs n_inputs = n_outputs = n_gains; system is " +
                        std::to_string(system.n_outputs()) + "x" +
                        std::to_string(system.n_inputs()) + ", gamma_cov is " +
                        std::to_string(n) + "x" + std::to_string(n));
    }
    linalg::require_finite(gamma_cov, "gamma_cov");
}

void check_operand(const LoopGainOperator& op, const Matrix& x)
{
    if (x.rows() != op.dim() || x.cols() != op.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "operand must be " + std::to_string(op.dim()) +
                                                      "x" + std::to_string(op.dim()));
    }
}

} // namespace

QuadratureOptions default_quadrature(const LtiSystem& system)
{
    if (!system.has_realization()) {
        const auto& s = system.samples();
        return {s.horizon(), s.dt};
    }
    const Matrix& a = system.a();
    const double modulus = eigen_modulus_max(a);
    if (is_hurwitz(a)) {
        const double horizon = 40.0 / std::abs(spectral_abscissa(a));
        const double step = std::min(horizon / 40000.0, 1e-3 / modulus);
        return {horizon, step};
    }
    const double horizon = 10.0 / std::max(modulus, 1e-3);
    return {horizon, horizon / 10000.0};
}

Matrix stratonovich_correction_gain(const LtiSystem& system, const Matrix& gamma_cov)
{
    check_feedback_shapes(system, gamma_cov);
    const Matrix initial = impulse_response(system, 0.0);
    return 0.5 * initial.cwiseProduct(gamma_cov);
}

LtiSystem equivalent_ito_system(const LtiSystem& system, const Matrix& gamma_cov)
{
    if (!system.has_realization()) {
        throw Error(ErrorCode::StratonovichNeedsRealization,
                    "Stratonovich conversion needs a state-space realization");
    }
    const Matrix gain = stratonovich_correction_gain(system, gamma_cov);
    Matrix converted = system.a() + system.b() * gain * system.c();
    return LtiSystem::state_space(std::move(converted), system.b(), system.c());
}

bool LoopGainOperator::applicable() const
{
    return backend_ == Backend::Quadrature || lyapunov_ != nullptr;
}

Matrix LoopGainOperator::apply(const Matrix& x) const
{
    return backend_ == Backend::Lyapunov ? apply_lgo_lyapunov(*this, x)
                                         : apply_lgo_quadrature(*this, x);
}

LoopGainOperator make_lgo(const LtiSystem& system, const Matrix& gamma_cov,
                          Interpretation interpretation, Backend backend,
                          std::optional<QuadratureOptions> quadrature)
{
    check_feedback_shapes(system, gamma_cov);
    if (interpretation == Interpretation::Stratonovich && !system.has_realization()) {
        throw Error(ErrorCode::StratonovichNeedsRealization,
                    "Stratonovich loop gain needs a state-space realization");
    }
    if (backend == Backend::Lyapunov && !system.has_realization()) {
        throw Error(ErrorCode::NeedsRealization, "Lyapunov backend needs a realization");
    }

    LoopGainOperator op;
    op.system_ = interpretation == Interpretation::Ito ? system
                                                        : equivalent_ito_system(system, gamma_cov);
    op.gamma_cov_ = linalg::symmetrize(gamma_cov);
    op.interpretation_ = interpretation;
    op.backend_ = backend;

    if (backend == Backend::Lyapunov) {
        if (is_hurwitz(op.system_.a())) {
            op.lyapunov_ = std::make_shared<const LyapunovSolver>(op.system_.a());
        }
        return op;
    }

    const QuadratureOptions q = quadrature.value_or(default_quadrature(op.system_));
    if (!(q.horizon > 0.0) || !(q.step > 0.0) || !(q.step < q.horizon) ||
        !std::isfinite(q.horizon)) {
        throw Error(ErrorCode::BadQuadrature, "need 0 < step < horizon, got horizon=" +
                                                  std::to_string(q.horizon) +
                                                  " step=" + std::to_string(q.step));
    }
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(q.horizon / q.step)));
    const double step = q.horizon / static_cast<double>(steps);
    op.quadrature_ = {q.horizon, step};

    auto kernel = std::make_shared<std::vector<Matrix>>(
        impulse_response_grid(op.system_, step, steps));
    auto weights = std::make_shared<std::vector<double>>(steps + 1, step);
    weights->front() *= 0.5;
    weights->back() *= 0.5;
    op.kernel_ = std::move(kernel);
    op.weights_ = std::move(weights);
    return op;
}

Matrix apply_lgo_lyapunov(const LoopGainOperator& op, const Matrix& x)
{
    if (op.backend_ != Backend::Lyapunov) {
        throw Error(ErrorCode::InvalidArgument, "operator does not use the Lyapunov backend");
    }
    check_operand(op, x);
    if (!op.lyapunov_) {
        throw Error(ErrorCode::NotHurwitz,
                    "equivalent forward block is not Hurwitz; H2 norm is infinite");
    }
    const LtiSystem& sys = op.system_;
    const Matrix state_cov = op.lyapunov_->solve(sys.b() * x * sys.b().transpose());
    const Matrix output_cov = sys.c() * state_cov * sys.c().transpose();
    return op.gamma_cov_.cwiseProduct(output_cov);
}

Matrix apply_lgo_quadrature(const LoopGainOperator& op, const Matrix& x)
{
    if (op.backend_ != Backend::Quadrature) {
        throw Error(ErrorCode::InvalidArgument, "operator does not use the quadrature backend");
    }
    check_operand(op, x);
    const auto& kernel = *op.kernel_;
    const auto& weights = *op.weights_;
    const Index n = op.dim();

    Matrix sum = Matrix::Zero(n, n);
    Matrix left(n, n);
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        left.noalias() = kernel[k] * x;
        sum.noalias() += weights[k] * (left * kernel[k].transpose());
    }
    return op.gamma_cov_.cwiseProduct(linalg::symmetrize(sum));
}

SpectralResult spectral_radius_power(const LoopGainOperator& op, double tol, int max_iter)
{
    if (!(tol > 0.0) || max_iter < 1) {
        throw Error(ErrorCode::InvalidArgument, "power iteration needs tol > 0 and max_iter >= 1");
    }
    const Index n = op.dim();
    SpectralResult result;
    Matrix x = Matrix::Identity(n, n);
    x /= x.norm();

    double previous = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        const Matrix y = linalg::symmetrize(op.apply(x));
        const double rho = linalg::frobenius_inner(y, x) / linalg::frobenius_inner(x, x);
        const double y_norm = y.norm();

        result.iterations = it;
        result.rho = rho;
        result.eigen_matrix = x;

        if (y_norm == 0.0) {
            result.rho = 0.0;
            result.converged = true;
            return result;
        }
        const double scale = std::max(1.0, std::abs(rho));
        const double residual = (y - rho * x).norm();
        if (it > 1 && std::abs(rho - previous) <= tol * scale && residual <= tol * scale * x.norm()) {
            result.converged = true;
            return result;
        }
        previous = rho;
        x = y / y_norm;
    }
    return result;
}

Matrix lgo_matrix_kronecker(const LtiSystem& system, const Matrix& gamma_cov,
                            Interpretation interpretation)
{
    check_feedback_shapes(system, gamma_cov);
    if (!system.has_realization()) {
        throw Error(interpretation == Interpretation::Stratonovich
                        ? ErrorCode::StratonovichNeedsRealization
                        : ErrorCode::NeedsRealization,
                    "Kronecker loop gain matrix needs a state-space realization");
    }
    const Matrix& b = system.b();
    const Matrix& c = system.c();
    Matrix a = system.a();
    if (interpretation == Interpretation::Stratonovich) {
        const Matrix cb = c * b;
        a += 0.5 * b * cb.cwiseProduct(gamma_cov) * c;
    }

    const Index nx = a.rows();
    const Index n = gamma_cov.rows();
    if (nx * nx > 256 || n * n > 256) {
        throw Error(ErrorCode::InvalidArgument, "Kronecker oracle limited to n^2 <= 256");
    }
    if (!is_hurwitz(a)) {
        throw Error(ErrorCode::NotHurwitz, "equivalent forward block is not Hurwitz");
    }

    const Matrix eye = Matrix::Identity(nx, nx);
    const Matrix kron_sum = Eigen::kroneckerProduct(eye, a).eval() +
                            Eigen::kroneckerProduct(a, eye).eval();
    Eigen::FullPivLU<Matrix> lu(-kron_sum);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularKroneckerSum, "Kronecker sum is singular");
    }
    const Matrix input_map = Eigen::kroneckerProduct(b, b).eval();
    const Matrix output_map = Eigen::kroneckerProduct(c, c).eval();
    const Vector mask = Eigen::Map<const Vector>(gamma_cov.data(), gamma_cov.size());
    return mask.asDiagonal() * (output_map * lu.solve(input_map));
}

double spectral_radius_dense(const Matrix& k)
{
    if (k.rows() != k.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "spectral radius needs a square matrix");
    }
    linalg::require_finite(k, "K");
    if (k.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> solver(k, false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::NoConvergence, "dense eigenvalue computation failed");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace msslab
