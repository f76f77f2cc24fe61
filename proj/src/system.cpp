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
#include "msslab/system.hpp"

#include "msslab/linalg.hpp"
#include "msslab/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace msslab {

namespace {

std::string shape(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Vector eigenvalues_real_parts(const Matrix& a, Eigen::VectorXcd* full = nullptr)
{
    Eigen::EigenSolver<Matrix> solver(a, false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::NonFinite, "eigenvalue computation failed");
    }
    if (full != nullptr) {
        *full = solver.eigenvalues();
    }
    return solver.eigenvalues().real();
}

} // namespace

LtiSystem LtiSystem::state_space(Matrix a, Matrix b, Matrix c)
{
    if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "A is " + shape(a) + ", B is " + shape(b) +
                                                      ", C is " + shape(c) +
                                                      "; need A square, B rows = C cols = A rows");
    }
    linalg::require_finite(a, "A");
    linalg::require_finite(b, "B");
    linalg::require_finite(c, "C");

    LtiSystem sys;
    sys.realization_ =
        std::make_shared<const Realization>(Realization{std::move(a), std::move(b), std::move(c)});
    return sys;
}

LtiSystem LtiSystem::sampled(double dt, std::vector<Matrix> values)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw Error(ErrorCode::NonPositiveDt, "sample spacing must be positive and finite");
    }
    if (values.empty()) {
        throw Error(ErrorCode::TooFewSamples, "sampled impulse response needs at least one sample");
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k].rows() != values.front().rows() || values[k].cols() != values.front().cols()) {
            throw Error(ErrorCode::DimensionMismatch, "sample " + std::to_string(k) + " is " +
                                                          shape(values[k]) + ", expected " +
                                                          shape(values.front()));
        }
        linalg::require_finite(values[k], "impulse sample " + std::to_string(k));
    }

    LtiSystem sys;
    sys.sampled_ = std::make_shared<const SampledImpulseResponse>(
        SampledImpulseResponse{dt, std::move(values)});
    return sys;
}

const Matrix& LtiSystem::a() const
{
    if (!realization_) {
        throw Error(ErrorCode::NeedsRealization, "system has no state-space realization");
    }
    return realization_->a;
}

const Matrix& LtiSystem::b() const
{
    if (!realization_) {
        throw Error(ErrorCode::NeedsRealization, "system has no state-space realization");
    }
    return realization_->b;
}

const Matrix& LtiSystem::c() const
{
    if (!realization_) {
        throw Error(ErrorCode::NeedsRealization, "system has no state-space realization");
    }
    return realization_->c;
}

const SampledImpulseResponse& LtiSystem::samples() const
{
    if (!sampled_) {
        throw Error(ErrorCode::InvalidArgument, "system is not a sampled impulse response");
    }
    return *sampled_;
}

Index LtiSystem::n_states() const { return realization_ ? realization_->a.rows() : 0; }

Index LtiSystem::n_inputs() const
{
    return realization_ ? realization_->b.cols() : sampled_->values.front().cols();
}

Index LtiSystem::n_outputs() const
{
    return realization_ ? realization_->c.rows() : sampled_->values.front().rows();
}

Matrix matrix_exponential(const Matrix& a, double t)
{
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "matrix exponential needs a square matrix");
    }
    linalg::require_finite(a, "A");
    if (!std::isfinite(t)) {
        throw Error(ErrorCode::NonFinite, "time argument is not finite");
    }

    const Index n = a.rows();
    const Matrix x = a * t;
    const double norm1 = n == 0 ? 0.0 : x.cwiseAbs().colwise().sum().maxCoeff();

    // Scale so that ||X / 2^s||_1 <= 1/2; the Taylor tail then drops below
    // machine precision well before 30 terms.
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    }
    const Matrix scaled = x / std::ldexp(1.0, squarings);

    Matrix sum = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 30; ++k) {
        term = (term * scaled) / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-17 * sum.cwiseAbs().maxCoeff()) {
            break;
        }
    }
    for (int i = 0; i < squarings; ++i) {
        sum = (sum * sum).eval();
    }
    return sum;
}

namespace {

// Index of t on the grid k*dt, or throws OffGrid.
std::size_t grid_index(double t, double dt)
{
    const double k = std::round(t / dt);
    if (std::abs(t - k * dt) > 1e-9 * std::max(dt, std::abs(t))) {
        throw Error(ErrorCode::OffGrid, "t=" + std::to_string(t) + " is not a multiple of dt=" +
                                            std::to_string(dt));
    }
    return static_cast<std::size_t>(k);
}

} // namespace

Matrix impulse_response(const LtiSystem& system, double t)
{
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw Error(ErrorCode::InvalidArgument, "impulse response needs finite t >= 0");
    }
    if (system.has_realization()) {
        if (t == 0.0) {
            return system.c() * system.b();
        }
        return system.c() * matrix_exponential(system.a(), t) * system.b();
    }
    const auto& s = system.samples();
    const std::size_t k = grid_index(t, s.dt);
    if (k >= s.values.size()) {
        return Matrix::Zero(system.n_outputs(), system.n_inputs());
    }
    return s.values[k];
}

std::vector<Matrix> impulse_response_grid(const LtiSystem& system, double dt, std::size_t steps)
{
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::NonPositiveDt, "grid spacing must be positive");
    }
    std::vector<Matrix> out;
    out.reserve(steps + 1);
    if (system.has_realization()) {
        const Matrix step = matrix_exponential(system.a(), dt);
        Matrix propagated = system.b();
        for (std::size_t k = 0; k <= steps; ++k) {
            out.push_back(system.c() * propagated);
            propagated = step * propagated;
        }
        return out;
    }
    const auto& s = system.samples();
    const std::size_t stride = grid_index(dt, s.dt);
    if (stride == 0) {
        throw Error(ErrorCode::OffGrid, "grid spacing is finer than the sample spacing");
    }
    for (std::size_t k = 0; k <= steps; ++k) {
        const std::size_t idx = k * stride;
        out.push_back(idx < s.values.size() ? s.values[idx]
                                            : Matrix::Zero(system.n_outputs(), system.n_inputs()));
    }
    return out;
}

double h2_norm_squared(const LtiSystem& system)
{
    if (!system.has_realization()) {
        const auto& s = system.samples();
        double total = 0.0;
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            const double weight = (k == 0 || k + 1 == s.values.size()) ? 0.5 : 1.0;
            total += weight * s.values[k].squaredNorm();
        }
        return s.values.size() == 1 ? 0.0 : total * s.dt;
    }
    if (!is_hurwitz(system.a())) {
        return std::numeric_limits<double>::infinity();
    }
    const Matrix& b = system.b();
    const Matrix& c = system.c();
    const Matrix gramian = lyapunov_solve(system.a(), b * b.transpose());
    return std::max(0.0, (c * gramian * c.transpose()).trace());
}

bool is_hurwitz(const Matrix& a) { return spectral_abscissa(a) < -kHurwitzMargin; }

double spectral_abscissa(const Matrix& a)
{
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "A must be square");
    }
    linalg::require_finite(a, "A");
    if (a.rows() == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    return eigenvalues_real_parts(a).maxCoeff();
}

double eigen_modulus_max(const Matrix& a)
{
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "A must be square");
    }
    linalg::require_finite(a, "A");
    if (a.rows() == 0) {
        return 0.0;
    }
    Eigen::VectorXcd lambda;
    eigenvalues_real_parts(a, &lambda);
    return lambda.cwiseAbs().maxCoeff();
}

VariationProfile variation_profile(std::span<const Matrix> samples, double dt)
{
    if (samples.size() < 2) {
        throw Error(ErrorCode::TooFewSamples, "variation profile needs at least two samples");
    }
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::NonPositiveDt, "sample spacing must be positive");
    }
    VariationProfile profile;
    profile.horizon = dt * static_cast<double>(samples.size() - 1);
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const double jump = linalg::spectral_norm(samples[k + 1] - samples[k]);
        profile.total_variation += jump;
        profile.quadratic_variation += jump * jump;
    }
    return profile;
}

} // namespace msslab
