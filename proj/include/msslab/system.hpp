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
#ifndef MSSLAB_SYSTEM_HPP
#define MSSLAB_SYSTEM_HPP

#include "msslab/common.hpp"

#include <memory>
#include <span>
#include <vector>

namespace msslab {

/// Impulse response known only on a uniform grid t_k = k * dt, k = 0..N-1.
/// Beyond the last sample the response is taken to be zero.
struct SampledImpulseResponse {
    double dt = 0.0;
    std::vector<Matrix> values;

    double horizon() const { return dt * static_cast<double>(values.size() - 1); }
};

/**
 * @brief Causal LTI forward block.
 *
 * Either a state-space triple (A, B, C) with impulse response C e^{At} B, or a
 * sampled impulse response for systems without a realization. Immutable once
 * built; copies share the underlying storage.
 */
class LtiSystem {
public:
    /// Validates shapes and finiteness; no stability requirement.
    static LtiSystem state_space(Matrix a, Matrix b, Matrix c);

    /// Requires at least one sample, dt > 0 and equally shaped samples.
    static LtiSystem sampled(double dt, std::vector<Matrix> values);

    bool has_realization() const { return realization_ != nullptr; }

    /// Throws NeedsRealization for sampled systems.
    const Matrix& a() const;
    const Matrix& b() const;
    const Matrix& c() const;

    /// Throws InvalidArgument for state-space systems.
    const SampledImpulseResponse& samples() const;

    Index n_states() const;
    Index n_inputs() const;
    Index n_outputs() const;

private:
    struct Realization {
        Matrix a;
        Matrix b;
        Matrix c;
    };

    std::shared_ptr<const Realization> realization_;
    std::shared_ptr<const SampledImpulseResponse> sampled_;
};

inline LtiSystem make_state_space(Matrix a, Matrix b, Matrix c)
{
    return LtiSystem::state_space(std::move(a), std::move(b), std::move(c));
}

/// e^{A t} by scaling and squaring of a truncated Taylor series.
Matrix matrix_exponential(const Matrix& a, double t);

/// M(t). State-space: C e^{At} B. Sampled: exact grid lookup, OffGrid otherwise.
Matrix impulse_response(const LtiSystem& system, double t);

/// Samples M(k dt) for k = 0..steps, reusing one matrix exponential for
/// state-space systems.
std::vector<Matrix> impulse_response_grid(const LtiSystem& system, double dt, std::size_t steps);

/// Squared H2 norm, +infinity when A is not Hurwitz. Sampled systems use the
/// trapezoidal rule over their finite support.
double h2_norm_squared(const LtiSystem& system);

/// Eigenvalue real parts must lie below -kHurwitzMargin.
inline constexpr double kHurwitzMargin = 1e-9;

bool is_hurwitz(const Matrix& a);

/// Largest real part among the eigenvalues of A.
double spectral_abscissa(const Matrix& a);

/// Largest eigenvalue modulus of A.
double eigen_modulus_max(const Matrix& a);

struct VariationProfile {
    double total_variation = 0.0;
    double quadratic_variation = 0.0;
    double horizon = 0.0;
};

/// Partial-sum total and quadratic variation of a uniformly sampled matrix
/// signal, measured in the spectral norm. A diagnostic only: a steep slope
/// and a jump look the same on a grid.
VariationProfile variation_profile(std::span<const Matrix> samples, double dt);

} // namespace msslab

#endif // MSSLAB_SYSTEM_HPP
