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
#ifndef MSSLAB_NOISE_HPP
#define MSSLAB_NOISE_HPP

#include "msslab/common.hpp"

#include <cstdint>
#include <random>

namespace msslab {

/**
 * @brief Random state threaded explicitly through every sampling call.
 *
 * Holds the engine and the normal distribution together, so copying an Rng
 * snapshots the full state (including the cached second polar variate) and
 * replaying the copy reproduces the same draws.
 */
class Rng {
public:
    Rng() = default;

    /// Stream for one Monte Carlo path. Streams for distinct (seed, index)
    /// pairs are seeded independently, so ensembles do not depend on the order
    /// in which paths are run.
    static Rng for_path(std::uint64_t seed, std::uint64_t path_index);

    double gaussian() { return normal_(engine_); }

    bool operator==(const Rng& other) const = default;

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Multiplicative gain covariance (rate) and additive disturbance covariance
/// (rate), each with a factor L such that L L^T reproduces it.
class NoiseSpec {
public:
    const Matrix& gamma_cov() const { return gamma_cov_; }
    const Matrix& w_cov() const { return w_cov_; }
    const Matrix& gamma_factor() const { return gamma_factor_; }
    const Matrix& w_factor() const { return w_factor_; }

    Index n_gains() const { return gamma_cov_.rows(); }
    Index n_disturbances() const { return w_cov_.rows(); }

private:
    friend NoiseSpec validate_noise(const Matrix& gamma_cov, const Matrix& w_cov);

    Matrix gamma_cov_;
    Matrix w_cov_;
    Matrix gamma_factor_;
    Matrix w_factor_;
};

/// Symmetric PSD check and eigendecomposition factor (handles rank deficiency).
/// Throws NotSymmetric or NotPsd.
NoiseSpec validate_noise(const Matrix& gamma_cov, const Matrix& w_cov);

/// Factor L with L L^T = cov, via symmetric eigendecomposition; small negative
/// eigenvalues (within the PSD tolerance) are clamped to zero.
Matrix psd_factor(const Matrix& cov, const char* name = "covariance");

struct NoiseIncrements {
    Vector gamma;
    Vector w;
};

/// One step of Wiener increments: gamma ~ N(0, Gamma dt), w ~ N(0, W dt),
/// drawn independently from `rng`, which is advanced.
NoiseIncrements sample_increments(const NoiseSpec& spec, double dt, Rng& rng);

/// Allocation-free variant used on the simulation hot path.
void sample_increments_into(const NoiseSpec& spec, double sqrt_dt, Rng& rng, Vector& scratch,
                            Vector& gamma, Vector& w);

} // namespace msslab

#endif // MSSLAB_NOISE_HPP
