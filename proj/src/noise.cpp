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
#include "msslab/noise.hpp"

#include "msslab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace msslab {

Rng Rng::for_path(std::uint64_t seed, std::uint64_t path_index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path_index),
                      static_cast<std::uint32_t>(path_index >> 32), 0x6d73736cU};
    Rng rng;
    rng.engine_.seed(seq);
    return rng;
}

Matrix psd_factor(const Matrix& cov, const char* name)
{
    if (cov.rows() != cov.cols()) {
        throw Error(ErrorCode::DimensionMismatch, std::string(name) + " must be square");
    }
    linalg::require_finite(cov, name);
    if (cov.size() == 0) {
        return cov;
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorCode::NotSymmetric, std::string(name) + " is not symmetric");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(linalg::symmetrize(cov));
    const Vector& lambda = eig.eigenvalues();
    const double tol = 1e-10 * std::max(lambda.maxCoeff(), 1.0);
    if (lambda.minCoeff() < -tol) {
        throw Error(ErrorCode::NotPsd, std::string(name) + " has eigenvalue " +
                                           std::to_string(lambda.minCoeff()));
    }
    const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

NoiseSpec validate_noise(const Matrix& gamma_cov, const Matrix& w_cov)
{
    NoiseSpec spec;
    spec.gamma_factor_ = psd_factor(gamma_cov, "gamma_cov");
    spec.w_factor_ = psd_factor(w_cov, "w_cov");
    // Store the covariances exactly symmetric so downstream Hadamard products
    // keep symmetry bit-for-bit.
    spec.gamma_cov_ = linalg::symmetrize(gamma_cov);
    spec.w_cov_ = linalg::symmetrize(w_cov);
    return spec;
}

void sample_increments_into(const NoiseSpec& spec, double sqrt_dt, Rng& rng, Vector& scratch,
                            Vector& gamma, Vector& w)
{
    const Index n = spec.n_gains();
    const Index m = spec.n_disturbances();
    scratch.resize(std::max(n, m));

    gamma.resize(n);
    w.resize(m);
    // Column-major factor times the standard normals, scaled by sqrt(dt).
    auto draw = [&](const Matrix& factor, Index dim, Vector& out) {
        for (Index i = 0; i < dim; ++i) {
            scratch[i] = rng.gaussian();
        }
        for (Index i = 0; i < dim; ++i) {
            double sum = 0.0;
            for (Index j = 0; j < dim; ++j) {
                sum += factor(i, j) * scratch[j];
            }
            out[i] = sum * sqrt_dt;
        }
    };
    draw(spec.gamma_factor(), n, gamma);
    draw(spec.w_factor(), m, w);
}

NoiseIncrements sample_increments(const NoiseSpec& spec, double dt, Rng& rng)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw Error(ErrorCode::NonPositiveDt, "dt must be positive, got " + std::to_string(dt));
    }
    NoiseIncrements out;
    Vector scratch;
    sample_increments_into(spec, std::sqrt(dt), rng, scratch, out.gamma, out.w);
    return out;
}

} // namespace msslab
