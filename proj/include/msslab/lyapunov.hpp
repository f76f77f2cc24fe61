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
#ifndef MSSLAB_LYAPUNOV_HPP
#define MSSLAB_LYAPUNOV_HPP

#include "msslab/common.hpp"

#include <Eigen/LU>

namespace msslab {

/**
 * @brief Solver for A X + X A^T + Q = 0 with a fixed Hurwitz A.
 *
 * The Kronecker sum (I kron A + A kron I) is factorised once, so repeated
 * solves against the same A (power iteration) cost one n^2 x n^2
 * back-substitution each.
 */
class LyapunovSolver {
public:
    /// Throws NotHurwitz, or SingularSystem if lambda_i + lambda_j ~ 0.
    explicit LyapunovSolver(const Matrix& a);

    /// Q must be n x n. The result is symmetrised when Q is symmetric.
    Matrix solve(const Matrix& q) const;

    Index dim() const { return n_; }

private:
    Index n_ = 0;
    Eigen::PartialPivLU<Matrix> lu_;
};

/// One-shot convenience wrapper around LyapunovSolver.
Matrix lyapunov_solve(const Matrix& a, const Matrix& q);

} // namespace msslab

#endif // MSSLAB_LYAPUNOV_HPP
