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
#include "msslab/lyapunov.hpp"

#include "msslab/linalg.hpp"
#include "msslab/system.hpp"

#include <cmath>
#include <string>

namespace msslab {

LyapunovSolver::LyapunovSolver(const Matrix& a) : n_(a.rows())
{
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "Lyapunov matrix A must be square");
    }
    linalg::require_finite(a, "A");
    if (!is_hurwitz(a)) {
        throw Error(ErrorCode::NotHurwitz, "A has an eigenvalue with real part >= -" +
                                               std::to_string(kHurwitzMargin));
    }

    const Matrix identity = Matrix::Identity(n_, n_);
    Matrix sum = Matrix::Zero(n_ * n_, n_ * n_);
    // vec(A X) = (I kron A) vec X and vec(X A^T) = (A kron I) vec X.
    for (Index j = 0; j < n_; ++j) {
        sum.block(j * n_, j * n_, n_, n_) += a;
        for (Index i = 0; i < n_; ++i) {
            sum.block(i * n_, j * n_, n_, n_).diagonal().array() += a(i, j);
        }
    }
    lu_.compute(sum);

    // Eigenvalues of the Kronecker sum are lambda_i + lambda_j; after the
    // Hurwitz check this only trips on severe ill-conditioning.
    const double rcond = lu_.rcond();
    if (!(rcond > 1e-14)) {
        throw Error(ErrorCode::SingularSystem,
                    "Kronecker sum is numerically singular (rcond=" + std::to_string(rcond) + ")");
    }
}

Matrix LyapunovSolver::solve(const Matrix& q) const
{
    if (q.rows() != n_ || q.cols() != n_) {
        throw Error(ErrorCode::DimensionMismatch, "Q must be " + std::to_string(n_) + "x" +
                                                      std::to_string(n_));
    }
    const Vector rhs = -linalg::vec(q);
    Matrix x = linalg::unvec(lu_.solve(rhs), n_, n_);
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    if ((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
        x = linalg::symmetrize(x);
    }
    return x;
}

Matrix lyapunov_solve(const Matrix& a, const Matrix& q) { return LyapunovSolver(a).solve(q); }

} // namespace msslab
