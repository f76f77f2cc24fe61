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
#include "msslab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace msslab::linalg {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what)
{
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
    }
}

Vector vec(const Matrix& m)
{
    return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols)
{
    if (v.size() != rows * cols) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cannot reshape vector of length " + std::to_string(v.size()) + " to " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix kron(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

double psd_tolerance(const Matrix& symmetric)
{
    if (symmetric.size() == 0) {
        return 1e-10;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(symmetric), Eigen::EigenvaluesOnly);
    return 1e-10 * std::max(eig.eigenvalues().maxCoeff(), 1.0);
}

double min_eigenvalue(const Matrix& m)
{
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

bool is_psd(const Matrix& m, double tol) { return min_eigenvalue(m) >= -tol; }

double spectral_norm(const Matrix& m)
{
    if (m.size() == 0) {
        return 0.0;
    }
    const Matrix gram = m.transpose() * m;
    if (gram.cwiseAbs().maxCoeff() == 0.0) {
        return 0.0;
    }
    // Ones plus a deterministic, index-dependent tilt so the start vector is
    // not orthogonal to the dominant singular direction for structured inputs.
    Vector v(gram.cols());
    for (Index i = 0; i < v.size(); ++i) {
        v(i) = 1.0 + 0.1 * std::sin(1.0 + 3.7 * static_cast<double>(i));
    }
    v.normalize();

    double lambda = 0.0;
    constexpr int kMaxIter = 10000;
    for (int it = 0; it < kMaxIter; ++it) {
        Vector w = gram * v;
        const double next = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0) {
            break;
        }
        v = w / norm;
        if (it > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double frobenius_inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

} // namespace msslab::linalg
