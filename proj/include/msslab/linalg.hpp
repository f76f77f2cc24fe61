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
#ifndef MSSLAB_LINALG_HPP
#define MSSLAB_LINALG_HPP

#include "msslab/common.hpp"

#include <string_view>

// Small dense helpers shared by the modules. Everything here is desk scale
// (n <= 16), so clarity wins over blocking or vectorisation.
namespace msslab::linalg {

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool all_finite(const Matrix& m);

/// Throws NonFinite naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

/// Column-major vectorisation, so that vec(A X B) = (B^T kron A) vec(X).
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, Index rows, Index cols);

Matrix kron(const Matrix& a, const Matrix& b);

/// Numerical PSD tolerance: 1e-10 times the largest eigenvalue, floored at 1.
double psd_tolerance(const Matrix& symmetric);

/// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Matrix& m);

/// True when the symmetric part has no eigenvalue below -tol.
bool is_psd(const Matrix& m, double tol);

/// Largest singular value by power iteration on M^T M (relative tol 1e-12).
double spectral_norm(const Matrix& m);

double frobenius_inner(const Matrix& a, const Matrix& b);

} // namespace msslab::linalg

#endif // MSSLAB_LINALG_HPP
