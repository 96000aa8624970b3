// Copyright 2026 The hshadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Dense complex linear-algebra helpers over Eigen: column-stacking
 * vectorization, Hermitian scrubbing, numerical rank and deterministic
 * summation.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace hshadow {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Column-stacked vectorization (vec(A)[m + n*d] = A(m, n)).
inline Vector vectorize(const Matrix &a) {
    return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix devectorize(const Eigen::Ref<const Vector> &v, Index dim) {
    if (v.size() != dim * dim) {
        throw DomainError("devectorize: length is not dim^2");
    }
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

inline Matrix hermitize(const Matrix &a) {
    return (a + a.adjoint()) * 0.5;
}

/// max |A - A^dagger| over all entries.
inline double hermiticity_defect(const Matrix &a) {
    if (a.rows() != a.cols()) {
        return INFINITY;
    }
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// Tr(A B) without forming the product.
inline cplx trace_product(const Matrix &a, const Matrix &b) {
    return (a.transpose().cwiseProduct(b)).sum();
}

struct RankReport {
    int rank = 0;
    RealVector singular_values; // descending
};

/**
 * Numerical rank: number of singular values above
 * rtol * sigma_max * max(rows, cols).
 */
template <class Derived>
RankReport numerical_rank(const Eigen::MatrixBase<Derived> &a,
                          double rtol = 1e-10) {
    if (!(rtol > 0.0)) {
        throw DomainError("numerical_rank: rtol must be positive");
    }
    RankReport report;
    if (a.size() == 0) {
        return report;
    }
    Eigen::JacobiSVD<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                                   Eigen::Dynamic>>
        svd(a);
    report.singular_values = svd.singularValues();
    const double smax = report.singular_values.size()
                            ? report.singular_values(0)
                            : 0.0;
    const double cut =
        rtol * smax * static_cast<double>(std::max(a.rows(), a.cols()));
    for (Index j = 0; j < report.singular_values.size(); ++j) {
        if (report.singular_values(j) > cut) {
            ++report.rank;
        }
    }
    return report;
}

/// Pairwise (tree) summation; the result depends only on element order.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) {
            s += x;
        }
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Kronecker product, left factor most significant.
inline Matrix kron(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index r = 0; r < a.rows(); ++r) {
        for (Index c = 0; c < a.cols(); ++c) {
            out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) =
                a(r, c) * b;
        }
    }
    return out;
}

/// Eigenvalues (ascending) of a Hermitian matrix.
inline RealVector hermitian_eigenvalues(const Matrix &a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Largest singular value.
inline double operator_norm(const Matrix &a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

} // namespace hshadow
