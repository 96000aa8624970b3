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
 * Hermite polynomials, Fock-state wavefunctions and normalized
 * Gauss-Hermite bin integrals
 *
 *   O_mn(a, b) = (2^m m! 2^n n! pi)^{-1/2} int_a^b H_m(x) H_n(x) e^{-x^2} dx
 *
 * which are the real parts of every binned homodyne POVM matrix element.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "error.hpp"
#include "linalg.hpp"

namespace hshadow::fock {

/// Largest supported photon-number cutoff.
inline constexpr int kMaxCutoff = 64;

inline void check_index(int n) {
    if (n < 0 || n > kMaxCutoff) {
        throw DomainError("Fock index " + std::to_string(n) +
                          " outside [0, " + std::to_string(kMaxCutoff) + "]");
    }
}

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
inline double hermite_eval(int n, double x) {
    if (n < 0) {
        throw DomainError("hermite_eval: negative order");
    }
    double prev = 1.0;
    if (n == 0) {
        return prev;
    }
    double cur = 2.0 * x;
    for (int k = 1; k < n; ++k) {
        const double next = 2.0 * x * cur - 2.0 * k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

/**
 * Fills out[0..n_max] with psi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x)
 * e^{-x^2/2}, using the normalized recurrence so nothing overflows.
 */
inline void wavefunctions(int n_max, double x, double *out) {
    out[0] = std::exp(-0.5 * x * x) / std::sqrt(std::sqrt(std::numbers::pi));
    if (n_max >= 1) {
        out[1] = std::numbers::sqrt2 * x * out[0];
    }
    for (int n = 1; n < n_max; ++n) {
        out[n + 1] = x * std::sqrt(2.0 / (n + 1)) * out[n] -
                     std::sqrt(static_cast<double>(n) / (n + 1)) * out[n - 1];
    }
}

inline double wavefunction(int n, double x) {
    check_index(n);
    std::vector<double> psi(static_cast<std::size_t>(n) + 1);
    wavefunctions(n, x, psi.data());
    return psi[static_cast<std::size_t>(n)];
}

/// Integration cut-off replacing infinite edges for cutoff n_max.
inline double integration_limit(int n_max) {
    return std::sqrt(2.0 * n_max + 1.0) + 10.0;
}

struct OverlapOptions {
    double abs_tol = 1e-12;
    int max_depth = 30;
};

namespace detail {

using Rule = boost::math::quadrature::gauss<double, 20>;

// Gauss-Legendre panel: returns sum_j w_j psi(x_j) psi(x_j)^T over [lo, hi].
inline RealMatrix panel(int n_max, double lo, double hi) {
    const auto &abscissa = Rule::abscissa();
    const auto &weights = Rule::weights();
    const Index d = n_max + 1;
    const Index nodes = 2 * static_cast<Index>(abscissa.size());
    RealMatrix psi(d, nodes);
    RealVector w(nodes);
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    Index col = 0;
    for (std::size_t j = 0; j < abscissa.size(); ++j) {
        for (double sign : {-1.0, 1.0}) {
            wavefunctions(n_max, mid + sign * half * abscissa[j],
                          psi.col(col).data());
            w(col) = half * weights[j];
            ++col;
        }
    }
    return psi * w.asDiagonal() * psi.transpose();
}

struct AdaptiveState {
    int n_max;
    int max_depth;
    double achieved = 0.0;
    bool failed = false;
    RealMatrix sum;
};

inline void refine(AdaptiveState &st, double lo, double hi,
                   const RealMatrix &whole, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    RealMatrix left = panel(st.n_max, lo, mid);
    RealMatrix right = panel(st.n_max, mid, hi);
    RealMatrix both = left + right;
    const double err = (both - whole).cwiseAbs().maxCoeff();
    // Roundoff floor relative to the panel's own magnitude.
    const double floor =
        64.0 * std::numeric_limits<double>::epsilon() *
        std::max(1.0, both.cwiseAbs().maxCoeff());
    if (err <= std::max(tol, floor)) {
        st.sum += both;
        st.achieved += err;
        return;
    }
    if (depth >= st.max_depth) {
        st.sum += both;
        st.achieved += err;
        st.failed = true;
        return;
    }
    refine(st, lo, mid, left, 0.5 * tol, depth + 1);
    refine(st, mid, hi, right, 0.5 * tol, depth + 1);
}

} // namespace detail

/**
 * All overlaps O_mn(a, b) for m, n <= n_max as a symmetric real matrix.
 *
 * Infinite edges are accepted and truncated at integration_limit(n_max).
 * Adaptive Gauss-Legendre panels of initial width <= 0.5 are bisected until
 * the two-half estimate agrees with the parent to the absolute tolerance.
 */
inline RealMatrix bin_overlap_matrix(int n_max, double a, double b,
                                     const OverlapOptions &opts = {}) {
    check_index(n_max);
    if (std::isnan(a) || std::isnan(b) || !(a < b)) {
        throw DomainError("bin_overlap: require a < b");
    }
    const Index d = n_max + 1;
    const double lim = integration_limit(n_max);
    const double lo = std::max(a, -lim);
    const double hi = std::min(b, lim);
    detail::AdaptiveState st{n_max, opts.max_depth, 0.0, false,
                             RealMatrix::Zero(d, d)};
    if (!(lo < hi)) {
        return st.sum;
    }
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.5)));
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
        const double pl = lo + p * width;
        const double ph = (p + 1 == panels) ? hi : pl + width;
        RealMatrix whole = detail::panel(n_max, pl, ph);
        detail::refine(st, pl, ph, whole, opts.abs_tol / panels, 0);
    }
    if (st.failed) {
        throw IntegrationError("bin_overlap: quadrature did not converge",
                               st.achieved);
    }
    // Exact symmetry; the accumulation above is symmetric up to roundoff.
    return 0.5 * (st.sum + st.sum.transpose());
}

inline double bin_overlap(int m, int n, double a, double b,
                          const OverlapOptions &opts = {}) {
    check_index(m);
    check_index(n);
    return bin_overlap_matrix(std::max(m, n), a, b, opts)(m, n);
}

} // namespace hshadow::fock
