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
 * Truncated-Fock density matrices and observables: analytic factories,
 * validation and the JSON matrix file format
 *
 *   {"n_max": d-1, "matrix": [[[re, im], ...], ...]}   (row-major)
 */

#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "error.hpp"
#include "fock.hpp"
#include "linalg.hpp"

namespace hshadow {

/// Truncation deficit above which factories emit a warning.
inline constexpr double kDeficitWarning = 1e-6;

struct DensityMatrix {
    Matrix matrix;
    int n_max = 0;
    /// Probability mass lost to truncation (0 when not applicable).
    double truncation_deficit = 0.0;

    [[nodiscard]] int dim() const { return n_max + 1; }
};

struct Observable {
    Matrix matrix;
    std::string label;
    double norm = 0.0; ///< largest singular value

    [[nodiscard]] int n_max() const {
        return static_cast<int>(matrix.rows()) - 1;
    }
};

/// Validates Hermiticity to `tol` and scrubs the anti-Hermitian roundoff.
inline Observable make_observable(const Matrix &m, std::string label,
                                  double tol = 1e-12) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw InvariantError("square", "observable matrix must be square");
    }
    const double defect = hermiticity_defect(m);
    if (defect > tol) {
        throw InvariantError("hermitian", "observable deviates by " +
                                              std::to_string(defect));
    }
    Observable x{hermitize(m), std::move(label), 0.0};
    x.norm = operator_norm(x.matrix);
    return x;
}

/// Checks the density-matrix invariants at the given tolerances.
inline DensityMatrix make_density_matrix(const Matrix &m, double herm_tol,
                                         double trace_tol, double psd_tol,
                                         double deficit = 0.0) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw InvariantError("square", "density matrix must be square");
    }
    const double defect = hermiticity_defect(m);
    if (defect > herm_tol) {
        throw InvariantError("hermitian",
                             "deviation " + std::to_string(defect));
    }
    Matrix h = hermitize(m);
    const double tr = h.trace().real();
    if (std::abs(tr - 1.0) > trace_tol) {
        throw InvariantError("trace", "trace is " + std::to_string(tr));
    }
    const double lmin = hermitian_eigenvalues(h)(0);
    if (lmin < -psd_tol) {
        throw InvariantError("positive-semidefinite",
                             "minimum eigenvalue " + std::to_string(lmin));
    }
    return {std::move(h), static_cast<int>(m.rows()) - 1, deficit};
}

inline DensityMatrix pure_state(const Vector &psi, double deficit = 0.0) {
    Matrix rho = psi * psi.adjoint();
    return {hermitize(rho), static_cast<int>(psi.size()) - 1, deficit};
}

namespace detail {
inline void report_deficit(const char *what, double deficit, int n_max) {
    if (deficit > kDeficitWarning) {
        warn(std::string(what) + ": truncation at n_max=" +
             std::to_string(n_max) + " discards probability " +
             std::to_string(deficit));
    }
}
} // namespace detail

/**
 * Coherent state |alpha>, amplitudes e^{-|alpha|^2/2} alpha^n / sqrt(n!),
 * truncated at n_max and renormalized.
 */
inline DensityMatrix coherent(cplx alpha, int n_max) {
    fock::check_index(n_max);
    Vector c(n_max + 1);
    c(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n <= n_max; ++n) {
        c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    }
    const double kept = c.squaredNorm();
    const double deficit = std::max(0.0, 1.0 - kept);
    detail::report_deficit("coherent", deficit, n_max);
    return pure_state(c / std::sqrt(kept), deficit);
}

inline DensityMatrix fock_state(int n, int n_max) {
    fock::check_index(n_max);
    if (n < 0 || n > n_max) {
        throw DomainError("fock: level " + std::to_string(n) +
                          " exceeds cutoff " + std::to_string(n_max));
    }
    Vector c = Vector::Zero(n_max + 1);
    c(n) = 1.0;
    return pure_state(c);
}

/**
 * The pair (alpha|0> + beta|n>)/sqrt(2) and (alpha|0> + conj(beta)|n>)/sqrt(2)
 * with alpha real and |alpha|^2 + |beta|^2 = 2.
 */
inline std::pair<DensityMatrix, DensityMatrix>
superposition_pair(double alpha, cplx beta, int n, int n_max) {
    fock::check_index(n_max);
    if (n < 1 || n > n_max) {
        throw DomainError("superposition_pair: level must be in [1, n_max]");
    }
    const double norm2 = alpha * alpha + std::norm(beta);
    if (std::abs(norm2 - 2.0) > 1e-10) {
        throw DomainError("superposition_pair: need |alpha|^2 + |beta|^2 = 2, "
                          "got " + std::to_string(norm2));
    }
    Vector a = Vector::Zero(n_max + 1);
    Vector b = Vector::Zero(n_max + 1);
    a(0) = b(0) = alpha / std::numbers::sqrt2;
    a(n) = beta / std::numbers::sqrt2;
    b(n) = std::conj(beta) / std::numbers::sqrt2;
    return {pure_state(a), pure_state(b)};
}

/// Thermal state with mean photon number nbar, truncated and renormalized.
inline DensityMatrix thermal(double nbar, int n_max) {
    fock::check_index(n_max);
    if (!(nbar >= 0.0)) {
        throw DomainError("thermal: mean photon number must be >= 0");
    }
    RealVector p(n_max + 1);
    const double ratio = nbar / (nbar + 1.0);
    p(0) = 1.0 / (nbar + 1.0);
    for (int n = 1; n <= n_max; ++n) {
        p(n) = p(n - 1) * ratio;
    }
    const double kept = p.sum();
    const double deficit = std::max(0.0, 1.0 - kept);
    detail::report_deficit("thermal", deficit, n_max);
    DensityMatrix rho;
    rho.matrix = (p / kept).cast<cplx>().asDiagonal();
    rho.n_max = n_max;
    rho.truncation_deficit = deficit;
    return rho;
}

/// Even (parity = +1) or odd (parity = -1) cat state |alpha> +- |-alpha>.
inline DensityMatrix cat(cplx alpha, int parity, int n_max) {
    fock::check_index(n_max);
    if (parity != 1 && parity != -1) {
        throw DomainError("cat: parity must be +1 or -1");
    }
    const double full = 2.0 * (1.0 + parity * std::exp(-2.0 * std::norm(alpha)));
    if (full <= 1e-300) {
        throw DomainError("cat: odd cat with alpha = 0 is the zero vector");
    }
    Vector c(n_max + 1);
    cplx coh = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) {
            coh *= alpha / std::sqrt(static_cast<double>(n));
        }
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        c(n) = coh * (1.0 + parity * sign);
    }
    const double kept = c.squaredNorm();
    const double deficit = std::max(0.0, 1.0 - kept / full);
    detail::report_deficit("cat", deficit, n_max);
    return pure_state(c / std::sqrt(kept), deficit);
}

/// a^dagger a = diag(0, 1, ..., n_max).
inline Observable number_operator(int n_max) {
    fock::check_index(n_max);
    Matrix m = Matrix::Zero(n_max + 1, n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        m(n, n) = static_cast<double>(n);
    }
    return make_observable(m, "n");
}

inline Observable identity_observable(int n_max) {
    return make_observable(Matrix::Identity(n_max + 1, n_max + 1), "identity");
}

/// Tr(rho X); throws if the imaginary part exceeds 1e-10.
inline double expectation(const Matrix &rho, const Matrix &x) {
    const cplx v = trace_product(rho, x);
    if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real()))) {
        throw DomainError("expectation: non-real value; inputs not Hermitian");
    }
    return v.real();
}

inline double expectation(const DensityMatrix &rho, const Observable &x) {
    if (rho.dim() != x.matrix.rows()) {
        throw DomainError("expectation: dimension mismatch");
    }
    return expectation(rho.matrix, x.matrix);
}

inline double trace_distance(const Matrix &a, const Matrix &b) {
    return 0.5 * hermitian_eigenvalues(hermitize(a - b)).cwiseAbs().sum();
}

/// Ginibre-distributed random density matrix G G^dagger / Tr.
template <class Rng>
DensityMatrix random_density_matrix(int n_max, Rng &rng) {
    std::normal_distribution<double> gauss;
    const int d = n_max + 1;
    Matrix g(d, d);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            g(r, c) = cplx(gauss(rng), gauss(rng));
        }
    }
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return {hermitize(rho), n_max, 0.0};
}

// --- matrix files ---------------------------------------------------------

inline nlohmann::json matrix_to_json(const Matrix &m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back({m(r, c).real(), m(r, c).imag()});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json &rows, Index dim) {
    if (!rows.is_array() || static_cast<Index>(rows.size()) != dim) {
        throw ParseError("matrix must have n_max+1 rows");
    }
    Matrix m(dim, dim);
    for (Index r = 0; r < dim; ++r) {
        const auto &row = rows[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != dim) {
            throw ParseError("matrix row " + std::to_string(r) +
                             " must have n_max+1 entries");
        }
        for (Index c = 0; c < dim; ++c) {
            const auto &z = row[static_cast<std::size_t>(c)];
            if (!z.is_array() || z.size() != 2 || !z[0].is_number() ||
                !z[1].is_number()) {
                throw ParseError("matrix entries must be [re, im] pairs");
            }
            m(r, c) = cplx(z[0].get<double>(), z[1].get<double>());
        }
    }
    return m;
}

inline nlohmann::json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    out << text;
}

inline void write_matrix_file(const std::string &path, const Matrix &m,
                              const std::string &label = {}) {
    nlohmann::json doc;
    doc["n_max"] = m.rows() - 1;
    doc["matrix"] = matrix_to_json(m);
    if (!label.empty()) {
        doc["label"] = label;
    }
    write_text_file(path, doc.dump() + "\n");
}

namespace detail {
inline std::pair<Matrix, nlohmann::json> load_matrix_doc(const std::string &path) {
    auto doc = read_json_file(path);
    if (!doc.is_object() || !doc.contains("n_max") ||
        !doc["n_max"].is_number_integer() || !doc.contains("matrix")) {
        throw ParseError(path + ": expected {n_max, matrix}");
    }
    const auto n_max = doc["n_max"].get<long long>();
    if (n_max < 0 || n_max > fock::kMaxCutoff) {
        throw ParseError(path + ": n_max out of range");
    }
    return {matrix_from_json(doc["matrix"], static_cast<Index>(n_max) + 1),
            std::move(doc)};
}
} // namespace detail

/// File tolerance: Hermitian, unit trace and PSD each within 1e-8.
inline DensityMatrix density_from_file(const std::string &path) {
    auto [m, doc] = detail::load_matrix_doc(path);
    return make_density_matrix(m, 1e-8, 1e-8, 1e-8);
}

inline Observable observable_from_file(const std::string &path) {
    auto [m, doc] = detail::load_matrix_doc(path);
    std::string label = doc.value("label", std::string("file:") + path);
    return make_observable(m, std::move(label), 1e-8);
}

} // namespace hshadow
