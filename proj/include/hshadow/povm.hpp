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
 * Discretized homodyne POVM on the truncated Fock space: phase grid,
 * quadrature binning, element construction, the measurement matrix E and
 * informational-completeness certification, plus equal-width bin design.
 *
 * Element (i, k) has entries
 *
 *   Pi_{i,k}(m, n) = e^{i (m - n) theta_k} O_mn(I_i) / N,
 *
 * so that each phase contributes identity/N when the bins cover the line.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "fock.hpp"
#include "linalg.hpp"

namespace hshadow {

enum class TailMode {
    StrictFinite, ///< bins are exactly [x_i, x_{i+1})
    ExtendTails,  ///< first/last bins absorb the infinite tails
};

inline std::string_view to_string(TailMode mode) {
    return mode == TailMode::StrictFinite ? "strict-finite" : "extend-tails";
}

inline TailMode parse_tail_mode(std::string_view s) {
    if (s == "strict-finite") {
        return TailMode::StrictFinite;
    }
    if (s == "extend-tails") {
        return TailMode::ExtendTails;
    }
    throw DomainError("unknown tail mode '" + std::string(s) + "'");
}

/// N uniformly spaced local-oscillator phases theta_k = 2 pi k / N.
class PhaseGrid {
  public:
    explicit PhaseGrid(int count) : count_(count) {
        if (count < 1) {
            throw DomainError("PhaseGrid: need at least one phase");
        }
    }
    [[nodiscard]] int size() const { return count_; }
    [[nodiscard]] double theta(int k) const {
        return 2.0 * std::numbers::pi * k / count_;
    }

  private:
    int count_;
};

class BinningScheme {
  public:
    /// Empty weights mean nominal widths x_{i+1} - x_i.
    BinningScheme(std::vector<double> edges, TailMode mode,
                  std::vector<double> weights = {})
        : edges_(std::move(edges)), weights_(std::move(weights)),
          mode_(mode) {
        if (edges_.size() < 2) {
            throw DomainError("BinningScheme: need at least two edges");
        }
        for (std::size_t j = 0; j < edges_.size(); ++j) {
            if (!std::isfinite(edges_[j])) {
                throw DomainError("BinningScheme: edges must be finite");
            }
            if (j > 0 && !(edges_[j] > edges_[j - 1])) {
                throw DomainError(
                    "BinningScheme: edges must be strictly increasing");
            }
        }
        if (weights_.empty()) {
            for (std::size_t j = 0; j + 1 < edges_.size(); ++j) {
                weights_.push_back(edges_[j + 1] - edges_[j]);
            }
        }
        if (weights_.size() + 1 != edges_.size()) {
            throw DomainError("BinningScheme: need one weight per bin");
        }
        for (double w : weights_) {
            if (!(w > 0.0) || !std::isfinite(w)) {
                throw DomainError(
                    "BinningScheme: weights must be positive and finite");
            }
        }
    }

    /**
     * M equal-width bins of width 2L/M starting at -L + offset * width.
     * offset = 0 gives the window [-L, L].
     */
    static BinningScheme equal_spaced(int bins, double range, TailMode mode,
                                      double offset = 0.0) {
        if (bins < 1 || !(range > 0.0)) {
            throw DomainError("equal_spaced: need bins >= 1 and range > 0");
        }
        const double width = 2.0 * range / bins;
        std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
        for (int j = 0; j <= bins; ++j) {
            edges[static_cast<std::size_t>(j)] =
                -range + width * (j + offset);
        }
        return {std::move(edges), mode};
    }

    [[nodiscard]] int bins() const {
        return static_cast<int>(edges_.size()) - 1;
    }
    [[nodiscard]] const std::vector<double> &edges() const { return edges_; }
    [[nodiscard]] const std::vector<double> &weights() const {
        return weights_;
    }
    [[nodiscard]] TailMode tail_mode() const { return mode_; }
    [[nodiscard]] double weight(int i) const {
        return weights_[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (double w : weights_) {
            s += w;
        }
        return s;
    }

    /// Integration interval of bin i, tails included in extend-tails mode.
    [[nodiscard]] std::pair<double, double> interval(int i) const {
        double lo = edges_[static_cast<std::size_t>(i)];
        double hi = edges_[static_cast<std::size_t>(i) + 1];
        if (mode_ == TailMode::ExtendTails) {
            if (i == 0) {
                lo = -INFINITY;
            }
            if (i == bins() - 1) {
                hi = INFINITY;
            }
        }
        return {lo, hi};
    }

  private:
    std::vector<double> edges_;
    std::vector<double> weights_;
    TailMode mode_;
};

struct PovmElement {
    int i = 0;
    int k = 0;
    Matrix matrix;
};

/// FNV-1a over a canonical hex-float rendering of the defining parameters.
inline std::string povm_cache_key(int n_max, int phases,
                                  const std::vector<double> &edges,
                                  TailMode mode) {
    std::string canon = "hshadow-povm/v1;n_max=" + std::to_string(n_max) +
                        ";N=" + std::to_string(phases) +
                        ";tail=" + std::string(to_string(mode)) + ";edges=";
    char buf[64];
    for (double e : edges) {
        std::snprintf(buf, sizeof buf, "%a,", e);
        canon += buf;
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

class PovmSet {
  public:
    PovmSet(PhaseGrid grid, BinningScheme binning, int n_max,
            std::vector<PovmElement> elements)
        : grid_(grid), binning_(std::move(binning)), n_max_(n_max),
          elements_(std::move(elements)),
          key_(povm_cache_key(n_max_, grid_.size(), binning_.edges(),
                              binning_.tail_mode())) {
        if (static_cast<int>(elements_.size()) != outcomes()) {
            throw DomainError("PovmSet: expected M*N elements");
        }
        for (int k = 0; k < phases(); ++k) {
            for (int i = 0; i < bins(); ++i) {
                const auto &e = element(i, k);
                if (e.i != i || e.k != k || e.matrix.rows() != dim() ||
                    e.matrix.cols() != dim()) {
                    throw DomainError("PovmSet: element layout mismatch");
                }
            }
        }
    }

    [[nodiscard]] const PhaseGrid &grid() const { return grid_; }
    [[nodiscard]] const BinningScheme &binning() const { return binning_; }
    [[nodiscard]] int n_max() const { return n_max_; }
    [[nodiscard]] int dim() const { return n_max_ + 1; }
    [[nodiscard]] int phases() const { return grid_.size(); }
    [[nodiscard]] int bins() const { return binning_.bins(); }
    [[nodiscard]] int outcomes() const { return phases() * bins(); }
    /// Flat outcome index used throughout: k * M + i.
    [[nodiscard]] int index(int i, int k) const { return k * bins() + i; }
    [[nodiscard]] const PovmElement &element(int i, int k) const {
        return elements_[static_cast<std::size_t>(index(i, k))];
    }
    [[nodiscard]] const std::vector<PovmElement> &elements() const {
        return elements_;
    }
    [[nodiscard]] const std::string &cache_key() const { return key_; }

  private:
    PhaseGrid grid_;
    BinningScheme binning_;
    int n_max_;
    std::vector<PovmElement> elements_;
    std::string key_;
};

/**
 * Builds every Pi_{i,k}. Each bin's overlap matrix is integrated once and
 * reused for all N phases.
 */
inline PovmSet build_povm(const PhaseGrid &grid, const BinningScheme &binning,
                          int n_max) {
    fock::check_index(n_max);
    const int d = n_max + 1;
    const int M = binning.bins();
    const int N = grid.size();
    std::vector<RealMatrix> overlaps;
    overlaps.reserve(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        const auto [lo, hi] = binning.interval(i);
        overlaps.push_back(fock::bin_overlap_matrix(n_max, lo, hi));
    }
    std::vector<PovmElement> elements;
    elements.reserve(static_cast<std::size_t>(M) * N);
    for (int k = 0; k < N; ++k) {
        Matrix phase(d, d);
        for (int m = 0; m < d; ++m) {
            for (int n = 0; n < d; ++n) {
                phase(m, n) = std::polar(1.0 / N, (m - n) * grid.theta(k));
            }
        }
        for (int i = 0; i < M; ++i) {
            Matrix pi = phase.cwiseProduct(
                overlaps[static_cast<std::size_t>(i)].cast<cplx>());
            elements.push_back({i, k, hermitize(pi)});
        }
    }
    return {grid, binning, n_max, std::move(elements)};
}

struct MeasurementMatrix {
    Matrix E; ///< dim^2 x (M N); column k*M+i is vec(Pi_{i,k})
    RealVector singular_values;
    int rank = 0;
};

inline Matrix assemble_measurement_matrix(const PovmSet &povm) {
    const Index d2 = static_cast<Index>(povm.dim()) * povm.dim();
    Matrix E(d2, povm.outcomes());
    for (const auto &e : povm.elements()) {
        E.col(povm.index(e.i, e.k)) = vectorize(e.matrix);
    }
    return E;
}

inline MeasurementMatrix measurement_matrix(const PovmSet &povm,
                                            double rtol = 1e-10) {
    MeasurementMatrix out;
    out.E = assemble_measurement_matrix(povm);
    auto r = numerical_rank(out.E, rtol);
    out.rank = r.rank;
    out.singular_values = std::move(r.singular_values);
    return out;
}

/// E diag(1/w) E^dagger: the frame operator in the column-stacked basis.
inline Matrix weighted_gram(const Matrix &E, const PovmSet &povm) {
    RealVector inv_w(povm.outcomes());
    for (int k = 0; k < povm.phases(); ++k) {
        for (int i = 0; i < povm.bins(); ++i) {
            inv_w(povm.index(i, k)) = 1.0 / povm.binning().weight(i);
        }
    }
    Matrix C = E * inv_w.asDiagonal() * E.adjoint();
    return hermitize(C);
}

struct ICReport {
    bool complete = false;
    int rank = 0;
    int target = 0;
    RealVector spectrum; ///< singular values of E, descending
    double frame_lambda_min = 0.0;
};

inline ICReport is_informationally_complete(const PovmSet &povm,
                                            double rtol = 1e-10) {
    ICReport rep;
    const Matrix E = assemble_measurement_matrix(povm);
    auto r = numerical_rank(E, rtol);
    rep.rank = r.rank;
    rep.spectrum = std::move(r.singular_values);
    rep.target = povm.dim() * povm.dim();
    rep.complete = rep.rank == rep.target;
    rep.frame_lambda_min = hermitian_eigenvalues(weighted_gram(E, povm))(0);
    return rep;
}

/// N >= 2 n_max + 1 and M >= n_max + 1: suitable bins exist.
inline bool sufficient_condition(int phases, int bins, int n_max) {
    return phases >= 2 * n_max + 1 && bins >= n_max + 1;
}

/// False means no binning can be informationally complete at this N.
inline bool necessary_condition(int phases, int n_max) {
    if (phases >= 2 * n_max + 1) {
        return true;
    }
    return phases > n_max && phases <= 2 * n_max && phases % 2 == 1;
}

/// Per-phase Frobenius norm of sum_i Pi_{i,k} - identity/N.
inline std::vector<double> normalization_residual(const PovmSet &povm) {
    std::vector<double> out;
    const Matrix target =
        Matrix::Identity(povm.dim(), povm.dim()) / double(povm.phases());
    for (int k = 0; k < povm.phases(); ++k) {
        Matrix acc = -target;
        for (int i = 0; i < povm.bins(); ++i) {
            acc += povm.element(i, k).matrix;
        }
        out.push_back(acc.norm());
    }
    return out;
}

inline double default_initial_range(int n_max) {
    return std::sqrt(2.0 * n_max + 1.0) + 1.0;
}

/// Shift of the design grid, as a fraction of one bin width.
inline constexpr double kDesignOffset = 0.25;

struct DesignOptions {
    double initial_range = 0.0; ///< <= 0 selects default_initial_range
    double range_step = 0.5;
    int max_iter = 100;
    TailMode tail_mode = TailMode::ExtendTails;
    double rtol = 1e-10;
};

struct DesignResult {
    BinningScheme scheme;
    double range;
    int iterations; ///< number of L values tried
    ICReport report;
};

/**
 * Equal-width bin design: widens the window by range_step until the
 * measurement matrix reaches rank (n_max+1)^2.
 *
 * The grid is shifted by a quarter bin width. A grid symmetric about the
 * origin makes every diagonal row of E even under reflection, which caps
 * the rank below (n_max+1)^2 whenever M < 2 n_max + 1.
 */
inline DesignResult design_bins(int n_max, int phases, int bins,
                                DesignOptions opts = {}) {
    fock::check_index(n_max);
    if (phases < 1 || bins < 1) {
        throw DomainError("design_bins: phases and bins must be positive");
    }
    if (opts.initial_range <= 0.0) {
        opts.initial_range = default_initial_range(n_max);
    }
    if (!(opts.range_step > 0.0) || opts.max_iter < 0) {
        throw DomainError("design_bins: need range_step > 0, max_iter >= 0");
    }
    if (!sufficient_condition(phases, bins, n_max)) {
        warn("design_bins: N=" + std::to_string(phases) +
             ", M=" + std::to_string(bins) +
             " below the sufficient condition for n_max=" +
             std::to_string(n_max) + "; proceeding");
    }
    const PhaseGrid grid(phases);
    const int target = (n_max + 1) * (n_max + 1);
    int best = -1;
    double range = opts.initial_range;
    for (int t = 0; t <= opts.max_iter; ++t) {
        range = opts.initial_range + t * opts.range_step;
        auto scheme = BinningScheme::equal_spaced(bins, range, opts.tail_mode,
                                                  kDesignOffset);
        const auto povm = build_povm(grid, scheme, n_max);
        auto rep = is_informationally_complete(povm, opts.rtol);
        best = std::max(best, rep.rank);
        if (rep.complete) {
            return {std::move(scheme), range, t + 1, std::move(rep)};
        }
    }
    throw DesignError("design_bins: no informationally complete binning after " +
                          std::to_string(opts.max_iter + 1) +
                          " ranges (best rank " + std::to_string(best) + " of " +
                          std::to_string(target) + ", final L " +
                          std::to_string(range) + ")",
                      best, target, range, opts.max_iter + 1);
}

} // namespace hshadow
