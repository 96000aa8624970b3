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
 * Classical shadows for the binned homodyne POVM.
 *
 * The frame operator acts on column-stacked matrices as
 *
 *   C_E = sum_{i,k} vec(Pi_{i,k}) vec(Pi_{i,k})^dagger / w_i,
 *
 * and the snapshot for outcome (i, k) is C_E^{-1}(Pi_{i,k} / w_i). Both the
 * strict inverse and the Moore-Penrose pseudo-inverse go through one
 * eigendecomposition so the spectrum is always available for diagnostics.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <functional>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "povm.hpp"
#include "records.hpp"
#include "states.hpp"

namespace hshadow {

struct FrameOperator {
    Matrix matrix;
    RealVector eigenvalues; ///< ascending
    Matrix eigenvectors;
    std::string povm_key;

    [[nodiscard]] double lambda_min() const { return eigenvalues(0); }
    [[nodiscard]] double lambda_max() const {
        return eigenvalues(eigenvalues.size() - 1);
    }
    [[nodiscard]] double condition_number() const {
        return lambda_min() > 0.0 ? lambda_max() / lambda_min()
                                  : std::numeric_limits<double>::infinity();
    }
    /// C_E(rho) for a d x d matrix.
    [[nodiscard]] Matrix apply(const Matrix &rho) const {
        return devectorize(matrix * vectorize(rho), rho.rows());
    }
};

inline FrameOperator frame_operator(const PovmSet &povm) {
    FrameOperator f;
    f.matrix = weighted_gram(assemble_measurement_matrix(povm), povm);
    Eigen::SelfAdjointEigenSolver<Matrix> es(f.matrix);
    f.eigenvalues = es.eigenvalues();
    f.eigenvectors = es.eigenvectors();
    f.povm_key = povm.cache_key();
    return f;
}

enum class InversionMode { Strict, Pseudo };

inline std::string_view to_string(InversionMode mode) {
    return mode == InversionMode::Strict ? "strict" : "pseudo";
}

inline InversionMode parse_inversion_mode(std::string_view s) {
    if (s == "strict") {
        return InversionMode::Strict;
    }
    if (s == "pseudo") {
        return InversionMode::Pseudo;
    }
    throw DomainError("unknown inversion mode '" + std::string(s) + "'");
}

inline constexpr double kDefaultInversionThreshold = 1e-12;

struct InverseFrame {
    InversionMode mode = InversionMode::Strict;
    Matrix matrix;
    double threshold = kDefaultInversionThreshold;
    int kept = 0; ///< eigenvalues inverted
    double lambda_min = 0.0;
    std::string povm_key;

    [[nodiscard]] Matrix apply(const Matrix &m) const {
        return devectorize(matrix * vectorize(m), m.rows());
    }
};

/**
 * Strict mode requires lambda_min > threshold and inverts every
 * eigenvalue; pseudo mode inverts those above threshold and zeroes the rest.
 */
inline InverseFrame invert_frame(const FrameOperator &frame, InversionMode mode,
                                 double threshold = kDefaultInversionThreshold) {
    if (!(threshold >= 0.0)) {
        throw DomainError("invert_frame: threshold must be >= 0");
    }
    if (mode == InversionMode::Strict && !(frame.lambda_min() > threshold)) {
        throw SingularFrameError(frame.lambda_min(), threshold);
    }
    RealVector inv = RealVector::Zero(frame.eigenvalues.size());
    int kept = 0;
    for (Index j = 0; j < inv.size(); ++j) {
        if (frame.eigenvalues(j) > threshold) {
            inv(j) = 1.0 / frame.eigenvalues(j);
            ++kept;
        }
    }
    InverseFrame out;
    out.mode = mode;
    out.threshold = threshold;
    out.kept = kept;
    out.lambda_min = frame.lambda_min();
    out.povm_key = frame.povm_key;
    out.matrix = hermitize(frame.eigenvectors * inv.asDiagonal() *
                           frame.eigenvectors.adjoint());
    return out;
}

/// rho_hat_{i,k} for every outcome, indexed like the POVM (k * M + i).
class SnapshotTable {
  public:
    SnapshotTable(int n_max, int bins, int phases, InversionMode mode,
                  std::string povm_key, std::vector<Matrix> snaps)
        : n_max_(n_max), bins_(bins), phases_(phases), mode_(mode),
          key_(std::move(povm_key)), snaps_(std::move(snaps)) {}

    [[nodiscard]] int n_max() const { return n_max_; }
    [[nodiscard]] int dim() const { return n_max_ + 1; }
    [[nodiscard]] int bins() const { return bins_; }
    [[nodiscard]] int phases() const { return phases_; }
    [[nodiscard]] int outcomes() const { return bins_ * phases_; }
    [[nodiscard]] InversionMode mode() const { return mode_; }
    [[nodiscard]] const std::string &povm_key() const { return key_; }
    [[nodiscard]] const Matrix &snapshot(int i, int k) const {
        return snaps_[static_cast<std::size_t>(k * bins_ + i)];
    }
    [[nodiscard]] const std::vector<Matrix> &all() const { return snaps_; }

  private:
    int n_max_, bins_, phases_;
    InversionMode mode_;
    std::string key_;
    std::vector<Matrix> snaps_;
};

inline SnapshotTable snapshots(const PovmSet &povm, const InverseFrame &inv) {
    const Index d = povm.dim();
    if (inv.matrix.rows() != d * d) {
        throw DomainError("snapshots: inverse frame does not match POVM size");
    }
    const Matrix E = assemble_measurement_matrix(povm);
    RealVector inv_w(povm.outcomes());
    for (int k = 0; k < povm.phases(); ++k) {
        for (int i = 0; i < povm.bins(); ++i) {
            inv_w(povm.index(i, k)) = 1.0 / povm.binning().weight(i);
        }
    }
    const Matrix S = inv.matrix * E * inv_w.asDiagonal();
    std::vector<Matrix> snaps;
    snaps.reserve(static_cast<std::size_t>(povm.outcomes()));
    for (Index c = 0; c < S.cols(); ++c) {
        snaps.push_back(hermitize(devectorize(S.col(c), d)));
    }
    return {povm.n_max(), povm.bins(), povm.phases(), inv.mode,
            povm.cache_key(), std::move(snaps)};
}

/// Tr(X rho_hat_{i,k}) for every outcome, flat index k * M + i.
inline std::vector<double> outcome_values(const SnapshotTable &table,
                                          const Observable &x) {
    if (x.matrix.rows() != table.dim()) {
        throw DomainError("observable and snapshot table differ in n_max");
    }
    std::vector<double> v;
    v.reserve(table.all().size());
    for (const auto &s : table.all()) {
        v.push_back(trace_product(x.matrix, s).real());
    }
    return v;
}

struct EstimatorVariant {
    enum class Kind { PlainMean, MedianOfMeans } kind = Kind::PlainMean;
    int batches = 10;

    [[nodiscard]] std::string name() const {
        return kind == Kind::PlainMean
                   ? "plain-mean"
                   : "median-of-means:" + std::to_string(batches);
    }
};

/// "plain-mean", "median-of-means" or "median-of-means:B".
inline EstimatorVariant parse_variant(std::string_view s) {
    EstimatorVariant v;
    if (s == "plain-mean") {
        return v;
    }
    constexpr std::string_view mom = "median-of-means";
    if (s.substr(0, mom.size()) == mom) {
        v.kind = EstimatorVariant::Kind::MedianOfMeans;
        auto rest = s.substr(mom.size());
        if (rest.empty()) {
            return v;
        }
        if (rest.front() == ':') {
            rest.remove_prefix(1);
            int b = 0;
            auto [p, ec] = std::from_chars(rest.data(),
                                           rest.data() + rest.size(), b);
            if (ec == std::errc() && p == rest.data() + rest.size() && b >= 1) {
                v.batches = b;
                return v;
            }
        }
    }
    throw DomainError("unknown estimator variant '" + std::string(s) + "'");
}

struct EstimateReport {
    std::string label;
    double mean = 0.0;
    double standard_error = 0.0;
    std::uint64_t shots = 0;
    EstimatorVariant variant;
    std::vector<double> values; ///< per-shot values when requested
};

namespace detail {

inline double median_of_means(std::span<const double> xs, int batches) {
    const std::size_t B = std::min<std::size_t>(
        static_cast<std::size_t>(batches), xs.size());
    std::vector<double> means;
    means.reserve(B);
    std::size_t start = 0;
    for (std::size_t b = 0; b < B; ++b) {
        // Batch sizes differ by at most one.
        const std::size_t len = xs.size() / B + (b < xs.size() % B ? 1 : 0);
        means.push_back(pairwise_sum(xs.subspan(start, len)) / len);
        start += len;
    }
    std::sort(means.begin(), means.end());
    return B % 2 == 1 ? means[B / 2]
                      : 0.5 * (means[B / 2 - 1] + means[B / 2]);
}

} // namespace detail

/// Aggregates per-shot values with the requested variant.
inline EstimateReport summarize(std::vector<double> values, std::string label,
                                EstimatorVariant variant, bool keep_values) {
    if (values.empty()) {
        throw DomainError("estimate: no records");
    }
    EstimateReport rep;
    rep.label = std::move(label);
    rep.variant = variant;
    rep.shots = values.size();
    const double T = static_cast<double>(values.size());
    // Shifted by the first value so constant inputs give an exact mean and
    // a zero standard error.
    const double shift = values.front();
    std::vector<double> dev(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
        dev[j] = values[j] - shift;
    }
    const double dmean = pairwise_sum(dev) / T;
    const double mean = shift + dmean;
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t j = 0; j < values.size(); ++j) {
            sq[j] = (dev[j] - dmean) * (dev[j] - dmean);
        }
        rep.standard_error = std::sqrt(pairwise_sum(sq) / (T - 1.0) / T);
    }
    rep.mean = variant.kind == EstimatorVariant::Kind::PlainMean
                   ? mean
                   : detail::median_of_means(values, variant.batches);
    if (keep_values) {
        rep.values = std::move(values);
    }
    return rep;
}

/**
 * Per-shot values Tr(X rho_hat_{i_t,k_t}) aggregated by plain mean or
 * median of batch means. The standard error is always sample std / sqrt(T).
 */
inline EstimateReport estimate_observable(
    std::span<const MeasurementRecord> records, const SnapshotTable &table,
    const Observable &x, EstimatorVariant variant = {},
    bool keep_values = false) {
    if (records.empty()) {
        throw DomainError("estimate_observable: empty record stream");
    }
    const auto table_values = outcome_values(table, x);
    std::vector<double> values;
    values.reserve(records.size());
    for (std::size_t t = 0; t < records.size(); ++t) {
        const auto &r = records[t];
        if (r.k < 0 || r.k >= table.phases() || r.i < 0 ||
            r.i >= table.bins()) {
            throw MalformedRecordError(
                t, "outcome (i=" + std::to_string(r.i) +
                       ", k=" + std::to_string(r.k) + ") outside " +
                       std::to_string(table.bins()) + " bins x " +
                       std::to_string(table.phases()) + " phases");
        }
        values.push_back(
            table_values[static_cast<std::size_t>(r.k * table.bins() + r.i)]);
    }
    return summarize(std::move(values), x.label, variant, keep_values);
}

/// P(i,k) = Re Tr(rho Pi_{i,k}), flat index k * M + i, no clamping.
inline std::vector<double> outcome_probabilities(const Matrix &rho,
                                                 const PovmSet &povm) {
    if (rho.rows() != povm.dim()) {
        throw DomainError("state and POVM differ in n_max");
    }
    std::vector<double> p(static_cast<std::size_t>(povm.outcomes()));
    for (const auto &e : povm.elements()) {
        p[static_cast<std::size_t>(povm.index(e.i, e.k))] =
            trace_product(rho, e.matrix).real();
    }
    return p;
}

/**
 * Single-shot variance sum_{i,k} P(i,k) v_{i,k}^2 - (sum P v)^2 with
 * v_{i,k} = Tr(X rho_hat_{i,k}). In strict mode sum P v equals <X>.
 */
inline double exact_variance(const DensityMatrix &rho, const Observable &x,
                             const SnapshotTable &table, const PovmSet &povm) {
    if (table.mode() == InversionMode::Pseudo) {
        warn("exact_variance: pseudo-inverse snapshots give a biased "
             "estimator");
    }
    const auto p = outcome_probabilities(rho.matrix, povm);
    const auto v = outcome_values(table, x);
    std::vector<double> first(p.size()), second(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        first[j] = p[j] * v[j];
        second[j] = p[j] * v[j] * v[j];
    }
    const double m1 = pairwise_sum(first);
    return pairwise_sum(second) - m1 * m1;
}

/// lambda_max of sum_{i,k} Tr(X rho_hat_{i,k})^2 Pi_{i,k}.
inline double shadow_norm(const Observable &x, const SnapshotTable &table,
                          const PovmSet &povm) {
    const auto v = outcome_values(table, x);
    Matrix acc = Matrix::Zero(povm.dim(), povm.dim());
    for (const auto &e : povm.elements()) {
        const double vi = v[static_cast<std::size_t>(povm.index(e.i, e.k))];
        acc += (vi * vi) * e.matrix;
    }
    const auto ev = hermitian_eigenvalues(hermitize(acc));
    return ev(ev.size() - 1);
}

/// N (n_max + 1) M^2 ||X||_inf^2.
inline double variance_bound(int phases, int bins, int n_max,
                             const Observable &x) {
    if (phases < 1 || bins < 1 || n_max < 0) {
        throw DomainError("variance_bound: parameters must be positive");
    }
    return static_cast<double>(phases) * (n_max + 1) * double(bins) * bins *
           x.norm * x.norm;
}

/**
 * Smallest T with 2 exp(-T eps^2 / 2 / (norm + 2 eps / 3)) <= delta,
 * i.e. ceil(2 (norm + 2 eps / 3) ln(2 / delta) / eps^2).
 */
inline std::uint64_t bernstein_samples(double shadow_norm, double eps,
                                       double delta) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw DomainError("bernstein_samples: eps must be positive");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw DomainError("bernstein_samples: delta must be in (0, 1)");
    }
    if (!(shadow_norm >= 0.0) || !std::isfinite(shadow_norm)) {
        throw DomainError("bernstein_samples: shadow norm must be >= 0");
    }
    const double t = 2.0 * (shadow_norm + 2.0 * eps / 3.0) *
                     std::log(2.0 / delta) / (eps * eps);
    return static_cast<std::uint64_t>(std::ceil(t));
}

/// Nearest (Frobenius) unit-trace PSD matrix to a Hermitian matrix.
inline Matrix project_to_density(const Matrix &h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(h));
    RealVector lam = es.eigenvalues();
    // Euclidean projection of the spectrum onto the probability simplex.
    std::vector<double> sorted(lam.data(), lam.data() + lam.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cum = 0.0;
    double shift = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cum += sorted[j];
        const double candidate = (cum - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            shift = candidate;
        }
    }
    for (Index j = 0; j < lam.size(); ++j) {
        lam(j) = std::max(lam(j) - shift, 0.0);
    }
    return hermitize(es.eigenvectors() * lam.asDiagonal() *
                     es.eigenvectors().adjoint());
}

/**
 * Plain average of the snapshots. With project = true the average is
 * mapped to the nearest density matrix, which biases the estimate.
 */
inline Matrix reconstruct_state(std::span<const MeasurementRecord> records,
                                const SnapshotTable &table,
                                bool project = false) {
    if (records.empty()) {
        throw DomainError("reconstruct_state: empty record stream");
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(table.outcomes()));
    for (std::size_t t = 0; t < records.size(); ++t) {
        const auto &r = records[t];
        if (r.k < 0 || r.k >= table.phases() || r.i < 0 ||
            r.i >= table.bins()) {
            throw MalformedRecordError(t, "outcome outside the POVM");
        }
        ++counts[static_cast<std::size_t>(r.k * table.bins() + r.i)];
    }
    Matrix acc = Matrix::Zero(table.dim(), table.dim());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j]) {
            acc += static_cast<double>(counts[j]) * table.all()[j];
        }
    }
    acc /= static_cast<double>(records.size());
    acc = hermitize(acc);
    return project ? project_to_density(acc) : acc;
}

} // namespace hshadow
