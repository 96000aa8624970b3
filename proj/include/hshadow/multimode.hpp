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
 * Multi-mode measurement with tensor-product POVMs
 * Pi_{i,k} = Pi^{(1)}_{i_1,k_1} (x) ... (x) Pi^{(S)}_{i_S,k_S}.
 *
 * Dense joint states are limited to three modes; product states are
 * handled mode by mode for any S. Joint outcome indices are row-major with
 * mode 0 most significant, and each mode's own index is k * M + i.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "povm.hpp"
#include "records.hpp"
#include "shadow.hpp"
#include "sim.hpp"
#include "states.hpp"

namespace hshadow {

inline constexpr int kMaxDenseModes = 3;

struct MultiModeConfig {
    std::vector<PovmSet> modes;
    /// Modes measured non-trivially by the local observable (sorted).
    std::vector<int> support;

    [[nodiscard]] int size() const { return static_cast<int>(modes.size()); }
};

inline MultiModeConfig make_multimode_config(std::vector<PovmSet> modes,
                                             std::vector<int> support) {
    if (modes.empty()) {
        throw ConfigError("multi-mode configuration needs at least one mode");
    }
    std::sort(support.begin(), support.end());
    if (std::adjacent_find(support.begin(), support.end()) != support.end()) {
        throw ConfigError("support lists a mode twice");
    }
    for (int j : support) {
        if (j < 0 || j >= static_cast<int>(modes.size())) {
            throw ConfigError("support mode " + std::to_string(j) +
                              " does not exist");
        }
    }
    return {std::move(modes), std::move(support)};
}

/// Either a product of single-mode states or one dense joint matrix.
struct MultiModeState {
    std::vector<DensityMatrix> factors;
    Matrix dense;
    std::vector<int> dims;

    static MultiModeState product(std::vector<DensityMatrix> factors) {
        MultiModeState s;
        for (const auto &f : factors) {
            s.dims.push_back(f.dim());
        }
        s.factors = std::move(factors);
        return s;
    }

    static MultiModeState joint(Matrix rho, std::vector<int> dims) {
        const Index total = std::accumulate(dims.begin(), dims.end(), Index{1},
                                            std::multiplies<>());
        if (rho.rows() != total || rho.cols() != total) {
            throw DomainError("joint state size does not match mode dims");
        }
        MultiModeState s;
        s.dense = std::move(rho);
        s.dims = std::move(dims);
        return s;
    }

    [[nodiscard]] bool is_product() const { return !factors.empty(); }
    [[nodiscard]] int modes() const { return static_cast<int>(dims.size()); }

    /// Dense matrix (Kronecker product of the factors for product states).
    [[nodiscard]] Matrix matrix() const {
        if (!is_product()) {
            return dense;
        }
        Matrix m = factors.front().matrix;
        for (std::size_t j = 1; j < factors.size(); ++j) {
            m = kron(m, factors[j].matrix);
        }
        return m;
    }
};

/// Reduced state of mode `keep` of a dense multi-mode matrix.
inline Matrix partial_trace(const Matrix &rho, const std::vector<int> &dims,
                            int keep) {
    const int S = static_cast<int>(dims.size());
    if (keep < 0 || keep >= S) {
        throw DomainError("partial_trace: bad mode");
    }
    Index before = 1, after = 1;
    for (int j = 0; j < keep; ++j) {
        before *= dims[static_cast<std::size_t>(j)];
    }
    for (int j = keep + 1; j < S; ++j) {
        after *= dims[static_cast<std::size_t>(j)];
    }
    const Index d = dims[static_cast<std::size_t>(keep)];
    Matrix out = Matrix::Zero(d, d);
    for (Index a = 0; a < before; ++a) {
        for (Index c = 0; c < after; ++c) {
            for (Index m = 0; m < d; ++m) {
                for (Index n = 0; n < d; ++n) {
                    out(m, n) += rho((a * d + m) * after + c,
                                     (a * d + n) * after + c);
                }
            }
        }
    }
    return out;
}

struct JointDistribution {
    std::vector<int> outcomes_per_mode;
    OutcomeDistribution flat; ///< bins/phases unused; index is joint

    /// Per-mode flat indices (k * M + i) of joint index j.
    [[nodiscard]] std::vector<int> decode(std::size_t j) const {
        std::vector<int> idx(outcomes_per_mode.size());
        for (std::size_t m = outcomes_per_mode.size(); m-- > 0;) {
            const auto n = static_cast<std::size_t>(outcomes_per_mode[m]);
            idx[m] = static_cast<int>(j % n);
            j /= n;
        }
        return idx;
    }
};

namespace detail {
inline void check_dims(const MultiModeState &state, const MultiModeConfig &cfg) {
    if (state.modes() != cfg.size()) {
        throw ConfigError("state has " + std::to_string(state.modes()) +
                          " modes, configuration has " +
                          std::to_string(cfg.size()));
    }
    for (int j = 0; j < cfg.size(); ++j) {
        if (state.dims[static_cast<std::size_t>(j)] !=
            cfg.modes[static_cast<std::size_t>(j)].dim()) {
            throw DomainError("mode " + std::to_string(j) +
                              " dimension differs from its POVM");
        }
    }
}
} // namespace detail

/**
 * Exact joint probabilities Tr(rho (x)_j Pi^{(j)}). Product states
 * factorize; dense states need S <= 3.
 */
inline JointDistribution joint_distribution(const MultiModeState &state,
                                            const MultiModeConfig &cfg) {
    detail::check_dims(state, cfg);
    JointDistribution jd;
    std::size_t total = 1;
    for (const auto &p : cfg.modes) {
        jd.outcomes_per_mode.push_back(p.outcomes());
        total *= static_cast<std::size_t>(p.outcomes());
    }
    std::vector<double> probs(total);
    if (state.is_product()) {
        std::vector<std::vector<double>> per_mode;
        for (int j = 0; j < cfg.size(); ++j) {
            per_mode.push_back(outcome_probabilities(
                state.factors[static_cast<std::size_t>(j)].matrix,
                cfg.modes[static_cast<std::size_t>(j)]));
        }
        for (std::size_t idx = 0; idx < total; ++idx) {
            const auto parts = jd.decode(idx);
            double p = 1.0;
            for (std::size_t j = 0; j < parts.size(); ++j) {
                p *= per_mode[j][static_cast<std::size_t>(parts[j])];
            }
            probs[idx] = p;
        }
    } else {
        if (cfg.size() > kMaxDenseModes) {
            throw ConfigError("dense joint states support at most " +
                              std::to_string(kMaxDenseModes) + " modes");
        }
        for (std::size_t idx = 0; idx < total; ++idx) {
            const auto parts = jd.decode(idx);
            Matrix op = cfg.modes[0].elements()[static_cast<std::size_t>(parts[0])].matrix;
            for (std::size_t j = 1; j < parts.size(); ++j) {
                op = kron(op, cfg.modes[j]
                                  .elements()[static_cast<std::size_t>(parts[j])]
                                  .matrix);
            }
            probs[idx] = trace_product(state.dense, op).real();
        }
    }
    jd.flat = distribution_from(std::move(probs), 0, 0);
    return jd;
}

/// Joint stream id for dense sampling; product sampling uses the mode index.
inline constexpr std::uint64_t kJointStream = 0xffffffffULL;

/**
 * T shots, each emitting one record per mode (mode j, same ordinal t).
 * Product states sample each mode from its own distribution with stream j.
 */
inline std::vector<MeasurementRecord>
sample_multi(const MultiModeState &state, const MultiModeConfig &cfg,
             std::uint64_t shots, std::uint64_t seed) {
    detail::check_dims(state, cfg);
    if (shots < 1) {
        throw DomainError("sample_multi: need T >= 1");
    }
    const int S = cfg.size();
    std::vector<MeasurementRecord> out;
    out.reserve(shots * static_cast<std::uint64_t>(S));
    if (state.is_product()) {
        std::vector<std::vector<MeasurementRecord>> per_mode;
        for (int j = 0; j < S; ++j) {
            const auto dist = outcome_distribution(
                state.factors[static_cast<std::size_t>(j)],
                cfg.modes[static_cast<std::size_t>(j)]);
            per_mode.push_back(sample(dist, shots, seed, j));
        }
        for (std::uint64_t t = 0; t < shots; ++t) {
            for (int j = 0; j < S; ++j) {
                out.push_back(per_mode[static_cast<std::size_t>(j)][t]);
            }
        }
        return out;
    }
    const auto jd = joint_distribution(state, cfg);
    if (!(jd.flat.cumulative.back() > 0.0)) {
        throw DomainError("sample_multi: distribution has zero total mass");
    }
    for (std::uint64_t t = 0; t < shots; ++t) {
        const auto idx =
            draw_index(jd.flat.cumulative, shot_uniform(seed, t, kJointStream));
        const auto parts = jd.decode(idx);
        for (int j = 0; j < S; ++j) {
            const int M = cfg.modes[static_cast<std::size_t>(j)].bins();
            const int flat = parts[static_cast<std::size_t>(j)];
            out.push_back({t, j, flat / M, flat % M});
        }
    }
    return out;
}

namespace detail {

inline std::vector<std::vector<double>>
support_values(const MultiModeConfig &cfg,
               const std::map<int, SnapshotTable> &tables,
               const std::vector<Observable> &observables) {
    if (observables.size() != cfg.support.size()) {
        throw ConfigError("need one observable per support mode");
    }
    std::vector<std::vector<double>> values;
    for (std::size_t s = 0; s < cfg.support.size(); ++s) {
        const int j = cfg.support[s];
        const auto it = tables.find(j);
        if (it == tables.end()) {
            throw ConfigError("missing snapshot table for mode " +
                              std::to_string(j));
        }
        if (it->second.povm_key() !=
            cfg.modes[static_cast<std::size_t>(j)].cache_key()) {
            throw ConfigError("snapshot table for mode " + std::to_string(j) +
                              " was built from a different POVM");
        }
        values.push_back(outcome_values(it->second, observables[s]));
    }
    return values;
}

} // namespace detail

/**
 * Per-shot value prod_{j in V} Tr(X_j rho_hat^{(j)}) aggregated like the
 * single-mode estimator. Shots are identified by the record ordinal t.
 */
inline EstimateReport estimate_local(std::span<const MeasurementRecord> records,
                                     const MultiModeConfig &cfg,
                                     const std::map<int, SnapshotTable> &tables,
                                     const std::vector<Observable> &observables,
                                     EstimatorVariant variant = {}) {
    if (records.empty()) {
        throw DomainError("estimate_local: empty record stream");
    }
    const auto values = detail::support_values(cfg, tables, observables);
    // shot ordinal -> (product so far, number of support modes seen)
    std::map<std::uint64_t, std::pair<double, int>> shots;
    for (std::size_t n = 0; n < records.size(); ++n) {
        const auto &r = records[n];
        if (r.mode < 0 || r.mode >= cfg.size()) {
            throw MalformedRecordError(n, "mode " + std::to_string(r.mode) +
                                              " not configured");
        }
        const auto &povm = cfg.modes[static_cast<std::size_t>(r.mode)];
        if (r.k < 0 || r.k >= povm.phases() || r.i < 0 || r.i >= povm.bins()) {
            throw MalformedRecordError(n, "outcome outside mode POVM");
        }
        auto &slot = shots.try_emplace(r.t, 1.0, 0).first->second;
        const auto pos = std::lower_bound(cfg.support.begin(),
                                          cfg.support.end(), r.mode);
        if (pos != cfg.support.end() && *pos == r.mode) {
            const auto s = static_cast<std::size_t>(pos - cfg.support.begin());
            slot.first *= values[s][static_cast<std::size_t>(povm.index(r.i, r.k))];
            ++slot.second;
        }
    }
    std::vector<double> per_shot;
    per_shot.reserve(shots.size());
    for (const auto &[t, slot] : shots) {
        if (slot.second != static_cast<int>(cfg.support.size())) {
            throw MalformedRecordError(
                static_cast<std::size_t>(t),
                "shot lacks a record for some support mode");
        }
        per_shot.push_back(slot.first);
    }
    std::string label;
    for (std::size_t s = 0; s < observables.size(); ++s) {
        label += (s ? "*" : "") + observables[s].label + "@" +
                 std::to_string(cfg.support[s]);
    }
    return summarize(std::move(per_shot), label.empty() ? "identity" : label,
                     variant, false);
}

/// Infinite-data limit: sum over joint outcomes of P times the per-shot value.
inline double exact_local_expectation(const JointDistribution &jd,
                                      const MultiModeConfig &cfg,
                                      const std::map<int, SnapshotTable> &tables,
                                      const std::vector<Observable> &observables) {
    const auto values = detail::support_values(cfg, tables, observables);
    std::vector<double> terms(jd.flat.size());
    for (std::size_t idx = 0; idx < terms.size(); ++idx) {
        const auto parts = jd.decode(idx);
        double v = jd.flat.probabilities[idx];
        for (std::size_t s = 0; s < cfg.support.size(); ++s) {
            v *= values[s][static_cast<std::size_t>(
                parts[static_cast<std::size_t>(cfg.support[s])])];
        }
        terms[idx] = v;
    }
    return pairwise_sum(terms);
}

/// prod_{j in V} ||X_j||_{E,j}.
inline double multi_shadow_norm(const MultiModeConfig &cfg,
                                const std::map<int, SnapshotTable> &tables,
                                const std::vector<Observable> &observables) {
    if (observables.size() != cfg.support.size()) {
        throw ConfigError("need one observable per support mode");
    }
    double prod = 1.0;
    for (std::size_t s = 0; s < cfg.support.size(); ++s) {
        const int j = cfg.support[s];
        const auto it = tables.find(j);
        if (it == tables.end()) {
            throw ConfigError("missing snapshot table for mode " +
                              std::to_string(j));
        }
        prod *= shadow_norm(observables[s], it->second,
                            cfg.modes[static_cast<std::size_t>(j)]);
    }
    return prod;
}

} // namespace hshadow
