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
 * Exact outcome distributions, seeded sampling of measurement records and
 * the indistinguishable state pairs behind the phase-count necessity
 * condition.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "povm.hpp"
#include "records.hpp"
#include "shadow.hpp"
#include "states.hpp"

namespace hshadow {

/// Probabilities in [-kNegativeClamp, 0) are roundoff and clamp to zero.
inline constexpr double kNegativeClamp = 1e-12;

struct OutcomeDistribution {
    int bins = 0;
    int phases = 0;
    std::vector<double> probabilities; ///< flat index k * M + i
    std::vector<double> cumulative;    ///< clamped running sums
    double deficit = 0.0;              ///< 1 - sum P

    [[nodiscard]] double prob(int i, int k) const {
        return probabilities[static_cast<std::size_t>(k * bins + i)];
    }
    [[nodiscard]] std::size_t size() const { return probabilities.size(); }
};

inline OutcomeDistribution distribution_from(std::vector<double> p, int bins,
                                             int phases) {
    OutcomeDistribution d;
    d.bins = bins;
    d.phases = phases;
    double total = 0.0;
    d.cumulative.reserve(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] < -kNegativeClamp) {
            throw DomainError("outcome probability " + std::to_string(p[j]) +
                              " at index " + std::to_string(j) +
                              " is negative beyond roundoff");
        }
        p[j] = std::max(p[j], 0.0);
        total += p[j];
        d.cumulative.push_back(total);
    }
    d.probabilities = std::move(p);
    d.deficit = 1.0 - total;
    return d;
}

/// P(i, k) = Tr(rho Pi_{i,k}).
inline OutcomeDistribution outcome_distribution(const DensityMatrix &rho,
                                                const PovmSet &povm) {
    if (rho.dim() != povm.dim()) {
        throw DomainError("outcome_distribution: state has n_max=" +
                          std::to_string(rho.n_max) + ", POVM has n_max=" +
                          std::to_string(povm.n_max()));
    }
    return distribution_from(outcome_probabilities(rho.matrix, povm),
                             povm.bins(), povm.phases());
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Uniform in [0, 1) for shot t of `stream` under `seed`. Depends only on
 * the three integers, so shots can be drawn in any order.
 */
inline double shot_uniform(std::uint64_t seed, std::uint64_t t,
                           std::uint64_t stream = 0) {
    const std::uint64_t z = mix64(mix64(seed ^ mix64(stream)) + t);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

/// Inverse-CDF lookup of u scaled by the total mass.
inline std::size_t draw_index(const std::vector<double> &cumulative, double u) {
    const double target = u * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) {
        --it;
    }
    return static_cast<std::size_t>(it - cumulative.begin());
}

/**
 * T i.i.d. outcome draws. Shot t uses shot_uniform(seed, t, mode), so the
 * stream is identical for any worker count.
 */
inline std::vector<MeasurementRecord> sample(const OutcomeDistribution &dist,
                                             std::uint64_t shots,
                                             std::uint64_t seed, int mode = 0,
                                             unsigned workers = 1) {
    if (shots < 1) {
        throw DomainError("sample: need T >= 1");
    }
    if (dist.cumulative.empty() || !(dist.cumulative.back() > 0.0)) {
        throw DomainError("sample: distribution has zero total mass");
    }
    std::vector<MeasurementRecord> out(shots);
    auto fill = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            const auto j = draw_index(
                dist.cumulative,
                shot_uniform(seed, t, static_cast<std::uint64_t>(mode)));
            out[t] = {t, mode, static_cast<int>(j) / dist.bins,
                      static_cast<int>(j) % dist.bins};
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, 64));
    if (workers == 1 || shots < 4096) {
        fill(0, shots);
        return out;
    }
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (shots + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t b = std::min<std::uint64_t>(shots, w * chunk);
        const std::uint64_t e = std::min<std::uint64_t>(shots, b + chunk);
        pool.emplace_back(fill, b, e);
    }
    for (auto &th : pool) {
        th.join();
    }
    return out;
}

struct IndistinguishabilityReport {
    std::string regime; ///< "N<=n_max", "even-N" or "control"
    int level = 0;      ///< Fock level paired with the vacuum
    double max_gap = 0.0;
    double trace_distance = 0.0;
};

/**
 * Builds (|0> + i|n>)/sqrt(2) and its conjugate partner and compares their
 * outcome distributions. n = N when N <= n_max, n = N/2 for even N in
 * (n_max, 2 n_max]. Outside both regimes a domain error is raised unless
 * `control_level` > 0 names the level to use.
 */
inline IndistinguishabilityReport
indistinguishability_experiment(int n_max, int phases,
                                const BinningScheme &binning,
                                int control_level = 0) {
    IndistinguishabilityReport rep;
    if (phases <= n_max) {
        rep.regime = "N<=n_max";
        rep.level = phases;
    } else if (phases <= 2 * n_max && phases % 2 == 0) {
        rep.regime = "even-N";
        rep.level = phases / 2;
    } else if (control_level > 0) {
        rep.regime = "control";
        rep.level = control_level;
    } else {
        throw DomainError("indistinguishability_experiment: N=" +
                          std::to_string(phases) + " with n_max=" +
                          std::to_string(n_max) +
                          " is in neither the N<=n_max nor the even-N regime");
    }
    const auto povm = build_povm(PhaseGrid(phases), binning, n_max);
    const auto [psi, partner] =
        superposition_pair(1.0, cplx(0.0, 1.0), rep.level, n_max);
    const auto p = outcome_probabilities(psi.matrix, povm);
    const auto q = outcome_probabilities(partner.matrix, povm);
    for (std::size_t j = 0; j < p.size(); ++j) {
        rep.max_gap = std::max(rep.max_gap, std::abs(p[j] - q[j]));
    }
    rep.trace_distance = trace_distance(psi.matrix, partner.matrix);
    return rep;
}

} // namespace hshadow
