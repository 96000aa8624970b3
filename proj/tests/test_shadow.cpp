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

#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include <hshadow/shadow.hpp>
#include <hshadow/sim.hpp>

#include "oracles.hpp"

using namespace hshadow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Fixture {
    PovmSet povm;
    FrameOperator frame;
    InverseFrame inv;
    SnapshotTable table;
};

Fixture from_povm(PovmSet povm) {
    auto frame = frame_operator(povm);
    auto inv = invert_frame(frame, InversionMode::Strict);
    auto table = snapshots(povm, inv);
    return {std::move(povm), std::move(frame), std::move(inv), std::move(table)};
}

Fixture make_fixture(int n_max, int N, int M,
                     TailMode mode = TailMode::ExtendTails) {
    DesignOptions opts;
    opts.tail_mode = mode;
    return from_povm(build_povm(PhaseGrid(N), design_bins(n_max, N, M, opts).scheme, n_max));
}

/// sum_{i,k} P(i,k) rho_hat_{i,k} with P computed by explicit traces.
Matrix weighted_snapshot_sum(const Matrix &rho, const Fixture &f) {
    Matrix acc = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto &e : f.povm.elements()) {
        const double p = (rho * e.matrix).trace().real();
        acc += p * f.table.snapshot(e.i, e.k);
    }
    return acc;
}

} // namespace

TEST_CASE("scalar frame for n_max = 0", "[shadow]") {
    const std::vector<double> edges{-1.5, 0.0, 0.7, 2.0};
    const BinningScheme b(edges, TailMode::StrictFinite);
    const int N = 3;
    const auto povm = build_povm(PhaseGrid(N), b, 0);
    const auto frame = frame_operator(povm);
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double p = oracle::overlap00(edges[static_cast<std::size_t>(i)],
                                           edges[static_cast<std::size_t>(i + 1)]) / N;
        expected += N * p * p / b.weight(i);
    }
    CHECK_THAT(frame.matrix(0, 0).real(), WithinRel(expected, 1e-12));
}

TEST_CASE("doubling all weights halves the frame", "[shadow]") {
    const std::vector<double> edges{-2.0, -0.4, 0.9, 2.5};
    const BinningScheme b(edges, TailMode::ExtendTails);
    std::vector<double> w2;
    for (double w : b.weights()) {
        w2.push_back(2.0 * w);
    }
    const auto f1 = frame_operator(build_povm(PhaseGrid(5), b, 2));
    const auto f2 = frame_operator(build_povm(PhaseGrid(5), BinningScheme(edges, TailMode::ExtendTails, w2), 2));
    CHECK((f1.matrix - 2.0 * f2.matrix).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("frame is Hermitian PSD and self-adjoint", "[shadow]") {
    const auto f = make_fixture(3, 7, 5);
    CHECK(hermiticity_defect(f.frame.matrix) <= 1e-12);
    CHECK(f.frame.lambda_min() >= -1e-10);
    CHECK(f.frame.condition_number() >= 1.0);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = oracle::random_hermitian(4, rng);
        const auto b = oracle::random_hermitian(4, rng);
        const cplx lhs = (a.adjoint() * f.frame.apply(b)).trace();
        const cplx rhs = (f.frame.apply(a).adjoint() * b).trace();
        CHECK(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("strict inverse resolves the identity map", "[shadow]") {
    const auto f = make_fixture(3, 7, 5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            Matrix unit = Matrix::Zero(4, 4);
            unit(r, c) = 1.0;
            CHECK((f.inv.apply(f.frame.apply(unit)) - unit).norm() <= 1e-8);
        }
    }
}

TEST_CASE("invert_frame modes", "[shadow]") {
    FrameOperator id;
    id.matrix = Matrix::Identity(4, 4);
    id.eigenvalues = RealVector::Ones(4);
    id.eigenvectors = Matrix::Identity(4, 4);
    const auto inv = invert_frame(id, InversionMode::Strict);
    CHECK((inv.matrix - Matrix::Identity(4, 4)).norm() <= 1e-15);

    const auto povm = build_povm(PhaseGrid(4), BinningScheme::equal_spaced(6, 4.0, TailMode::ExtendTails, 0.25), 5);
    const auto frame = frame_operator(povm);
    CHECK_THROWS_AS(invert_frame(frame, InversionMode::Strict, 1e-12), SingularFrameError);
    const auto pinv = invert_frame(frame, InversionMode::Pseudo, 1e-10 * frame.lambda_max());
    CHECK(pinv.kept < 36);
    const Matrix ccc = frame.matrix * pinv.matrix * frame.matrix;
    CHECK((ccc - frame.matrix).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(parse_inversion_mode("pseudo") == InversionMode::Pseudo);
    CHECK_THROWS_AS(parse_inversion_mode("magic"), DomainError);
}

TEST_CASE("snapshots are Hermitian and unbiased", "[shadow]") {
    const auto f = make_fixture(3, 7, 5);
    for (const auto &s : f.table.all()) {
        CHECK(hermiticity_defect(s) <= 1e-10);
    }
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rho = oracle::random_state(4, rng);
        const auto sum = weighted_snapshot_sum(rho, f);
        CHECK((sum - rho).norm() <= 1e-8);
        double tr = 0.0;
        for (const auto &e : f.povm.elements()) {
            tr += (rho * e.matrix).trace().real() * f.table.snapshot(e.i, e.k).trace().real();
        }
        CHECK_THAT(tr, WithinAbs(1.0, 1e-8));
    }
}

TEST_CASE("unbiasedness holds for arbitrary positive weights", "[shadow]") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> uw(0.1, 5.0);
    const auto base = design_bins(2, 5, 4).scheme;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> w(4);
        for (auto &x : w) {
            x = uw(rng);
        }
        const auto f = from_povm(
            build_povm(PhaseGrid(5), BinningScheme(base.edges(), base.tail_mode(), w), 2));
        const auto rho = oracle::random_state(3, rng);
        CHECK((weighted_snapshot_sum(rho, f) - rho).norm() <= 1e-8);
    }
}

TEST_CASE("pseudo-inverse reconstruction is the row-space projection", "[shadow]") {
    const auto povm = build_povm(PhaseGrid(4), BinningScheme::equal_spaced(6, 4.0, TailMode::ExtendTails, 0.25), 5);
    const auto frame = frame_operator(povm);
    const double thr = 1e-10 * frame.lambda_max();
    const auto inv = invert_frame(frame, InversionMode::Pseudo, thr);
    const auto table = snapshots(povm, inv);
    // Projector onto eigenvectors with eigenvalue above the threshold.
    Matrix proj = Matrix::Zero(36, 36);
    for (Index j = 0; j < frame.eigenvalues.size(); ++j) {
        if (frame.eigenvalues(j) > thr) {
            proj += frame.eigenvectors.col(j) * frame.eigenvectors.col(j).adjoint();
        }
    }
    std::mt19937_64 rng(34);
    const auto rho = oracle::random_state(6, rng);
    Matrix acc = Matrix::Zero(6, 6);
    for (const auto &e : povm.elements()) {
        acc += (rho * e.matrix).trace().real() * table.snapshot(e.i, e.k);
    }
    const Matrix expected = devectorize(proj * vectorize(rho), 6);
    CHECK((acc - expected).norm() <= 1e-8);
    CHECK((acc - rho).norm() > 1e-3);
    // Null-space components of the observable do not change the values.
    Vector null_dir = Vector::Zero(36);
    for (Index j = 0; j < frame.eigenvalues.size(); ++j) {
        if (frame.eigenvalues(j) <= thr) {
            null_dir = frame.eigenvectors.col(j);
            break;
        }
    }
    const Matrix nd = devectorize(null_dir, 6);
    const auto x = number_operator(5);
    const auto x2 = make_observable(x.matrix + hermitize(nd), "n+null", 1e-12);
    const auto v1 = outcome_values(table, x);
    const auto v2 = outcome_values(table, x2);
    const Matrix hnd = hermitize(nd);
    const Vector hv = vectorize(hnd);
    const Vector proj_hv = proj * hv;
    if (proj_hv.norm() <= 1e-10) {
        for (std::size_t j = 0; j < v1.size(); ++j) {
            CHECK_THAT(v2[j], WithinAbs(v1[j], 1e-8));
        }
    }
}

TEST_CASE("estimate_observable aggregation", "[shadow]") {
    const auto f = make_fixture(2, 5, 3);
    const auto x = number_operator(2);
    std::vector<MeasurementRecord> same(50, MeasurementRecord{0, 0, 2, 1});
    for (std::size_t t = 0; t < same.size(); ++t) {
        same[t].t = t;
    }
    const auto rep = estimate_observable(same, f.table, x);
    CHECK_THAT(rep.mean, WithinAbs((x.matrix * f.table.snapshot(1, 2)).trace().real(), 1e-14));
    CHECK(rep.standard_error == 0.0);
    CHECK(rep.shots == 50);

    std::vector<MeasurementRecord> bad{{0, 0, 0, 0}, {1, 0, 5, 0}};
    try {
        estimate_observable(bad, f.table, x);
        FAIL("expected MalformedRecordError");
    } catch (const MalformedRecordError &e) {
        CHECK(e.ordinal == 1);
    }
    CHECK_THROWS_AS(estimate_observable(std::vector<MeasurementRecord>{}, f.table, x), DomainError);
    CHECK_THROWS_AS(estimate_observable(same, f.table, number_operator(3)), DomainError);
}

TEST_CASE("identity observable values are snapshot traces", "[shadow]") {
    const auto f = make_fixture(2, 5, 3);
    const auto v = outcome_values(f.table, identity_observable(2));
    for (const auto &e : f.povm.elements()) {
        CHECK_THAT(v[static_cast<std::size_t>(f.povm.index(e.i, e.k))],
                   WithinAbs(f.table.snapshot(e.i, e.k).trace().real(), 1e-13));
    }
    const auto rho = coherent(0.6, 2);
    const auto recs = sample(outcome_distribution(rho, f.povm), 200000, 5);
    const auto rep = estimate_observable(recs, f.table, identity_observable(2));
    CHECK(std::abs(rep.mean - 1.0) <= 5.0 * rep.standard_error + 1e-12);
}

TEST_CASE("summary statistics", "[shadow]") {
    const std::vector<double> xs{1.0, 2.0, 4.0, 8.0};
    const auto r = summarize(xs, "x", {}, true);
    CHECK_THAT(r.mean, WithinAbs(3.75, 1e-15));
    double ss = 0.0;
    for (double v : xs) {
        ss += (v - 3.75) * (v - 3.75);
    }
    CHECK_THAT(r.standard_error, WithinRel(std::sqrt(ss / 3.0) / 2.0, 1e-14));
    CHECK(r.values == xs);
    CHECK(summarize({7.0}, "x", {}, false).standard_error == 0.0);

    std::vector<double> ys;
    for (int j = 0; j < 100; ++j) {
        ys.push_back(j < 10 ? 1000.0 : 1.0);
    }
    const auto mom = summarize(ys, "y", parse_variant("median-of-means:10"), false);
    CHECK_THAT(mom.mean, WithinAbs(1.0, 1e-12));
    const auto plain = summarize(ys, "y", parse_variant("plain-mean"), false);
    CHECK_THAT(plain.mean, WithinAbs(100.9, 1e-12));
    CHECK(mom.standard_error == plain.standard_error);
    CHECK(parse_variant("median-of-means").batches == 10);
    CHECK(parse_variant("median-of-means:4").name() == "median-of-means:4");
    CHECK_THROWS_AS(parse_variant("median-of-means:0"), DomainError);
    CHECK_THROWS_AS(parse_variant("mean"), DomainError);
}

TEST_CASE("exact variance against brute-force sums", "[shadow]") {
    const auto f = make_fixture(3, 7, 5);
    std::mt19937_64 rng(35);
    const auto x = number_operator(3);
    const auto id = identity_observable(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto m = oracle::random_state(4, rng);
        const auto rho = make_density_matrix(m, 1e-12, 1e-10, 1e-10);
        for (const auto *obs : {&x, &id}) {
            long double s1 = 0.0L, s2 = 0.0L;
            for (const auto &e : f.povm.elements()) {
                const double p = (m * e.matrix).trace().real();
                const double v = (obs->matrix * f.table.snapshot(e.i, e.k)).trace().real();
                s1 += p * v;
                s2 += p * v * v;
            }
            const double brute = static_cast<double>(s2 - s1 * s1);
            CHECK_THAT(exact_variance(rho, *obs, f.table, f.povm), WithinAbs(brute, 1e-9 * std::max(1.0, brute)));
        }
        const auto x3 = make_observable(3.0 * x.matrix, "3n");
        CHECK_THAT(exact_variance(rho, x3, f.table, f.povm),
                   WithinRel(9.0 * exact_variance(rho, x, f.table, f.povm), 1e-10));
        CHECK(exact_variance(rho, x, f.table, f.povm) <= shadow_norm(x, f.table, f.povm) + 1e-9);
    }
}

TEST_CASE("shadow norm homogeneity and bound", "[shadow]") {
    for (int n_max = 1; n_max <= 3; ++n_max) {
        const int N = 2 * n_max + 1;
        const int M = n_max + 1;
        const auto f = make_fixture(n_max, N, M);
        const auto x = number_operator(n_max);
        const auto x2 = make_observable(-2.0 * x.matrix, "-2n");
        const double s = shadow_norm(x, f.table, f.povm);
        CHECK_THAT(shadow_norm(x2, f.table, f.povm), WithinRel(4.0 * s, 1e-10));
        CHECK(s <= variance_bound(N, M, n_max, x));
    }
}

TEST_CASE("variance bound formula", "[shadow]") {
    Matrix m = Matrix::Zero(6, 6);
    m(3, 3) = 1.0;
    const auto x = make_observable(m, "proj");
    CHECK(variance_bound(11, 6, 5, x) == 2376.0);
    CHECK(variance_bound(11, 12, 5, x) == 4.0 * 2376.0);
    CHECK(variance_bound(11, 6, 5, make_observable(Matrix::Zero(6, 6), "0")) == 0.0);
    CHECK_THROWS_AS(variance_bound(0, 6, 5, x), DomainError);
}

TEST_CASE("Bernstein sample count", "[shadow]") {
    CHECK(bernstein_samples(1.0, 0.1, 0.05) == 787);
    for (double eps : {0.05, 0.3, 1.0}) {
        for (double delta : {0.01, 0.2}) {
            const auto expected = static_cast<std::uint64_t>(
                std::ceil((4.0 / (3.0 * eps)) * std::log(2.0 / delta)));
            CHECK(bernstein_samples(0.0, eps, delta) == expected);
        }
    }
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> un(0.0, 100.0), ue(0.01, 1.0), ud(0.001, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const double s = un(rng), e = ue(rng), d = ud(rng);
        CHECK(bernstein_samples(s * 1.5, e, d) >= bernstein_samples(s, e, d));
        CHECK(bernstein_samples(s, e * 0.7, d) >= bernstein_samples(s, e, d));
        CHECK(bernstein_samples(s, e, d * 0.5) >= bernstein_samples(s, e, d));
    }
    CHECK_THROWS_AS(bernstein_samples(1.0, 0.0, 0.05), DomainError);
    CHECK_THROWS_AS(bernstein_samples(1.0, 0.1, 1.0), DomainError);
    CHECK_THROWS_AS(bernstein_samples(-1.0, 0.1, 0.5), DomainError);
}

TEST_CASE("state reconstruction", "[shadow]") {
    const auto f = make_fixture(3, 7, 5);
    const std::vector<MeasurementRecord> one{{0, 0, 3, 2}};
    CHECK((reconstruct_state(one, f.table) - f.table.snapshot(2, 3)).norm() == 0.0);
    CHECK_THROWS_AS(reconstruct_state(std::vector<MeasurementRecord>{}, f.table), DomainError);

    const auto rho = coherent(0.8, 3);
    const auto recs = sample(outcome_distribution(rho, f.povm), 100000, 77);
    const auto est = reconstruct_state(recs, f.table);
    CHECK(hermiticity_defect(est) <= 1e-12);
    CHECK((est - rho.matrix).norm() <= 0.1);
    const auto proj = reconstruct_state(recs, f.table, true);
    const auto ev = hermitian_eigenvalues(proj);
    CHECK(ev(0) >= -1e-12);
    CHECK_THAT(proj.trace().real(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("PSD projection leaves density matrices unchanged", "[shadow]") {
    std::mt19937_64 rng(37);
    const auto rho = oracle::random_state(5, rng);
    CHECK((project_to_density(rho) - rho).norm() <= 1e-12);
}
