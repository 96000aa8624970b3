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
#include <numbers>
#include <random>

#include <catch_amalgamated.hpp>

#include <hshadow/povm.hpp>
#include <hshadow/shadow.hpp>

#include "oracles.hpp"

using namespace hshadow;
using Catch::Matchers::WithinAbs;

namespace {

BinningScheme symmetric_pair(TailMode mode) { return {{-4.0, 0.0, 4.0}, mode}; }

std::vector<oracle::Matrix> closed_form_elements(const std::vector<double> &edges,
                                                 int phases, TailMode mode) {
    std::vector<oracle::Matrix> out;
    const int M = static_cast<int>(edges.size()) - 1;
    for (int k = 0; k < phases; ++k) {
        for (int i = 0; i < M; ++i) {
            double a = edges[static_cast<std::size_t>(i)];
            double b = edges[static_cast<std::size_t>(i + 1)];
            if (mode == TailMode::ExtendTails) {
                a = i == 0 ? -INFINITY : a;
                b = i == M - 1 ? INFINITY : b;
            }
            out.push_back(oracle::element_nmax1(a, b, k, phases));
        }
    }
    return out;
}

} // namespace

TEST_CASE("phase grid spacing", "[povm]") {
    PhaseGrid g(4);
    CHECK(g.size() == 4);
    CHECK_THAT(g.theta(1), WithinAbs(std::numbers::pi / 2, 1e-15));
    CHECK_THROWS_AS(PhaseGrid(0), DomainError);
}

TEST_CASE("binning scheme validation", "[povm]") {
    CHECK_THROWS_AS(BinningScheme({0.0, 0.0}, TailMode::ExtendTails), DomainError);
    CHECK_THROWS_AS(BinningScheme({1.0, 0.0}, TailMode::ExtendTails), DomainError);
    CHECK_THROWS_AS(BinningScheme({0.0, INFINITY}, TailMode::StrictFinite), DomainError);
    CHECK_THROWS_AS(BinningScheme({0.0, 1.0}, TailMode::StrictFinite, {-1.0}), DomainError);
    CHECK_THROWS_AS(BinningScheme({0.0, 1.0, 2.0}, TailMode::StrictFinite, {1.0}), DomainError);
    BinningScheme b({-1.0, 0.5, 2.0}, TailMode::ExtendTails);
    CHECK(b.weights() == std::vector<double>{1.5, 1.5});
    CHECK(std::isinf(b.interval(0).first));
    CHECK(std::isinf(b.interval(1).second));
    const auto e = BinningScheme::equal_spaced(4, 2.0, TailMode::StrictFinite, 0.0);
    CHECK(e.edges() == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
    CHECK(parse_tail_mode("strict-finite") == TailMode::StrictFinite);
    CHECK_THROWS_AS(parse_tail_mode("open"), DomainError);
}

TEST_CASE("vacuum entry of every element is the Gaussian bin mass over N", "[povm]") {
    const std::vector<double> edges{-2.5, -0.7, 0.1, 1.9, 3.3};
    const int N = 5;
    const auto povm = build_povm(PhaseGrid(N), BinningScheme(edges, TailMode::StrictFinite), 3);
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < 4; ++i) {
            const double mass = oracle::overlap00(edges[static_cast<std::size_t>(i)],
                                                  edges[static_cast<std::size_t>(i + 1)]);
            const auto v = povm.element(i, k).matrix(0, 0);
            CHECK_THAT(v.real(), WithinAbs(mass / N, 1e-13));
            CHECK_THAT(v.imag(), WithinAbs(0.0, 1e-15));
        }
    }
}

TEST_CASE("phase factor on off-diagonal entries", "[povm]") {
    const auto povm = build_povm(PhaseGrid(4), BinningScheme({0.0, 1.0}, TailMode::StrictFinite), 1);
    const double real_integral = oracle::overlap01(0.0, 1.0) / 4.0;
    const auto v = povm.element(0, 1).matrix(0, 1);
    CHECK_THAT(v.real(), WithinAbs(0.0, 1e-15));
    CHECK_THAT(v.imag(), WithinAbs(-real_integral, 1e-13));
}

TEST_CASE("n_max = 1 elements match closed forms", "[povm]") {
    const std::vector<double> edges{-1.2, 0.3, 2.0};
    for (auto mode : {TailMode::StrictFinite, TailMode::ExtendTails}) {
        const auto povm = build_povm(PhaseGrid(3), BinningScheme(edges, mode), 1);
        const auto ref = closed_form_elements(edges, 3, mode);
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < 2; ++i) {
                const auto &m = povm.element(i, k).matrix;
                CHECK((m - ref[static_cast<std::size_t>(k * 2 + i)]).cwiseAbs().maxCoeff() <= 1e-12);
            }
        }
    }
}

TEST_CASE("elements are Hermitian, PSD and bounded by I/N", "[povm]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ux(-5.0, 5.0);
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<double> edges(5);
        for (auto &e : edges) {
            e = ux(rng);
        }
        std::sort(edges.begin(), edges.end());
        const int N = 3 + trial;
        const auto povm = build_povm(PhaseGrid(N), BinningScheme(edges, TailMode::ExtendTails), 4);
        for (const auto &e : povm.elements()) {
            CHECK(hermiticity_defect(e.matrix) <= 1e-14);
            const auto ev = hermitian_eigenvalues(e.matrix);
            CHECK(ev(0) >= -1e-10);
            CHECK(ev(ev.size() - 1) <= 1.0 / N + 1e-10);
        }
    }
}

TEST_CASE("extend-tails elements resolve I/N at every phase", "[povm]") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    for (int trial = 0; trial < 8; ++trial) {
        std::vector<double> edges(2 + trial);
        for (auto &e : edges) {
            e = ux(rng);
        }
        std::sort(edges.begin(), edges.end());
        const auto povm = build_povm(PhaseGrid(2 + trial), BinningScheme(edges, TailMode::ExtendTails), 6);
        for (double r : normalization_residual(povm)) {
            CHECK(r <= 1e-10);
        }
    }
}

TEST_CASE("strict-finite normalization residual", "[povm]") {
    const int N = 3;
    const auto povm = build_povm(PhaseGrid(N), BinningScheme({-1.0, 1.0}, TailMode::StrictFinite), 0);
    for (double r : normalization_residual(povm)) {
        CHECK_THAT(r, WithinAbs((1.0 - std::erf(1.0)) / N, 1e-12));
    }
    double prev = INFINITY;
    for (double L : {2.0, 4.0, 6.0}) {
        const auto p = build_povm(PhaseGrid(5),
                                  BinningScheme::equal_spaced(6, L, TailMode::StrictFinite), 4);
        const auto res = normalization_residual(p);
        const double worst = *std::max_element(res.begin(), res.end());
        CHECK(worst < prev);
        prev = worst;
    }
}

TEST_CASE("measurement matrix layout", "[povm]") {
    const auto povm = build_povm(PhaseGrid(3), BinningScheme({-1.0, 0.2, 1.5}, TailMode::ExtendTails), 2);
    const auto mm = measurement_matrix(povm);
    REQUIRE(mm.E.rows() == 9);
    REQUIRE(mm.E.cols() == 6);
    std::vector<oracle::Matrix> elems;
    for (const auto &e : povm.elements()) {
        elems.push_back(e.matrix);
    }
    CHECK((mm.E - oracle::stack_columns(elems)).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 2; ++i) {
            const auto col = mm.E.col(povm.index(i, k));
            CHECK((devectorize(col, 3) - povm.element(i, k).matrix).norm() == 0.0);
        }
    }
    std::mt19937_64 rng(23);
    const auto a = oracle::random_hermitian(4, rng);
    CHECK((devectorize(vectorize(a), 4) - a).norm() == 0.0);
}

TEST_CASE("n_max = 0 measurement matrix holds vacuum bin probabilities", "[povm]") {
    const std::vector<double> edges{-1.0, 0.0, 0.5};
    const auto povm = build_povm(PhaseGrid(2), BinningScheme(edges, TailMode::StrictFinite), 0);
    const auto mm = measurement_matrix(povm);
    REQUIRE(mm.E.rows() == 1);
    REQUIRE(mm.E.cols() == 4);
    CHECK(mm.rank == 1);
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 2; ++i) {
            CHECK_THAT(mm.E(0, povm.index(i, k)).real(),
                       WithinAbs(oracle::overlap00(edges[static_cast<std::size_t>(i)],
                                                   edges[static_cast<std::size_t>(i + 1)]) / 2, 1e-13));
        }
    }
}

TEST_CASE("numerical rank of simple matrices", "[povm]") {
    CHECK(numerical_rank(Matrix::Zero(3, 4)).rank == 0);
    for (int d : {1, 3, 7}) {
        CHECK(numerical_rank(Matrix::Identity(d, d)).rank == d);
    }
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 1.0;
    m(1, 1) = 1e-13;
    CHECK(numerical_rank(m).rank == 1);
}

TEST_CASE("symmetric two-bin n_max = 1 scheme has the oracle rank", "[povm]") {
    const std::vector<double> edges{-4.0, 0.0, 4.0};
    const auto ref = oracle::stack_columns(closed_form_elements(edges, 3, TailMode::StrictFinite));
    const int oracle_rank = oracle::svd_rank(ref);
    CHECK(oracle_rank == 3);
    const auto povm = build_povm(PhaseGrid(3), symmetric_pair(TailMode::StrictFinite), 1);
    CHECK(measurement_matrix(povm).rank == oracle_rank);
    const auto ic = is_informationally_complete(povm);
    CHECK(ic.rank == oracle_rank);
    CHECK(ic.complete == (oracle_rank == 4));
}

TEST_CASE("shifted two-bin n_max = 1 scheme is complete", "[povm]") {
    const std::vector<double> edges{-3.0, 0.5, 4.0};
    const auto ref = oracle::stack_columns(closed_form_elements(edges, 3, TailMode::StrictFinite));
    CHECK(oracle::svd_rank(ref) == 4);
    const auto povm = build_povm(PhaseGrid(3), BinningScheme(edges, TailMode::StrictFinite), 1);
    CHECK(is_informationally_complete(povm).complete);
}

TEST_CASE("too few phases is never complete", "[povm]") {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> ux(-5.0, 5.0);
    for (int N : {4, 5, 8}) {
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<double> edges(8);
            for (auto &e : edges) {
                e = ux(rng);
            }
            std::sort(edges.begin(), edges.end());
            const auto povm = build_povm(PhaseGrid(N), BinningScheme(edges, TailMode::ExtendTails), 5);
            const auto ic = is_informationally_complete(povm);
            CHECK_FALSE(ic.complete);
            CHECK(ic.rank < 36);
        }
    }
}

TEST_CASE("necessary condition false implies incomplete over random binnings", "[povm]") {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> ux(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n_max = 1 + static_cast<int>(rng() % 4);
        const int N = 1 + static_cast<int>(rng() % (2 * n_max));
        if (necessary_condition(N, n_max)) {
            continue;
        }
        std::vector<double> edges(2 + rng() % 9);
        for (auto &e : edges) {
            e = ux(rng);
        }
        std::sort(edges.begin(), edges.end());
        if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
            continue;
        }
        const auto povm = build_povm(PhaseGrid(N), BinningScheme(edges, TailMode::ExtendTails), n_max);
        CHECK_FALSE(is_informationally_complete(povm).complete);
    }
}

TEST_CASE("sufficient and necessary conditions", "[povm]") {
    CHECK(sufficient_condition(11, 6, 5));
    CHECK(sufficient_condition(3, 2, 1));
    CHECK_FALSE(sufficient_condition(10, 6, 5));
    CHECK_FALSE(sufficient_condition(11, 5, 5));
    CHECK_FALSE(necessary_condition(5, 5));
    CHECK_FALSE(necessary_condition(8, 5));
    CHECK(necessary_condition(7, 5));
    CHECK(necessary_condition(11, 5));
}

TEST_CASE("design_bins finds complete schemes", "[povm]") {
    DesignOptions opts;
    opts.initial_range = 1.0;
    const auto small = design_bins(1, 3, 2, opts);
    CHECK(small.report.rank == 4);
    CHECK(small.range >= 1.0);
    CHECK(small.scheme.bins() == 2);
    const double width = small.range;
    CHECK_THAT(small.scheme.edges()[1], WithinAbs(-small.range + width * 1.25, 1e-12));

    opts.initial_range = 3.0;
    const auto big = design_bins(5, 11, 6, opts);
    CHECK(big.report.rank == 36);
    const auto povm = build_povm(PhaseGrid(11), big.scheme, 5);
    CHECK(is_informationally_complete(povm).complete);
}

TEST_CASE("design_bins reports exhaustion", "[povm]") {
    DesignOptions opts;
    opts.initial_range = 3.0;
    opts.max_iter = 10;
    try {
        design_bins(5, 4, 6, opts);
        FAIL("expected DesignError");
    } catch (const DesignError &e) {
        CHECK(e.best_rank < 36);
        CHECK(e.target_rank == 36);
        CHECK_THAT(e.final_range, WithinAbs(3.0 + 10 * 0.5, 1e-12));
    }
}

TEST_CASE("design_bins rejects invalid options", "[povm]") {
    DesignOptions opts;
    opts.range_step = 0.0;
    CHECK_THROWS_AS(design_bins(1, 3, 2, opts), DomainError);
    opts = {};
    opts.max_iter = -1;
    CHECK_THROWS_AS(design_bins(1, 3, 2, opts), DomainError);
}

TEST_CASE("frame quadratic form on unit-trace directions", "[povm]") {
    // <rho|C|rho> >= (Tr rho)^2 / (N L_total) for every Hilbert-Schmidt
    // normalised rho; lambda_min itself can be smaller (traceless directions).
    std::mt19937_64 rng(26);
    for (int n_max = 1; n_max <= 4; ++n_max) {
        const int N = 2 * n_max + 1;
        const auto design = design_bins(n_max, N, n_max + 1,
                                        {0.0, 0.5, 100, TailMode::StrictFinite, 1e-10});
        const auto povm = build_povm(PhaseGrid(N), design.scheme, n_max);
        const auto frame = frame_operator(povm);
        const double L_total = design.scheme.total_weight();
        for (int trial = 0; trial < 10; ++trial) {
            Matrix rho = trial % 2 ? oracle::random_state(n_max + 1, rng)
                                   : oracle::random_hermitian(n_max + 1, rng);
            rho /= rho.norm();
            const Vector v = vectorize(rho);
            const double q = (v.adjoint() * frame.matrix * v)(0, 0).real();
            const double tr = rho.trace().real();
            CHECK(q >= tr * tr / (N * L_total) - 1e-12);
        }
    }
}

TEST_CASE("cache key depends on every defining parameter", "[povm]") {
    const std::vector<double> e{-1.0, 0.0, 1.0};
    const auto k = povm_cache_key(2, 5, e, TailMode::ExtendTails);
    CHECK(k.size() == 16);
    CHECK(k == povm_cache_key(2, 5, e, TailMode::ExtendTails));
    CHECK(k != povm_cache_key(3, 5, e, TailMode::ExtendTails));
    CHECK(k != povm_cache_key(2, 6, e, TailMode::ExtendTails));
    CHECK(k != povm_cache_key(2, 5, e, TailMode::StrictFinite));
    CHECK(k != povm_cache_key(2, 5, {-1.0, std::nextafter(0.0, 1.0), 1.0}, TailMode::ExtendTails));
}
