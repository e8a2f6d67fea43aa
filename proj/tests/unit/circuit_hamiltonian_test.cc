// Copyright 2026 The fluxchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "fluxchain/circuit_hamiltonian.h"
#include "fluxchain/tunable_resonator.h"

namespace fluxchain {
namespace {

using cd = std::complex<double>;

NormalModeHamiltonian coupler_hamiltonian() {
    return load_hamiltonian_file(std::string(FLUXCHAIN_DATA_DIR) + "/normal_mode_coeffs.json");
}

NormalModeHamiltonian with_dims(NormalModeHamiltonian h, std::vector<int> dims) {
    for (size_t i = 0; i < dims.size(); ++i) h.modes[i].dim = dims[i];
    return h;
}

std::vector<double> dense_spectrum(const NormalModeHamiltonian &h, int k) {
    return eigensolve_lowest(assemble(h), k).eigenvalues;
}

TEST(ModeOps, TwoLevelClosedForm) {
    ModeOps m = build_mode_ops(2);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(m.theta(0, 1) - cd(r, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m.theta(1, 0) - cd(r, 0)), 0.0, 1e-15);
    EXPECT_EQ(m.theta(0, 0), cd(0, 0));
    // n = [[0, i/sqrt2], [-i/sqrt2, 0]] up to a global sign.
    double sign = m.n(0, 1).imag() > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(std::abs(m.n(0, 1) - sign * cd(0, r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m.n(1, 0) - sign * cd(0, -r)), 0.0, 1e-15);
}

TEST(ModeOps, OscillatorAndCanonicalPair) {
    for (int dim : {3, 7, 14}) {
        ModeOps m = build_mode_ops(dim);
        Eigen::MatrixXcd h = m.n * m.n + m.theta * m.theta;
        for (int k = 0; k + 1 < dim; ++k) EXPECT_NEAR(std::abs(h(k, k) - cd(2.0 * k + 1.0, 0)), 0.0, 1e-12);
        Eigen::MatrixXcd comm = m.theta * m.n - m.n * m.theta;
        double sign = comm(0, 0).imag() > 0 ? 1.0 : -1.0;
        for (int k = 0; k + 1 < dim; ++k) EXPECT_NEAR(std::abs(comm(k, k) - sign * cd(0, 1)), 0.0, 1e-12);
        EXPECT_NEAR(hermiticity_residual(m.theta), 0.0, 1e-15);
        EXPECT_NEAR(hermiticity_residual(m.n), 0.0, 1e-15);
    }
}

TEST(Assemble, HarmonicSpectrumExact) {
    NormalModeHamiltonian h;
    h.c0 = 1746.021;
    h.modes = {{3.138, 14}};
    auto e = dense_spectrum(h, 14);
    for (int k = 0; k < 14; ++k) EXPECT_NEAR(e[k], 1746.021 + 3.138 * (2 * k + 1), 1e-10) << k;
}

TEST(Assemble, TwoModeHarmonicMatchesClosedForm) {
    NormalModeHamiltonian h;
    h.c0 = 1.0;
    h.modes = {{3.138, 8}, {5.331, 5}};
    std::vector<double> oracle;
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 5; ++b) oracle.push_back(1.0 + 3.138 * (2 * a + 1) + 5.331 * (2 * b + 1));
    std::sort(oracle.begin(), oracle.end());
    auto e = dense_spectrum(h, 20);
    for (int k = 0; k < 20; ++k) EXPECT_NEAR(e[k], oracle[k], 1e-10);
}

TEST(Assemble, CouplerDimensionAndHermiticity) {
    NormalModeHamiltonian h = coupler_hamiltonian();
    EXPECT_EQ(h.total_dim(), 2352u);
    Eigen::MatrixXcd m = assemble(h);
    EXPECT_EQ(m.rows(), 2352);
    EXPECT_LT(hermiticity_residual(m), 1e-12);
}

TEST(Assemble, ZeroExponentIsScalar) {
    NormalModeHamiltonian h;
    h.c0 = 2.0;
    h.modes = {{1.0, 4}, {2.0, 3}};
    cd amp(0.7, -0.3);
    NormalModeHamiltonian g = h;
    g.terms = {{amp, {0.0, 0.0}}};
    Eigen::MatrixXcd diff = assemble(g) - assemble(h);
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Identity(12, 12) * (amp + std::conj(amp));
    EXPECT_LT((diff - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assemble, HermitianForRandomTerms) {
    std::srand(3);
    for (int trial = 0; trial < 10; ++trial) {
        NormalModeHamiltonian h;
        h.c0 = 10.0 * trial;
        h.modes = {{1.0 + trial, 3 + trial % 3}, {2.5, 4}, {0.3, 2}};
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d b = Eigen::Vector3d::Random();
            Eigen::Vector2d a = Eigen::Vector2d::Random() * 100.0;
            h.terms.push_back({cd(a[0], a[1]), {b[0], b[1], b[2]}});
        }
        EXPECT_LT(hermiticity_residual(assemble(h)), 1e-12);
    }
}

TEST(Assemble, ModeReorderingInvariance) {
    NormalModeHamiltonian h = with_dims(coupler_hamiltonian(), {6, 4, 3, 3, 2});
    std::vector<int> perm = {3, 0, 4, 2, 1};
    NormalModeHamiltonian p = h;
    for (size_t i = 0; i < perm.size(); ++i) p.modes[i] = h.modes[perm[i]];
    for (size_t j = 0; j < h.terms.size(); ++j)
        for (size_t i = 0; i < perm.size(); ++i) p.terms[j].b[i] = h.terms[j].b[perm[i]];
    auto a = dense_spectrum(h, 14), b = dense_spectrum(p, 14);
    for (int k = 0; k < 14; ++k) EXPECT_NEAR(a[k], b[k], 1e-9) << k;
}

TEST(Assemble, SingleModeExponentialMatchesOracle) {
    // One real exponential acting on mode 1 only; the other modes are
    // harmonic, so the spectrum is an oracle single-mode spectrum plus sums.
    NormalModeHamiltonian h;
    h.c0 = 5.0;
    h.modes = {{3.0, 3}, {2.0, 9}, {7.0, 2}};
    const double amp = -4.5, b = 0.7;
    h.terms = {{cd(amp, 0.0), {0.0, b, 0.0}}};

    ModeOps ops = build_mode_ops(9);
    Eigen::MatrixXcd e = (cd(0, b) * ops.theta).exp();
    Eigen::MatrixXcd single = amp * (e + e.adjoint());
    for (int k = 0; k < 9; ++k) single(k, k) += 2.0 * (2 * k + 1);
    Eigen::MatrixXcd id3 = Eigen::MatrixXcd::Identity(3, 3), id2 = Eigen::MatrixXcd::Identity(2, 2);
    Eigen::MatrixXcd d3 = Eigen::MatrixXcd::Zero(3, 3), d2 = Eigen::MatrixXcd::Zero(2, 2);
    for (int k = 0; k < 3; ++k) d3(k, k) = 3.0 * (2 * k + 1);
    for (int k = 0; k < 2; ++k) d2(k, k) = 7.0 * (2 * k + 1);
    Eigen::MatrixXcd id9 = Eigen::MatrixXcd::Identity(9, 9);
    auto kron3 = [](const Eigen::MatrixXcd &x, const Eigen::MatrixXcd &y, const Eigen::MatrixXcd &z) {
        Eigen::MatrixXcd xy = Eigen::kroneckerProduct(x, y);
        Eigen::MatrixXcd xyz = Eigen::kroneckerProduct(xy, z);
        return xyz;
    };
    Eigen::MatrixXcd oracle = kron3(d3, id9, id2) + kron3(id3, single, id2) + kron3(id3, id9, d2);
    oracle += 5.0 * Eigen::MatrixXcd::Identity(54, 54);
    auto want = eigensolve_lowest(oracle, 20).eigenvalues;
    auto got = dense_spectrum(h, 20);
    for (int k = 0; k < 20; ++k) EXPECT_NEAR(got[k], want[k], 1e-10) << k;
}

TEST(Eigensolve, TwoByTwo) {
    Eigen::MatrixXcd m(2, 2);
    m << 0, 1, 1, 0;
    auto e = eigensolve_lowest(m, 2).eigenvalues;
    EXPECT_NEAR(e[0], -1.0, 1e-15);
    EXPECT_NEAR(e[1], 1.0, 1e-15);
    EXPECT_THROW(eigensolve_lowest(m, 3), Error);
}

TEST(Eigensolve, IterativeAgreesWithDense) {
    NormalModeHamiltonian h = with_dims(coupler_hamiltonian(), {8, 5, 3, 3, 2});
    auto dense = dense_spectrum(h, 14);
    auto iter = eigensolve_lowest_iterative(KroneckerOperator(h), 14);
    for (int k = 0; k < 14; ++k) EXPECT_NEAR(iter[k], dense[k], 1e-9) << k;
}

TEST(Eigensolve, KroneckerOperatorMatchesMatrix) {
    NormalModeHamiltonian h = with_dims(coupler_hamiltonian(), {4, 3, 2, 3, 2});
    Eigen::MatrixXcd m = assemble(h);
    KroneckerOperator op(h);
    ASSERT_EQ(op.dim(), static_cast<size_t>(m.rows()));
    Eigen::VectorXcd x = Eigen::VectorXcd::Random(m.rows()), y(m.rows());
    op.apply(x.data(), y.data());
    EXPECT_LT((y - m * x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Eigensolve, TruncationIsVariational) {
    // Lowest levels should not rise as every truncation dimension grows.
    NormalModeHamiltonian h = with_dims(coupler_hamiltonian(), {6, 3, 2, 2, 2});
    std::vector<std::vector<double>> levels;
    for (int by = 0; by <= 2; ++by) levels.push_back(dense_spectrum(h.escalated(by), 14));
    for (int by = 1; by <= 2; ++by) {
        for (int k = 0; k < 14; ++k) {
            EXPECT_LE(levels[by][k], levels[by - 1][k] + 1e-9) << "escalation " << by << " level " << k;
        }
    }
}

TEST(Hamiltonian, JsonRoundTripAndErrors) {
    NormalModeHamiltonian h = coupler_hamiltonian();
    NormalModeHamiltonian r = load_hamiltonian(serialize_hamiltonian(h));
    EXPECT_EQ(r.c0, h.c0);
    ASSERT_EQ(r.modes.size(), h.modes.size());
    ASSERT_EQ(r.terms.size(), h.terms.size());
    EXPECT_EQ(r.terms[0].amp, h.terms[0].amp);
    EXPECT_EQ(r.terms[2].b, h.terms[2].b);
    EXPECT_THROW(load_hamiltonian(R"({"modes": []})"), Error);
    EXPECT_THROW(load_hamiltonian(R"({"c0": 1, "modes": [{"a": 1, "dim": 0}]})"), Error);
    EXPECT_THROW(load_hamiltonian(R"({"c0": 1, "modes": [{"a": 1, "dim": 2}], "terms": [{"re": 1, "im": 0, "b": [1, 2]}]})"), Error);
}

std::vector<double> detunings_ghz() {
    std::vector<double> d;
    for (int i = 0; i <= 200; ++i) d.push_back(-0.5 + i * 0.005);
    return d;
}

TEST(AntiCrossing, RecoversCoupling) {
    auto d = detunings_ghz();
    for (double g : {0.0098, 0.02, 0.003}) {
        AntiCrossing a = anticrossing_gap(synthetic_two_mode_sweep(g, 6.46, d));
        EXPECT_NEAR(a.g, g, 0.1e-3) << g;
        EXPECT_NEAR(a.gap, 2.0 * a.g, 1e-15);
        EXPECT_NEAR(a.phi_min, 0.0, 0.005);
    }
}

TEST(AntiCrossing, ClosedFormSplitting) {
    // Two-level family with splitting sqrt(delta^2 + 4 g^2).
    const double g = 0.0098;
    std::vector<FluxSpectrum> s;
    for (double det : detunings_ghz()) {
        double half = 0.5 * std::sqrt(det * det + 4 * g * g);
        s.push_back({det, {-10.0, 3.0 - half, 3.0 + half}});
    }
    AntiCrossing a = anticrossing_gap(s);
    EXPECT_NEAR(a.g, g, 0.1e-3);
}

TEST(AntiCrossing, NoCouplingReportsBound) {
    auto d = detunings_ghz();
    try {
        anticrossing_gap(synthetic_two_mode_sweep(0.0, 6.46, d));
        FAIL();
    } catch (const NoAntiCrossing &e) {
        EXPECT_NE(std::string(e.what()).find("no anti-crossing detected"), std::string::npos);
        EXPECT_GT(e.g_bound(), 0.0);
        EXPECT_LE(e.g_bound(), 0.005);
    }
    // A gap below one resolution quantum is an upper bound, not a value.
    try {
        anticrossing_gap(synthetic_two_mode_sweep(5e-6, 6.46, d));
        FAIL();
    } catch (const NoAntiCrossing &e) {
        EXPECT_EQ(e.g_bound(), 18.8e-6);
    }
}

TEST(Purcell, Values) {
    double kappa = decay_rate(6.46e9, 720.0).kappa;
    EXPECT_TRUE(std::isinf(purcell_t1(0.0, 200e6, kappa)));
    EXPECT_NEAR(purcell_t1(9.8e6, 200e6, kappa), 7.4e-6, 0.05e-6);
    EXPECT_NEAR(purcell_t1(9.8e6, 40e6, kappa), 0.30e-6, 0.01e-6);
    EXPECT_NEAR(purcell_t1(9.8e6, -40e6, kappa), purcell_t1(9.8e6, 40e6, kappa), 1e-18);
    EXPECT_THROW(purcell_t1(9.8e6, 0.0, kappa), Error);
}

TEST(Purcell, Combined) {
    EXPECT_EQ(combined_t1(1.77e-6, std::numeric_limits<double>::infinity()), 1.77e-6);
    EXPECT_NEAR(combined_t1(2e-6, 2e-6), 1e-6, 1e-21);
    EXPECT_NEAR(combined_t1(1.77e-6, 7.4e-6), 1.43e-6, 0.005e-6);
    for (double a : {1e-7, 1e-6, 1e-5})
        for (double b : {3e-7, 3e-6, 3e-5}) EXPECT_LE(combined_t1(a, b), std::min(a, b));
}

}  // namespace
}  // namespace fluxchain
