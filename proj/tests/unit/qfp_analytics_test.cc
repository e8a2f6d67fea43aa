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

#include <cmath>
#include <random>

#include "fluxchain/qfp_analytics.h"

namespace fluxchain {
namespace {

const DeviceParams kDev = reference_device();

std::vector<SCurveSample> binomial_samples(double center, double w, long trials, uint64_t seed, int n = 41) {
    std::mt19937_64 rng(seed);
    std::vector<SCurveSample> s;
    for (int i = 0; i < n; ++i) {
        double phi = center - 8e-3 + 16e-3 * i / (n - 1);
        std::binomial_distribution<long> b(trials, scurve_prob(phi, center, w));
        s.push_back({phi, b(rng), trials});
    }
    return s;
}

TEST(BetaL, ReferenceValues) {
    EXPECT_NEAR(beta_l(kDev, 0.0), 2.50, 0.01);
    EXPECT_EQ(beta_l(kDev, 0.5), 0.0);
    EXPECT_NEAR(beta_l(kDev, 1.0), -2.50, 0.01);
}

TEST(BetaL, EvenPeriodicAndZeroAtOddHalves) {
    for (double x = -2.0; x <= 2.0; x += 0.0625) {
        EXPECT_NEAR(beta_l(kDev, x), beta_l(kDev, -x), 1e-12);
        EXPECT_NEAR(beta_l(kDev, x), beta_l(kDev, x + 2.0), 1e-12);
    }
    for (double x : {-1.5, -0.5, 0.5, 1.5, 2.5}) EXPECT_EQ(beta_l(kDev, x), 0.0) << x;
}

TEST(Susceptibility, Values) {
    EXPECT_EQ(susceptibility(kDev, 0.0), 0.0);
    EXPECT_NEAR(susceptibility(kDev, 2.5), 1.717e9, 1e6);
    EXPECT_NEAR(susceptibility(kDev, 1e12), 2.404e9, 1e6);
    EXPECT_THROW(susceptibility(kDev, -1.0), Error);
}

TEST(EffectiveMutual, ValuesAndLinearity) {
    EXPECT_EQ(effective_mutual(kDev, 0.0), 0.0);
    EXPECT_NEAR(effective_mutual(kDev, 1.717e9), 7.25e-12, 0.01e-12);
    DeviceParams d = kDev;
    d.m_qub_qfp *= 2.0;
    EXPECT_DOUBLE_EQ(effective_mutual(d, 1.717e9), 2.0 * effective_mutual(kDev, 1.717e9));
}

TEST(EffectiveMutual, MonotoneInBeta) {
    double prev = -1.0;
    for (double b = 0.0; b <= beta_l(kDev, 0.0); b += 0.01) {
        double m = effective_mutual(kDev, susceptibility(kDev, b));
        EXPECT_GT(m, prev);
        prev = m;
    }
}

TEST(QubitFluxSignal, Values) {
    EXPECT_NEAR(qubit_flux_signal(kDev) * 1e3, 10.69, 0.01);
    DeviceParams d = kDev;
    d.ip_qub = 0.0;
    EXPECT_EQ(qubit_flux_signal(d), 0.0);
    d = kDev;
    d.m_qub_qfp = 104e-12;
    EXPECT_NEAR(qubit_flux_signal(d) * 1e3, 17.1, 0.05);
}

TEST(SCurveProb, Values) {
    EXPECT_EQ(scurve_prob(0.3, 0.3, 1e-3), 0.5);
    for (double x : {1e-4, 1e-3, 3e-3}) EXPECT_NEAR(scurve_prob(x, 0.0, 1.4e-3) + scurve_prob(-x, 0.0, 1.4e-3), 1.0, 1e-15);
    EXPECT_NEAR(scurve_prob(2.8e-3, 0.0, 1.4e-3), 0.0180, 5e-5);
    EXPECT_GT(scurve_prob(-1e-3, 0.0, 1e-3), scurve_prob(1e-3, 0.0, 1e-3));
}

TEST(FitSCurve, NoiselessRoundTrip) {
    // Probabilities exact, encoded with a large trial count.
    std::vector<SCurveSample> s;
    const long trials = 1L << 52;
    for (int i = 0; i < 41; ++i) {
        double phi = -6e-3 + 12e-3 * i / 40;
        s.push_back({phi, static_cast<long>(std::llround(static_cast<double>(trials) * scurve_prob(phi, 0.0, 1.38e-3))), trials});
    }
    SCurveFit f = fit_scurve(s);
    EXPECT_NEAR(f.center, 0.0, 1e-6 * 1.38e-3);
    EXPECT_NEAR(f.width, 1.38e-3, 1e-6 * 1.38e-3);
}

TEST(FitSCurve, BinomialWithinThreeSigma) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        SCurveFit f = fit_scurve(binomial_samples(0.0, 1.42e-3, 1000, seed));
        EXPECT_LT(std::abs(f.width - 1.42e-3), 3.0 * f.width_sigma) << seed;
        EXPECT_LT(std::abs(f.center), 3.0 * f.center_sigma) << seed;
    }
}

TEST(FitSCurve, Deterministic) {
    auto s = binomial_samples(1e-3, 1.4e-3, 1000, 9);
    SCurveFit a = fit_scurve(s), b = fit_scurve(s);
    EXPECT_EQ(a.center, b.center);
    EXPECT_EQ(a.width, b.width);
    EXPECT_EQ(a.width_sigma, b.width_sigma);
}

TEST(FitSCurve, ConsistentAsTrialsGrow) {
    double prev_err = 1.0;
    for (long trials : {100L, 1000L, 10000L}) {
        double err = 0.0;
        for (uint64_t seed = 0; seed < 20; ++seed) {
            SCurveFit f = fit_scurve(binomial_samples(0.0, 1.4e-3, trials, 100 + seed));
            err += std::abs(f.width - 1.4e-3) + std::abs(f.center);
        }
        EXPECT_LT(err, prev_err) << trials;
        prev_err = err;
    }
}

TEST(FitSCurve, DegenerateAndInvalid) {
    std::vector<SCurveSample> flat;
    for (int i = 0; i < 10; ++i) flat.push_back({i * 1e-3, 500, 1000});
    try {
        fit_scurve(flat);
        FAIL();
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("width unidentifiable"), std::string::npos);
    }
    std::vector<SCurveSample> few = {{0, 1, 2}, {1e-3, 1, 2}, {2e-3, 0, 2}};
    EXPECT_THROW(fit_scurve(few), Error);
    std::vector<SCurveSample> bad = {{0, 3, 2}, {1e-3, 1, 2}, {2e-3, 0, 2}, {3e-3, 0, 2}};
    EXPECT_THROW(fit_scurve(bad), Error);
}

SCurveFit ideal(double c, double w) { return SCurveFit{c, w, 0.0, 0.0, 0.0}; }

TEST(SeparationFidelity, MeasuredDevice) {
    SeparationReport r = separation_fidelity(ideal(-5.36e-3, 1.38e-3), ideal(5.36e-3, 1.42e-3));
    EXPECT_NEAR(r.f_sep_max, 0.9991, 0.0001);
    EXPECT_NEAR(r.ratio, 7.65, 0.05);
    EXPECT_NEAR(r.delta_phi_qub, 10.72e-3, 1e-12);
    EXPECT_FALSE(r.f_sep_curve.empty());
}

TEST(SeparationFidelity, Limits) {
    EXPECT_NEAR(separation_fidelity(ideal(1e-3, 1.4e-3), ideal(1e-3, 1.4e-3)).f_sep_max, 0.0, 1e-15);
    EXPECT_NEAR(separation_fidelity(ideal(-1e-3, 1e-9), ideal(1e-3, 1e-9)).f_sep_max, 1.0, 1e-12);
}

TEST(SeparationFidelity, RequiredRatioRoundTrip) {
    for (double f : {0.51, 0.7, 0.9, 0.99, 0.9991, 0.99999, 1.0 - 1e-8}) {
        double ratio = required_ratio(f);
        double w = 1.4e-3;
        SeparationReport r = separation_fidelity(ideal(-ratio * w / 2, w), ideal(ratio * w / 2, w));
        EXPECT_NEAR(r.f_sep_max, f, 1e-9) << f;
    }
}

TEST(RequiredRatio, Values) {
    EXPECT_NEAR(required_ratio(0.99999), 12.2, 0.05);
    EXPECT_NEAR(required_ratio(0.9991), 7.71, 0.01);
    EXPECT_NEAR(required_ratio(1e-12), 0.0, 1e-11);
    EXPECT_THROW(required_ratio(1.0), Error);
}

TEST(RequiredRatio, ImpliedDesign) {
    double ratio = required_ratio(0.99999);
    EXPECT_NEAR(implied_width(10.72e-3, ratio) * 1e3, 0.88, 0.02);
    EXPECT_NEAR(implied_mutual(kDev, 1.40e-3, ratio) * 1e12, 104.0, 2.0);
}

}  // namespace
}  // namespace fluxchain
