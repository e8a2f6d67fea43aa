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

#ifndef FLUXCHAIN_TUNABLE_RESONATOR_H
#define FLUXCHAIN_TUNABLE_RESONATOR_H

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fluxchain/device_model.h"

namespace fluxchain {

/// Quarter-wave resonator terminated by an rf SQUID.
///
/// The SQUID loads the shorted end with L_s(phi) = l_tres / (1 + beta_rf
/// cos phi*), where phi* is the screened junction phase. The resonance is
/// the lowest root of tan(pi f / (2 f_bare)) = z0 / (2 pi f L_s).
struct ResonatorModel {
    double f_bare = 0.0;
    double z0 = 50.0;
    double ic_tres = 0.0;
    double l_tres = 0.0;
    double q_total = 0.0;
    double q_external = 0.0;

    double beta_rf() const { return kTwoPi * l_tres * ic_tres / kPhi0; }
};

/// Half-width of the excluded window around Phi0/2 (Phi0 units).
inline constexpr double kResonatorWindow = 0.02;

/// Builds the model from the device and fits f_bare so that the upper
/// sweet spot (phi = 0) sits at p.f_res_max.
ResonatorModel calibrated_resonator(const DeviceParams &p);

/// Root of phi + beta_rf sin(phi) = 2 pi phi_applied. Throws Error
/// ("multivalued regime") when beta_rf >= 1.
double squid_phase(const ResonatorModel &m, double phi);

/// Loaded series inductance seen by the quarter-wave line.
double squid_inductance(const ResonatorModel &m, double phi);

/// Resonant frequency in Hz. Throws Error inside the Phi0/2 window or if
/// the transcendental root cannot be bracketed.
double resonant_freq(const ResonatorModel &m, double phi);

/// Finite-difference step used by flux_sensitivity (Phi0 units).
inline constexpr double kSensitivityStep = 1e-5;

/// df/dphi in MHz per mPhi0 (centered difference).
double flux_sensitivity(const ResonatorModel &m, double phi);

struct StateShift {
    double shift_hz = 0.0;      // f(op + delta) - f(op - delta)
    double linewidth_hz = 0.0;  // f(op) / q_total
    double shift_over_linewidth = 0.0;
};

StateShift state_shift(const ResonatorModel &m, double op_point, double delta_phi);

struct S21Params {
    double f0 = 0.0;
    double q_total = 0.0;
    double q_e_tilde = 0.0;
    double phi_asym = 0.0;
    double amplitude = 1.0;

    double q_external() const;
    /// 1/Q_i = 1/Q - 1/Q_e; may be negative for unphysical fits.
    double inverse_q_internal() const;
};

/// A |1 - (Q/Qe~) e^{i phi} / (1 + 2 i Q (f - f0)/f0)|.
double s21_model(double f, const S21Params &fit);

struct S21Fit {
    S21Params params;
    S21Params sigma;  // bootstrap standard deviations, field by field
    double q_external = 0.0;
    double q_external_sigma = 0.0;
    double inverse_q_internal = 0.0;
    /// Set when 1/Q_i < 0 (reported, never clipped).
    bool unphysical_internal_q = false;
    int n_bootstrap = 0;
};

struct S21FitOptions {
    int n_bootstrap = 500;
    uint64_t seed = 0;
    int threads = 0;  // 0 -> hardware concurrency
};

/// Point estimate only (no bootstrap).
S21Params fit_s21_point(std::span<const std::pair<double, double>> trace);

/// Nonlinear least squares against s21_model, uncertainties from residual
/// resampling. Needs >= 20 points spanning >= 3 linewidths.
S21Fit fit_s21(std::span<const std::pair<double, double>> trace, const S21FitOptions &opt = {});

struct DecayRate {
    double kappa = 0.0;   // rad/s
    double ringup = 0.0;  // s
};

DecayRate decay_rate(double f0, double q);

}  // namespace fluxchain

#endif
