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

#ifndef FLUXCHAIN_QFP_ANALYTICS_H
#define FLUXCHAIN_QFP_ANALYTICS_H

#include <span>
#include <utility>
#include <vector>

#include "fluxchain/device_model.h"

namespace fluxchain {

/// Screening parameter of the QFP at x-flux `phi_x_qfp` (Phi0 units).
double beta_l(const DeviceParams &p, double phi_x_qfp);

/// dIp/dPhi_z of the QFP in A/Wb. Throws Error at the beta = -1 pole.
double susceptibility(const DeviceParams &p, double beta);

/// Qubit-to-resonator mutual mediated by the QFP, in henries.
double effective_mutual(const DeviceParams &p, double chi);

/// Flux step 2 Ip M / Phi0 the qubit imprints on the QFP z-loop.
double qubit_flux_signal(const DeviceParams &p);

/// Latching probability 1/2 [1 - tanh((phi_z - center) / w)].
double scurve_prob(double phi_z, double center, double w);

struct SCurveSample {
    double phi_z;  // Phi0 units
    long successes;
    long trials;
};

struct SCurveFit {
    double center = 0.0;
    double width = 0.0;
    double center_sigma = 0.0;
    double width_sigma = 0.0;
    /// Covariance of (center, width) in Phi0^2.
    double cov_cw = 0.0;
};

struct SCurveFitOptions {
    /// Weight residuals by the binomial standard error. Off by default.
    bool binomial_weights = false;
};

/// Least-squares fit of the tanh s-curve. Throws Error on fewer than four
/// distinct flux points, non-positive counts, degenerate data ("width
/// unidentifiable") or non-convergence.
SCurveFit fit_scurve(std::span<const SCurveSample> samples, const SCurveFitOptions &opt = {});

struct SeparationReport {
    double delta_phi_qub = 0.0;
    double ratio = 0.0;
    double f_sep_max = 0.0;
    /// Location of the maximum and its 1-sigma uncertainty from the two
    /// fit covariances (linear propagation).
    double phi_at_max = 0.0;
    double f_sep_max_sigma = 0.0;
    std::vector<std::pair<double, double>> f_sep_curve;
};

/// Number of grid points used to locate the F_sep maximum; the curve is
/// sampled on centers +- 10 w.
inline constexpr int kSeparationGridPoints = 10000;

/// F_sep(phi) = P_R(phi) - P_L(phi). `curve_points` controls how many
/// samples are kept in the report (the search grid is always 10^4).
SeparationReport separation_fidelity(const SCurveFit &left, const SCurveFit &right,
                                     int curve_points = 401);

/// Delta Phi / w needed for midpoint separation fidelity `f_target`.
double required_ratio(double f_target);

/// Width that reaches `ratio` for a fixed qubit signal.
double implied_width(double delta_phi, double ratio);
/// Qubit-QFP mutual that reaches `ratio` for a fixed width.
double implied_mutual(const DeviceParams &p, double width, double ratio);

}  // namespace fluxchain

#endif
