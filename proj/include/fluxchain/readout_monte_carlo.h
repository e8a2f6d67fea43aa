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

#ifndef FLUXCHAIN_READOUT_MONTE_CARLO_H
#define FLUXCHAIN_READOUT_MONTE_CARLO_H

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fluxchain/csv_io.h"
#include "fluxchain/device_model.h"

namespace fluxchain {

enum class ReadoutState { L, R };

char state_label(ReadoutState s);
ReadoutState parse_state_label(std::string_view label);

/// Scalar heterodyne response of the tunable resonator to the latched QFP.
///
/// The mean transmitted level relaxes from `level_pre` to the steady level
/// of the prepared state with amplitude time constant 2/kappa. Integrated
/// signals are multiplied by `scale`, chosen so the noiseless L/R
/// separation at 1 us equals 1.
struct ReadoutModel {
    double f_drive = 0.0;  // Hz, parked at the L-state dip
    double f_l = 0.0;
    double f_r = 0.0;
    double kappa = 0.0;  // rad/s
    double level_pre = 1.0;
    double level_l = 0.0;
    double level_r = 0.0;
    double scale = 1.0;
    double noise_sigma_rate = 0.0;  // signal units per sqrt(s)
    double eps_prep = 0.0;          // per prepared state
    double p_mislatch = 0.0;        // per prepared state, QFP latching error

    /// Noiseless integrated signal after t seconds.
    double mean_signal(ReadoutState s, double t) const;
    double noise_sigma(double t) const;
    /// Probability that a prepared state reads out as the other one before
    /// any measurement noise.
    double flip_probability() const { return eps_prep + p_mislatch; }
};

struct ReadoutCalibration {
    double op_point = 0.25;        // resonator flux bias, Phi0
    double half_step = 0.05;       // QFP-state flux into the resonator, Phi0
    double target_overlap = 0.0043;
    double t_calibration = 80e-9;
    double eps_prep = 0.00425;
    double qfp_width = 1.40e-3;    // averaged s-curve width, Phi0
    double normalization_time = 1e-6;
};

/// Builds the model from the device: resonator frequencies for both QFP
/// states, steady transmission levels from the S21 lineshape, QFP mislatch
/// from the s-curve separation, and noise calibrated to the target overlap.
ReadoutModel calibrated_readout_model(const DeviceParams &p, const ReadoutCalibration &cal = {});

struct ShotRecord {
    ReadoutState prepared = ReadoutState::L;
    double integrated_signal = 0.0;
    double integration_time = 0.0;  // s
};

/// One shot; t_int must be at least 2 ns.
ShotRecord simulate_shot(ReadoutState state, double t_int, const ReadoutModel &model,
                         std::mt19937_64 &rng);

/// n_per_state shots of each state, L first. Shot i of state s draws from
/// the stream seeded by (seed, 2 * stream + s, i).
std::vector<ShotRecord> simulate_shots(const ReadoutModel &model, double t_int, long n_per_state,
                                       uint64_t seed, uint64_t stream = 0);

struct GaussianFit {
    double mean = 0.0;
    double sigma = 0.0;
    double weight = 0.0;  // fraction of shots inside the fit window
};

/// Mean and sigma of the dominant peak from values within +-4 sigma of it
/// (iterated from median / MAD), corrected for the window truncation.
GaussianFit fit_dominant_gaussian(std::span<const double> values);

/// Point between the means where the two normalized densities are equal
/// (midpoint for equal or vanishing sigmas).
double gaussian_threshold(const GaussianFit &a, const GaussianFit &b);

/// Sum of both misclassification probabilities of the fitted Gaussians at
/// the intersection threshold; 1 for coincident means.
double overlap_error(const GaussianFit &fit_l, const GaussianFit &fit_r);

struct HistogramAnalysis {
    GaussianFit fit_l;
    GaussianFit fit_r;
    double threshold = 0.0;
    double fidelity = 0.0;
    double p_l_given_r = 0.0;
    double p_r_given_l = 0.0;
    /// Conditional errors predicted by the fits: window weight times the
    /// Gaussian tail plus the out-of-window fraction read as the other state.
    double predicted_p_l_given_r = 0.0;
    double predicted_p_r_given_l = 0.0;
    double overlap_error = 0.0;
    /// |mean_r - mean_l| / sqrt((sigma_l^2 + sigma_r^2) / 2).
    double sigma_separation = 0.0;
    long n_l = 0;
    long n_r = 0;
};

HistogramAnalysis analyze_histograms(std::span<const ShotRecord> shots);

/// Noise rate for which two Gaussians separated by the model's noiseless
/// L/R difference at t_int overlap by target_overlap.
inline constexpr double kMaxNoiseRate = 1e9;
double calibrate_noise(double target_overlap, double t_int, const ReadoutModel &model);

struct FidelityPoint {
    double t_int = 0.0;
    double fidelity = 0.0;
    double overlap_error = 0.0;
};

std::vector<FidelityPoint> fidelity_vs_time(const ReadoutModel &model, std::span<const double> times,
                                            long n_per_state, uint64_t seed);

std::string shots_csv(std::span<const ShotRecord> shots);
std::vector<ShotRecord> parse_shots(const CsvTable &table);
std::string histogram_report_json(const HistogramAnalysis &a);

}  // namespace fluxchain

#endif
