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

#ifndef FLUXCHAIN_ANNEAL_DYNAMICS_H
#define FLUXCHAIN_ANNEAL_DYNAMICS_H

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fluxchain/device_model.h"
#include "fluxchain/qfp_analytics.h"

namespace fluxchain {

enum class Loop { Qubit, Qfp };

/// Reduced single-loop model: a linear z-loop inductance closed by a
/// compound (two-junction) x-loop.
struct LoopModel {
    double inductance = 0.0;   // H
    double ic_junction = 0.0;  // per-junction critical current, A
    double d_asym = 0.0;
};

/// Qubit z-loop inductance chosen so that the fully annealed (phi_x = 1)
/// classical well carries |Ip| = p.ip_qub on the beta > pi/2 branch.
double qubit_loop_inductance(const DeviceParams &p);

LoopModel loop_model(const DeviceParams &p, Loop loop);

/// Signed effective critical current 2 Ic cos(pi x) sqrt(1 + d^2 tan^2(pi x)).
double effective_ic(const LoopModel &m, double phi_x);

/// Potential energy (J) of one loop at junction phase `phase`:
///   (Phi0/2pi)^2 / (2L) (phase - 2 pi phi_tot)^2 - (Phi0/2pi) Ic_eff cos(phase - delta)
/// with phi_tot = bias z-flux + external_flux and tan(delta) = d tan(pi phi_x).
double potential(const DeviceParams &p, Loop loop, double phase, const FluxBias &bias,
                 double external_flux = 0.0);

/// z-flux (Phi0) at which the loop's double well is degenerate for a
/// given x-flux; nonzero only for asymmetric junctions.
double degeneracy_flux(const LoopModel &m, double phi_x);

/// Smallest phi_x in [0.5, 1] at which the isolated loop potential (phi_z = 0)
/// first has two minima, located numerically from the potential.
double double_well_onset(const DeviceParams &p, Loop loop);

/// Anneal-and-latch readout sequence: (i) qubit tilt, (ii) qubit x-ramp
/// 0 -> 1 Phi0, (iii) QFP x-ramp 0.5 -> 1 Phi0, (iv) qubit reset, with the
/// resonator parked at Phi0/4. `tilt` is the physical qubit z-flux
/// relative to degeneracy; requested values compensate the trapped-flux
/// offsets and, for asymmetric qubits, track the degeneracy shift.
BiasSchedule readout_protocol(const DeviceParams &p, double tilt, double ramp_time = 10e-6);

struct LatchState {
    double phase_qub = 0.0;
    double phase_qfp = 0.0;
    double ip_qub = 0.0;  // A, signed
    double ip_qfp = 0.0;  // A, signed
};

struct AnnealTrace {
    std::vector<double> t;
    std::vector<FluxBias> bias;  // physical fluxes
    std::vector<LatchState> state;

    double amplification_ratio() const;
    const LatchState &final_state() const { return state.back(); }
};

struct AnnealOptions {
    /// Static flux added to phi_z_qfp for the whole anneal (noise sample).
    double qfp_flux_offset = 0.0;
    /// Keep only the final state (used by Monte Carlo sweeps).
    bool final_only = false;
};

/// Quasi-static anneal: at every step the coupled (qubit, QFP) phases
/// relax to the local minimum continued from the previous step. Throws
/// Error for unresolved ramps (< 100 steps) or a non-convergent step.
AnnealTrace simulate_anneal(const DeviceParams &p, const BiasSchedule &s, double dt,
                            const AnnealOptions &opt = {});

std::string anneal_trace_csv(const AnnealTrace &trace);

struct SCurveExperiment {
    double sigma_phi = 0.0;  // Phi0
    long n_shots = 1000;
    uint64_t seed = 0;
    double dt = 0.0;  // 0 -> shortest ramp / 100
    int threads = 0;  // 0 -> hardware concurrency
};

/// For each phi_z_qfp in `sweep`, runs n_shots anneals of `s` (its ZQfp line
/// replaced by the sweep value) with a Gaussian static flux offset per shot
/// and counts shots ending with ip_qfp > 0. Each shot draws from a stream
/// seeded by (seed, sweep index, shot index).
std::vector<SCurveSample> run_scurve_experiment(const DeviceParams &p, const BiasSchedule &s,
                                                std::span<const double> sweep,
                                                const SCurveExperiment &exp);

}  // namespace fluxchain

#endif
