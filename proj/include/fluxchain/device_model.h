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

#ifndef FLUXCHAIN_DEVICE_MODEL_H
#define FLUXCHAIN_DEVICE_MODEL_H

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxchain/common.h"

namespace fluxchain {

/// Circuit constants for the qubit / QFP / tunable-resonator chain.
///
/// Fluxes are dimensionless (units of Phi0); everything else is SI.
/// Instances are plain values and are validated on load.
struct DeviceParams {
    // qubit
    double ic_x_qub = 103e-9;
    double d_asym = 0.102;
    double ic_z_qub = 228e-9;
    double c_shunt_qub = 70e-15;
    double l_z_qub = 133e-12;
    double ip_qub = 170e-9;
    double t1_avg = 1.77e-6;
    // qfp
    double ic_x_qfp = 990e-9;
    double l_qfp = 416e-12;
    double m_qub_qfp = 65e-12;
    double m_qfp_tres = 65e-12;
    // tunable resonator
    double ic_tres = 1200e-9;
    double l_tres = 199e-12;
    double q_total = 720.0;
    double q_external = 760.0;
    double f_res_max = 6.46e9;
    double z0_tres = 50.0;
    // trapped-flux calibration, added to the requested qubit biases
    double flux_offset_z = 0.0;
    double flux_offset_x = 0.0;

    static constexpr double phi0 = kPhi0;

    /// Throws Error naming the first offending field.
    void validate() const;

    bool operator==(const DeviceParams &) const = default;
};

/// Reference device: extracted values where available, design values otherwise.
DeviceParams reference_device();

/// Parses the JSON configuration (sections "qubit", "qfp", "resonator",
/// "calibration"). Required keys missing -> Error("missing field <key>").
DeviceParams load_device(std::string_view config_text);
DeviceParams load_device_file(const std::string &path);
std::string serialize_device(const DeviceParams &p);

/// Instantaneous control fluxes, Phi0 units.
struct FluxBias {
    double phi_z_qub = 0.0;
    double phi_x_qub = 0.0;
    double phi_z_qfp = 0.0;
    double phi_x_qfp = 0.0;
    double phi_z_tres = 0.0;

    bool operator==(const FluxBias &) const = default;
};

/// Requested -> physical flux: adds the trapped-flux offsets.
FluxBias physical_bias(const DeviceParams &p, const FluxBias &requested);

enum class ControlLine : int { ZQub = 0, XQub, ZQfp, XQfp, ZTres };
inline constexpr int kNumControlLines = 5;

std::string_view line_name(ControlLine line);
ControlLine parse_line_name(std::string_view name);

struct Breakpoint {
    double t;
    double value;
};

/// Piecewise-linear waveforms, one per control line. A line without
/// breakpoints holds 0. Values are clamped outside the breakpoint range.
class BiasSchedule {
  public:
    BiasSchedule() = default;

    /// Replaces a line; throws unless times are strictly increasing.
    BiasSchedule &set_line(ControlLine line, std::vector<Breakpoint> points);
    const std::vector<Breakpoint> &line(ControlLine line) const {
        return lines_[static_cast<int>(line)];
    }

    double eval_line(ControlLine line, double t) const;
    FluxBias eval(double t) const;

    double start_time() const;
    double end_time() const;
    /// Duration of the shortest monotone run of breakpoints on any line.
    double shortest_ramp() const;

  private:
    std::array<std::vector<Breakpoint>, kNumControlLines> lines_;
};

FluxBias eval_schedule(const BiasSchedule &s, double t);

BiasSchedule load_schedule(std::string_view json_text);
BiasSchedule load_schedule_file(const std::string &path);
std::string serialize_schedule(const BiasSchedule &s);

}  // namespace fluxchain

#endif
