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

#include "fluxchain/device_model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fluxchain/csv_io.h"
#include "json.hpp"

namespace fluxchain {

using json = nlohmann::json;

namespace {

struct FieldSpec {
    const char *section;
    const char *key;
    double DeviceParams::*member;
    bool required;
};

// Optional fields keep the DeviceParams member initializers as defaults.
constexpr FieldSpec kFields[] = {
    {"qubit", "ic_x_qub", &DeviceParams::ic_x_qub, true},
    {"qubit", "d_asym", &DeviceParams::d_asym, false},
    {"qubit", "ic_z_qub", &DeviceParams::ic_z_qub, true},
    {"qubit", "c_shunt_qub", &DeviceParams::c_shunt_qub, false},
    {"qubit", "l_z_qub", &DeviceParams::l_z_qub, true},
    {"qubit", "ip_qub", &DeviceParams::ip_qub, true},
    {"qubit", "t1_avg", &DeviceParams::t1_avg, false},
    {"qfp", "ic_x_qfp", &DeviceParams::ic_x_qfp, true},
    {"qfp", "l_qfp", &DeviceParams::l_qfp, true},
    {"qfp", "m_qub_qfp", &DeviceParams::m_qub_qfp, true},
    {"qfp", "m_qfp_tres", &DeviceParams::m_qfp_tres, true},
    {"resonator", "ic_tres", &DeviceParams::ic_tres, true},
    {"resonator", "l_tres", &DeviceParams::l_tres, true},
    {"resonator", "q_total", &DeviceParams::q_total, true},
    {"resonator", "q_external", &DeviceParams::q_external, false},
    {"resonator", "f_res_max", &DeviceParams::f_res_max, true},
    {"resonator", "z0_tres", &DeviceParams::z0_tres, false},
    {"calibration", "flux_offset_z", &DeviceParams::flux_offset_z, false},
    {"calibration", "flux_offset_x", &DeviceParams::flux_offset_x, false},
};

void require_positive(double v, const char *name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(std::string("invariant violation: ") + name + " must be positive and finite");
    }
}

}  // namespace

void DeviceParams::validate() const {
    require_positive(ic_x_qub, "ic_x_qub");
    require_positive(ic_z_qub, "ic_z_qub");
    require_positive(c_shunt_qub, "c_shunt_qub");
    require_positive(l_z_qub, "l_z_qub");
    require_positive(t1_avg, "t1_avg");
    require_positive(ic_x_qfp, "ic_x_qfp");
    require_positive(l_qfp, "l_qfp");
    require_positive(m_qub_qfp, "m_qub_qfp");
    require_positive(m_qfp_tres, "m_qfp_tres");
    require_positive(ic_tres, "ic_tres");
    require_positive(l_tres, "l_tres");
    require_positive(q_total, "q_total");
    require_positive(q_external, "q_external");
    require_positive(f_res_max, "f_res_max");
    require_positive(z0_tres, "z0_tres");
    if (!(ip_qub >= 0.0) || !std::isfinite(ip_qub)) {
        throw Error("invariant violation: ip_qub must be non-negative");
    }
    if (!(d_asym >= 0.0 && d_asym < 1.0)) {
        throw Error("invariant violation: d_asym must lie in [0, 1)");
    }
    if (1.0 / q_total - 1.0 / q_external < 0.0) {
        throw Error("invariant violation: q_external must be >= q_total (1/q_internal < 0)");
    }
    if (!std::isfinite(flux_offset_z) || !std::isfinite(flux_offset_x)) {
        throw Error("invariant violation: flux offsets must be finite");
    }
}

DeviceParams reference_device() { return DeviceParams{}; }

DeviceParams load_device(std::string_view config_text) {
    json doc;
    try {
        doc = json::parse(config_text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("parse failure: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error("parse failure: device config must be a JSON object");
    }
    DeviceParams p;
    for (const auto &f : kFields) {
        const json *section = nullptr;
        if (auto it = doc.find(f.section); it != doc.end()) {
            if (!it->is_object()) {
                throw Error(std::string("parse failure: section ") + f.section + " must be an object");
            }
            section = &*it;
        }
        if (section == nullptr || !section->contains(f.key)) {
            if (f.required) {
                throw Error(std::string("missing field ") + f.key);
            }
            continue;
        }
        const json &v = (*section)[f.key];
        if (!v.is_number()) {
            throw Error(std::string("parse failure: field ") + f.key + " must be a number");
        }
        p.*(f.member) = v.get<double>();
    }
    p.validate();
    return p;
}

DeviceParams load_device_file(const std::string &path) { return load_device(read_text_file(path)); }

std::string serialize_device(const DeviceParams &p) {
    json doc = json::object();
    for (const auto &f : kFields) {
        doc[f.section][f.key] = p.*(f.member);
    }
    return doc.dump(2) + "\n";
}

FluxBias physical_bias(const DeviceParams &p, const FluxBias &requested) {
    FluxBias out = requested;
    out.phi_z_qub += p.flux_offset_z;
    out.phi_x_qub += p.flux_offset_x;
    return out;
}

namespace {
constexpr std::string_view kLineNames[kNumControlLines] = {
    "phi_z_qub", "phi_x_qub", "phi_z_qfp", "phi_x_qfp", "phi_z_tres"};
}

std::string_view line_name(ControlLine line) { return kLineNames[static_cast<int>(line)]; }

ControlLine parse_line_name(std::string_view name) {
    for (int i = 0; i < kNumControlLines; ++i) {
        if (kLineNames[i] == name) {
            return static_cast<ControlLine>(i);
        }
    }
    throw Error("unknown control line " + std::string(name));
}

BiasSchedule &BiasSchedule::set_line(ControlLine line, std::vector<Breakpoint> points) {
    for (size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].t) || !std::isfinite(points[i].value)) {
            throw Error("schedule line " + std::string(line_name(line)) + " has a non-finite breakpoint");
        }
        if (i > 0 && !(points[i].t > points[i - 1].t)) {
            throw Error("schedule line " + std::string(line_name(line)) +
                        ": breakpoint times must be strictly increasing");
        }
    }
    lines_[static_cast<int>(line)] = std::move(points);
    return *this;
}

double BiasSchedule::eval_line(ControlLine line, double t) const {
    const auto &pts = lines_[static_cast<int>(line)];
    if (pts.empty()) {
        return 0.0;
    }
    if (t <= pts.front().t) {
        return pts.front().value;
    }
    if (t >= pts.back().t) {
        return pts.back().value;
    }
    auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                               [](double x, const Breakpoint &b) { return x < b.t; });
    auto lo = hi - 1;
    double u = (t - lo->t) / (hi->t - lo->t);
    return lo->value + u * (hi->value - lo->value);
}

FluxBias BiasSchedule::eval(double t) const {
    return FluxBias{
        eval_line(ControlLine::ZQub, t),
        eval_line(ControlLine::XQub, t),
        eval_line(ControlLine::ZQfp, t),
        eval_line(ControlLine::XQfp, t),
        eval_line(ControlLine::ZTres, t),
    };
}

double BiasSchedule::start_time() const {
    double t = std::numeric_limits<double>::infinity();
    for (const auto &pts : lines_) {
        if (!pts.empty()) {
            t = std::min(t, pts.front().t);
        }
    }
    return std::isfinite(t) ? t : 0.0;
}

double BiasSchedule::end_time() const {
    double t = -std::numeric_limits<double>::infinity();
    for (const auto &pts : lines_) {
        if (!pts.empty()) {
            t = std::max(t, pts.back().t);
        }
    }
    return std::isfinite(t) ? t : 0.0;
}

double BiasSchedule::shortest_ramp() const {
    // A ramp is a maximal run of segments moving in one direction.
    double best = std::numeric_limits<double>::infinity();
    for (const auto &pts : lines_) {
        size_t i = 1;
        while (i < pts.size()) {
            double d = pts[i].value - pts[i - 1].value;
            if (d == 0.0) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j + 1 < pts.size()) {
                double dn = pts[j + 1].value - pts[j].value;
                if (dn == 0.0 || (dn > 0.0) != (d > 0.0)) {
                    break;
                }
                ++j;
            }
            best = std::min(best, pts[j].t - pts[i - 1].t);
            i = j + 1;
        }
    }
    return best;
}

FluxBias eval_schedule(const BiasSchedule &s, double t) { return s.eval(t); }

BiasSchedule load_schedule(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("parse failure: ") + e.what());
    }
    if (!doc.is_array()) {
        throw Error("parse failure: schedule must be a JSON list");
    }
    BiasSchedule s;
    std::array<bool, kNumControlLines> seen{};
    for (const auto &entry : doc) {
        if (!entry.is_object() || !entry.contains("line") || !entry.contains("points")) {
            throw Error("parse failure: schedule entries need \"line\" and \"points\"");
        }
        ControlLine line = parse_line_name(entry["line"].get<std::string>());
        if (seen[static_cast<int>(line)]) {
            throw Error("schedule line " + std::string(line_name(line)) + " given twice");
        }
        seen[static_cast<int>(line)] = true;
        std::vector<Breakpoint> pts;
        for (const auto &pt : entry["points"]) {
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
                throw Error("parse failure: schedule points must be [t_s, value] pairs");
            }
            pts.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        s.set_line(line, std::move(pts));
    }
    return s;
}

BiasSchedule load_schedule_file(const std::string &path) { return load_schedule(read_text_file(path)); }

std::string serialize_schedule(const BiasSchedule &s) {
    json doc = json::array();
    for (int i = 0; i < kNumControlLines; ++i) {
        auto line = static_cast<ControlLine>(i);
        if (s.line(line).empty()) {
            continue;
        }
        json pts = json::array();
        for (const auto &b : s.line(line)) {
            pts.push_back({b.t, b.value});
        }
        doc.push_back({{"line", std::string(line_name(line))}, {"points", pts}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace fluxchain
