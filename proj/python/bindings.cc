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

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.h"
#include "fluxchain/anneal_dynamics.h"
#include "fluxchain/circuit_hamiltonian.h"
#include "fluxchain/device_model.h"
#include "fluxchain/qfp_analytics.h"
#include "fluxchain/readout_monte_carlo.h"
#include "fluxchain/tunable_resonator.h"

namespace py = pybind11;
using namespace fluxchain;

namespace {

std::vector<SCurveSample> to_samples(const std::vector<std::tuple<double, long, long>> &rows) {
    std::vector<SCurveSample> out;
    out.reserve(rows.size());
    for (const auto &[phi, k, n] : rows) out.push_back({phi, k, n});
    return out;
}

py::dict histogram_dict(const HistogramAnalysis &a) {
    py::dict d;
    d["fidelity"] = a.fidelity;
    d["threshold"] = a.threshold;
    d["overlap_error"] = a.overlap_error;
    d["p_l_given_r"] = a.p_l_given_r;
    d["p_r_given_l"] = a.p_r_given_l;
    d["predicted_p_l_given_r"] = a.predicted_p_l_given_r;
    d["predicted_p_r_given_l"] = a.predicted_p_r_given_l;
    d["sigma_separation"] = a.sigma_separation;
    d["mean_l"] = a.fit_l.mean;
    d["sigma_l"] = a.fit_l.sigma;
    d["mean_r"] = a.fit_r.mean;
    d["sigma_r"] = a.fit_r.sigma;
    d["n_l"] = a.n_l;
    d["n_r"] = a.n_r;
    return d;
}

}  // namespace

PYBIND11_MODULE(_fluxchain, m) {
    m.doc() = "Flux-qubit readout chain models";
    py::register_exception<Error>(m, "FluxchainError", PyExc_ValueError);
    m.attr("PHI0") = kPhi0;

    py::class_<DeviceParams>(m, "DeviceParams")
        .def(py::init<>())
        .def_readwrite("ic_x_qub", &DeviceParams::ic_x_qub)
        .def_readwrite("d_asym", &DeviceParams::d_asym)
        .def_readwrite("ic_z_qub", &DeviceParams::ic_z_qub)
        .def_readwrite("c_shunt_qub", &DeviceParams::c_shunt_qub)
        .def_readwrite("l_z_qub", &DeviceParams::l_z_qub)
        .def_readwrite("ip_qub", &DeviceParams::ip_qub)
        .def_readwrite("t1_avg", &DeviceParams::t1_avg)
        .def_readwrite("ic_x_qfp", &DeviceParams::ic_x_qfp)
        .def_readwrite("l_qfp", &DeviceParams::l_qfp)
        .def_readwrite("m_qub_qfp", &DeviceParams::m_qub_qfp)
        .def_readwrite("m_qfp_tres", &DeviceParams::m_qfp_tres)
        .def_readwrite("ic_tres", &DeviceParams::ic_tres)
        .def_readwrite("l_tres", &DeviceParams::l_tres)
        .def_readwrite("q_total", &DeviceParams::q_total)
        .def_readwrite("q_external", &DeviceParams::q_external)
        .def_readwrite("f_res_max", &DeviceParams::f_res_max)
        .def_readwrite("z0_tres", &DeviceParams::z0_tres)
        .def_readwrite("flux_offset_z", &DeviceParams::flux_offset_z)
        .def_readwrite("flux_offset_x", &DeviceParams::flux_offset_x)
        .def("validate", &DeviceParams::validate)
        .def("to_json", [](const DeviceParams &p) { return serialize_device(p); })
        .def(py::self == py::self);
    m.def("reference_device", &reference_device);
    m.def("load_device", [](const std::string &text) { return load_device(text); }, py::arg("json_text"));
    m.def("load_device_file", &load_device_file, py::arg("path"));

    // QFP analytics
    m.def("beta_l", &beta_l, py::arg("device"), py::arg("phi_x_qfp"));
    m.def("susceptibility", &susceptibility, py::arg("device"), py::arg("beta"));
    m.def("qubit_flux_signal", &qubit_flux_signal, py::arg("device"));
    m.def("scurve_prob", &scurve_prob, py::arg("phi_z"), py::arg("center"), py::arg("width"));
    py::class_<SCurveFit>(m, "SCurveFit")
        .def(py::init([](double c, double w, double cs, double ws) { return SCurveFit{c, w, cs, ws, 0.0}; }),
             py::arg("center"), py::arg("width"), py::arg("center_sigma") = 0.0, py::arg("width_sigma") = 0.0)
        .def_readonly("center", &SCurveFit::center)
        .def_readonly("width", &SCurveFit::width)
        .def_readonly("center_sigma", &SCurveFit::center_sigma)
        .def_readonly("width_sigma", &SCurveFit::width_sigma)
        .def_readonly("cov_cw", &SCurveFit::cov_cw);
    m.def(
        "fit_scurve",
        [](const std::vector<std::tuple<double, long, long>> &rows) { return fit_scurve(to_samples(rows)); },
        py::arg("samples"), "Fit (phi_z, successes, trials) rows to the tanh s-curve.");
    py::class_<SeparationReport>(m, "SeparationReport")
        .def_readonly("delta_phi_qub", &SeparationReport::delta_phi_qub)
        .def_readonly("ratio", &SeparationReport::ratio)
        .def_readonly("f_sep_max", &SeparationReport::f_sep_max)
        .def_readonly("phi_at_max", &SeparationReport::phi_at_max)
        .def_readonly("f_sep_max_sigma", &SeparationReport::f_sep_max_sigma)
        .def_readonly("f_sep_curve", &SeparationReport::f_sep_curve);
    m.def("separation_fidelity",
          [](const SCurveFit &l, const SCurveFit &r) { return separation_fidelity(l, r); }, py::arg("left"),
          py::arg("right"));
    m.def("required_ratio", &required_ratio, py::arg("f_target"));

    // Tunable resonator
    py::class_<ResonatorModel>(m, "ResonatorModel")
        .def_readonly("f_bare", &ResonatorModel::f_bare)
        .def_readonly("q_total", &ResonatorModel::q_total)
        .def_readonly("q_external", &ResonatorModel::q_external)
        .def_property_readonly("beta_rf", &ResonatorModel::beta_rf);
    m.def("calibrated_resonator", &calibrated_resonator, py::arg("device"));
    m.def("resonant_freq", &resonant_freq, py::arg("model"), py::arg("phi"));
    m.def(
        "resonant_freq",
        [](const ResonatorModel &r, py::array_t<double, py::array::c_style | py::array::forcecast> phi) {
            py::array_t<double> out(phi.request().shape);
            const double *in = phi.data();
            double *o = out.mutable_data();
            for (py::ssize_t i = 0; i < phi.size(); ++i) o[i] = resonant_freq(r, in[i]);
            return out;
        },
        py::arg("model"), py::arg("phi"));
    m.def(
        "state_shift",
        [](const ResonatorModel &r, double op, double delta) {
            StateShift s = state_shift(r, op, delta);
            return py::dict(py::arg("shift_hz") = s.shift_hz, py::arg("linewidth_hz") = s.linewidth_hz,
                            py::arg("shift_over_linewidth") = s.shift_over_linewidth);
        },
        py::arg("model"), py::arg("op_point"), py::arg("delta_phi"));
    m.def(
        "decay_rate",
        [](double f0, double q) {
            DecayRate d = decay_rate(f0, q);
            return py::make_tuple(d.kappa, d.ringup);
        },
        py::arg("f0"), py::arg("q"), "Returns (kappa in rad/s, ringup in s).");
    m.def(
        "fit_s21",
        [](const std::vector<std::pair<double, double>> &trace, int n_bootstrap, uint64_t seed) {
            S21FitOptions o;
            o.n_bootstrap = n_bootstrap;
            o.seed = seed;
            S21Fit f = fit_s21(trace, o);
            py::dict d;
            d["f0"] = f.params.f0;
            d["q_total"] = f.params.q_total;
            d["q_e_tilde"] = f.params.q_e_tilde;
            d["phi_asym"] = f.params.phi_asym;
            d["amplitude"] = f.params.amplitude;
            d["q_total_sigma"] = f.sigma.q_total;
            d["q_external"] = f.q_external;
            d["q_external_sigma"] = f.q_external_sigma;
            d["inverse_q_internal"] = f.inverse_q_internal;
            d["unphysical_internal_q"] = f.unphysical_internal_q;
            return d;
        },
        py::arg("trace"), py::arg("n_bootstrap") = 500, py::arg("seed") = 0);

    // Anneal dynamics
    m.def("double_well_onset", [](const DeviceParams &p) { return double_well_onset(p, Loop::Qfp); },
          py::arg("device"));
    m.def(
        "anneal_protocol",
        [](const DeviceParams &p, double tilt) {
            BiasSchedule s = readout_protocol(p, tilt);
            AnnealTrace t = simulate_anneal(p, s, s.shortest_ramp() / 100.0);
            const LatchState &f = t.final_state();
            return py::dict(py::arg("ip_qub") = f.ip_qub, py::arg("ip_qfp") = f.ip_qfp,
                            py::arg("amplification_ratio") = t.amplification_ratio());
        },
        py::arg("device"), py::arg("tilt"), "Run the readout protocol and report the final latched currents.");

    // Circuit Hamiltonian
    m.def(
        "lowest_levels",
        [](const std::string &path, int k, bool escalate) {
            SpectrumResult r = eigensolve_lowest(load_hamiltonian_file(path), k, escalate);
            py::dict d;
            d["eigenvalues_ghz"] = r.eigenvalues;
            d["convergence_delta_ghz"] = r.convergence_delta ? py::cast(*r.convergence_delta) : py::none();
            return d;
        },
        py::arg("coeffs_path"), py::arg("k") = 14, py::arg("escalate") = false);
    m.def(
        "anticrossing_g",
        [](double g, double f_res, const std::vector<double> &detunings) {
            return anticrossing_gap(synthetic_two_mode_sweep(g, f_res, detunings)).g;
        },
        py::arg("g_ghz"), py::arg("f_res_ghz"), py::arg("detunings_ghz"));
    m.def("purcell_t1", &purcell_t1, py::arg("g_hz"), py::arg("delta_hz"), py::arg("kappa"));
    m.def("combined_t1", &combined_t1, py::arg("t1_avg"), py::arg("t1_purcell"));

    // Readout Monte Carlo
    m.def(
        "readout_histograms",
        [](const DeviceParams &p, double t_int, long n_per_state, uint64_t seed) {
            ReadoutModel model = calibrated_readout_model(p);
            std::vector<ShotRecord> shots;
            {
                py::gil_scoped_release release;
                shots = simulate_shots(model, t_int, n_per_state, seed);
            }
            py::array_t<double> signal(static_cast<py::ssize_t>(shots.size()));
            py::array_t<int8_t> prepared(static_cast<py::ssize_t>(shots.size()));
            auto sv = signal.mutable_unchecked<1>();
            auto pv = prepared.mutable_unchecked<1>();
            for (size_t i = 0; i < shots.size(); ++i) {
                sv(i) = shots[i].integrated_signal;
                pv(i) = shots[i].prepared == ReadoutState::R ? 1 : 0;
            }
            py::dict d = histogram_dict(analyze_histograms(shots));
            d["signal"] = signal;
            d["prepared_r"] = prepared;
            return d;
        },
        py::arg("device"), py::arg("t_int"), py::arg("n_per_state") = 100000, py::arg("seed") = 0);

    // Command-line entry point
    m.def(
        "run_cli",
        [](const std::vector<std::string> &args) {
            std::ostringstream out, err;
            int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the fluxchain CLI in-process; returns (exit_code, stdout, stderr).");
}
