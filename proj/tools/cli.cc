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

#include "cli.h"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "fluxchain/anneal_dynamics.h"
#include "fluxchain/circuit_hamiltonian.h"
#include "fluxchain/csv_io.h"
#include "fluxchain/device_model.h"
#include "fluxchain/qfp_analytics.h"
#include "fluxchain/readout_monte_carlo.h"
#include "fluxchain/tunable_resonator.h"
#include "json.hpp"

namespace fluxchain::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char *kVersion = FLUXCHAIN_VERSION;
constexpr const char *kLockName = ".fluxchain.lock";

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string device;
    std::vector<std::string> coeffs;
    std::string out;
    uint64_t seed = 0;
    long shots = 0;  // 0 -> per-command default
    double tint = 80e-9;
    std::string sweep;
    bool escalate = false;
    bool check = false;

    std::string input;
    std::string left;
    std::string right;
    std::string schedule;
    std::string state = "R";
    int k = 14;
    double tilt_mphi0 = 2.0;
    double width_mphi0 = 1.40;
    double dt = 0.0;
    double g_mhz = 9.8;
    double noise = 0.01;
    int bootstrap = 500;
    double op_point = 0.25;
    double step = 0.1;
};

struct Artifact {
    std::string name;
    std::string content;
};

struct Result {
    std::vector<Artifact> files;
    std::string summary;
};

using Handler = std::function<Result(const Options &)>;

std::vector<double> parse_sweep(const std::string &text, const std::string &fallback) {
    const std::string &s = text.empty() ? fallback : text;
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw UsageError("--sweep expects start:stop:n, got '" + s + "'");
    double a, b;
    long n;
    try {
        size_t pa, pb, pn;
        a = std::stod(parts[0], &pa);
        b = std::stod(parts[1], &pb);
        n = std::stol(parts[2], &pn);
        if (pa != parts[0].size() || pb != parts[1].size() || pn != parts[2].size()) throw std::invalid_argument("");
    } catch (const std::exception &) {
        throw UsageError("--sweep expects start:stop:n, got '" + s + "'");
    }
    if (n < 1 || !std::isfinite(a) || !std::isfinite(b)) throw UsageError("--sweep needs n >= 1 and finite bounds");
    std::vector<double> v;
    for (long i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

DeviceParams device_of(const Options &o) { return o.device.empty() ? reference_device() : load_device_file(o.device); }

ReadoutState state_of(const Options &o) {
    if (o.state == "L") return ReadoutState::L;
    if (o.state == "R") return ReadoutState::R;
    throw UsageError("--state must be L or R");
}

long shots_or(const Options &o, long fallback) {
    if (o.shots < 0) throw UsageError("--shots must be positive");
    return o.shots > 0 ? o.shots : fallback;
}

std::string scurve_csv(std::span<const SCurveSample> samples) {
    CsvWriter w({"phi_z_mphi0", "successes", "trials"});
    for (const auto &s : samples) {
        w.row({format_double(s.phi_z * 1e3), std::to_string(s.successes), std::to_string(s.trials)});
    }
    return w.str();
}

std::vector<SCurveSample> read_scurve(const std::string &path) {
    CsvTable t = read_csv_file(path);
    auto phi = t.numeric_column("phi_z_mphi0");
    auto succ = t.numeric_column("successes");
    auto trials = t.numeric_column("trials");
    std::vector<SCurveSample> out;
    for (size_t i = 0; i < phi.size(); ++i) {
        out.push_back(SCurveSample{phi[i] * 1e-3, static_cast<long>(succ[i]), static_cast<long>(trials[i])});
    }
    return out;
}

json fit_json(const SCurveFit &f) {
    return json{{"center_mphi0", f.center * 1e3},
                {"width_mphi0", f.width * 1e3},
                {"center_sigma_mphi0", f.center_sigma * 1e3},
                {"width_sigma_mphi0", f.width_sigma * 1e3}};
}

std::string dump(const json &j) { return j.dump(2) + "\n"; }

// ---- device -------------------------------------------------------------

Result device_validate(const Options &o) {
    DeviceParams p = device_of(o);
    p.validate();
    return Result{{{"device.json", serialize_device(p) + "\n"}}, "device parameters valid"};
}

// ---- qfp ----------------------------------------------------------------

Result qfp_betasweep(const Options &o) {
    DeviceParams p = device_of(o);
    CsvWriter w({"phi_x_qfp", "beta_l", "chi_a_per_wb", "m_eff_h"});
    for (double x : parse_sweep(o.sweep, "0:1:101")) {
        double b = beta_l(p, x);
        double chi = susceptibility(p, b);
        w.row({x, b, chi, effective_mutual(p, chi)});
    }
    return Result{{{"betasweep.csv", w.str()}}, "beta_L(0) = " + format_double(beta_l(p, 0.0))};
}

Result qfp_scurve(const Options &o) {
    DeviceParams p = device_of(o);
    ReadoutState st = state_of(o);
    double half = qubit_flux_signal(p) / 2.0;
    double center = st == ReadoutState::R ? half : -half;
    double w = o.width_mphi0 * 1e-3;
    if (!(w > 0.0)) throw UsageError("--width must be positive");
    long trials = shots_or(o, 1000);
    auto sweep = parse_sweep(o.sweep, "-12:12:49");
    std::vector<SCurveSample> samples;
    for (size_t i = 0; i < sweep.size(); ++i) {
        double phi = sweep[i] * 1e-3;
        std::mt19937_64 rng(stream_seed(o.seed, i, st == ReadoutState::L ? 0 : 1));
        std::binomial_distribution<long> binom(trials, scurve_prob(phi, center, w));
        samples.push_back(SCurveSample{phi, binom(rng), trials});
    }
    SCurveFit fit = fit_scurve(samples);
    json j = fit_json(fit);
    j["state"] = o.state;
    return Result{{{"scurve.csv", scurve_csv(samples)}, {"scurve_fit.json", dump(j)}},
                  "center " + format_double(fit.center * 1e3) + " mPhi0, width " + format_double(fit.width * 1e3) + " mPhi0"};
}

Result qfp_fidelity(const Options &o) {
    if (o.left.empty() || o.right.empty()) throw UsageError("qfp fidelity needs --left and --right s-curve files");
    SCurveFit fl = fit_scurve(read_scurve(o.left));
    SCurveFit fr = fit_scurve(read_scurve(o.right));
    SeparationReport r = separation_fidelity(fl, fr);
    CsvWriter w({"phi_z_mphi0", "f_sep"});
    for (const auto &[phi, f] : r.f_sep_curve) w.row({phi * 1e3, f});
    json j{{"left", fit_json(fl)},
           {"right", fit_json(fr)},
           {"delta_phi_qub_mphi0", r.delta_phi_qub * 1e3},
           {"ratio", r.ratio},
           {"f_sep_max", r.f_sep_max},
           {"f_sep_max_sigma", r.f_sep_max_sigma},
           {"phi_at_max_mphi0", r.phi_at_max * 1e3}};
    return Result{{{"fidelity.json", dump(j)}, {"fsep_curve.csv", w.str()}},
                  "F_sep max " + format_double(r.f_sep_max)};
}

// ---- resonator ------------------------------------------------------------

Result res_modulation(const Options &o) {
    DeviceParams p = device_of(o);
    ResonatorModel m = calibrated_resonator(p);
    CsvWriter w({"phi_tres", "freq_hz", "sensitivity_mhz_per_mphi0"});
    for (double phi : parse_sweep(o.sweep, "-1:1:401")) {
        double r = std::remainder(phi, 1.0);
        // Points within the excluded window around Phi0/2 are omitted.
        if (std::abs(std::abs(r) - 0.5) <= kResonatorWindow + kSensitivityStep) continue;
        w.row({phi, resonant_freq(m, phi), flux_sensitivity(m, phi)});
    }
    return Result{{{"modulation.csv", w.str()}}, "f_bare " + format_double(m.f_bare) + " Hz"};
}

Result res_fit(const Options &o) {
    std::vector<std::pair<double, double>> trace;
    std::vector<Artifact> files;
    if (!o.input.empty()) {
        CsvTable t = read_csv_file(o.input);
        auto f = t.numeric_column("freq_hz");
        auto s = t.numeric_column("s21_mag");
        for (size_t i = 0; i < f.size(); ++i) trace.emplace_back(f[i], s[i]);
    } else {
        // Synthetic trace around the upper sweet spot with multiplicative noise.
        DeviceParams p = device_of(o);
        S21Params truth{p.f_res_max, p.q_total, p.q_external, 0.0, 1.0};
        double lw = truth.f0 / truth.q_total;
        std::mt19937_64 rng(stream_seed(o.seed, 0x53323131));
        std::normal_distribution<double> normal(0.0, 1.0);
        CsvWriter w({"freq_hz", "s21_mag"});
        const int n = 401;
        for (int i = 0; i < n; ++i) {
            double f = truth.f0 + (-10.0 + 20.0 * i / (n - 1)) * lw;
            double mag = s21_model(f, truth) * (1.0 + o.noise * normal(rng));
            trace.emplace_back(f, mag);
            w.row({f, mag});
        }
        files.push_back({"s21_trace.csv", w.str()});
    }
    S21FitOptions fo;
    fo.n_bootstrap = o.bootstrap;
    fo.seed = o.seed;
    S21Fit fit = fit_s21(trace, fo);
    auto pj = [](const S21Params &s) {
        return json{{"f0", s.f0}, {"q_total", s.q_total}, {"q_e_tilde", s.q_e_tilde},
                    {"phi_asym", s.phi_asym}, {"amplitude", s.amplitude}};
    };
    json j{{"params", pj(fit.params)},
           {"sigma", pj(fit.sigma)},
           {"q_external", fit.q_external},
           {"q_external_sigma", fit.q_external_sigma},
           {"inverse_q_internal", fit.inverse_q_internal},
           {"unphysical_internal_q", fit.unphysical_internal_q},
           {"n_bootstrap", fit.n_bootstrap}};
    files.insert(files.begin(), Artifact{"s21_fit.json", dump(j)});
    return Result{files, "Q = " + format_double(fit.params.q_total) + " +- " + format_double(fit.sigma.q_total)};
}

Result res_shift(const Options &o) {
    DeviceParams p = device_of(o);
    ResonatorModel m = calibrated_resonator(p);
    StateShift s = state_shift(m, o.op_point, o.step / 2.0);
    double f0 = resonant_freq(m, o.op_point);
    DecayRate d = decay_rate(p.f_res_max, p.q_total);
    json j{{"op_point", o.op_point},
           {"full_step", o.step},
           {"f_op_hz", f0},
           {"shift_hz", s.shift_hz},
           {"linewidth_hz", s.linewidth_hz},
           {"shift_over_linewidth", s.shift_over_linewidth},
           {"sensitivity_mhz_per_mphi0", flux_sensitivity(m, o.op_point)},
           {"kappa_rad_per_s", d.kappa},
           {"ringup_s", d.ringup},
           {"f_max_hz", resonant_freq(m, 0.0)}};
    return Result{{{"shift.json", dump(j)}}, "shift " + format_double(s.shift_hz) + " Hz"};
}

// ---- anneal -------------------------------------------------------------

BiasSchedule schedule_of(const Options &o, const DeviceParams &p, ReadoutState st) {
    if (!o.schedule.empty()) return load_schedule_file(o.schedule);
    double tilt = o.tilt_mphi0 * 1e-3 * (st == ReadoutState::R ? 1.0 : -1.0);
    return readout_protocol(p, tilt);
}

Result anneal_trace(const Options &o) {
    DeviceParams p = device_of(o);
    BiasSchedule s = schedule_of(o, p, state_of(o));
    double dt = o.dt > 0.0 ? o.dt : s.shortest_ramp() / 100.0;
    if (!std::isfinite(dt)) throw Error("schedule has no ramps; pass --dt");
    AnnealTrace tr = simulate_anneal(p, s, dt);
    const LatchState &f = tr.final_state();
    json j{{"steps", tr.t.size()},
           {"dt_s", dt},
           {"amplification_ratio", tr.amplification_ratio()},
           {"final_ip_qub_na", f.ip_qub * 1e9},
           {"final_ip_qfp_na", f.ip_qfp * 1e9},
           {"qfp_double_well_onset", double_well_onset(p, Loop::Qfp)},
           {"qubit_double_well_onset", double_well_onset(p, Loop::Qubit)}};
    return Result{{{"anneal_trace.csv", anneal_trace_csv(tr)}, {"anneal_summary.json", dump(j)}},
                  "final ip_qfp " + format_double(f.ip_qfp * 1e9) + " nA"};
}

Result anneal_scurve(const Options &o) {
    DeviceParams p = device_of(o);
    ReadoutState st = state_of(o);
    BiasSchedule s = schedule_of(o, p, st);
    std::vector<double> sweep;
    for (double v : parse_sweep(o.sweep, "-12:12:49")) sweep.push_back(v * 1e-3);
    SCurveExperiment e;
    // Gaussian threshold noise whose tanh-equivalent width is --width.
    e.sigma_phi = o.width_mphi0 * 1e-3 * 2.0 / std::sqrt(kTwoPi);
    e.n_shots = shots_or(o, 1000);
    e.seed = o.seed;
    e.dt = o.dt;
    auto samples = run_scurve_experiment(p, s, sweep, e);
    SCurveFit fit = fit_scurve(samples);
    json j = fit_json(fit);
    j["state"] = o.state;
    j["sigma_phi_mphi0"] = e.sigma_phi * 1e3;
    return Result{{{"scurve.csv", scurve_csv(samples)}, {"scurve_fit.json", dump(j)}},
                  "center " + format_double(fit.center * 1e3) + " mPhi0, width " + format_double(fit.width * 1e3) + " mPhi0"};
}

// ---- hamiltonian --------------------------------------------------------

Result ham_eig(const Options &o) {
    if (o.coeffs.size() != 1) throw UsageError("ham eig needs exactly one --coeffs file");
    NormalModeHamiltonian h = load_hamiltonian_file(o.coeffs[0]);
    Eigen::MatrixXcd H = assemble(h);
    double herm = hermiticity_residual(H);
    SpectrumResult base = eigensolve_lowest(H, o.k);
    SpectrumResult r = base;
    if (o.escalate) {
        r.escalated_eigenvalues = eigensolve_lowest(h.escalated(2), o.k, false).eigenvalues;
        double delta = 0.0;
        for (int i = 0; i < o.k; ++i) {
            delta = std::max(delta, std::abs(r.escalated_eigenvalues[static_cast<size_t>(i)] -
                                             r.eigenvalues[static_cast<size_t>(i)]));
        }
        r.convergence_delta = delta;
    }
    json j{{"dimension", h.total_dim()}, {"hermiticity_residual", herm}, {"k", o.k}};
    j["convergence_delta_ghz"] = r.convergence_delta ? json(*r.convergence_delta) : json(nullptr);
    if (o.escalate) j["escalated_eigenvalues_ghz"] = r.escalated_eigenvalues;
    std::string summary = "dimension " + std::to_string(h.total_dim());
    if (r.convergence_delta) summary += ", convergence_delta " + format_double(*r.convergence_delta * 1e3) + " MHz";
    return Result{{{"spectrum.csv", spectrum_csv(r.eigenvalues)}, {"spectrum.json", dump(j)}}, summary};
}

Result ham_anticross(const Options &o) {
    std::vector<FluxSpectrum> spectra;
    bool synthetic = o.coeffs.empty();
    AntiCrossingOptions ao;
    if (synthetic) {
        std::vector<double> det;
        for (double v : parse_sweep(o.sweep, "-500:500:201")) det.push_back(v * 1e-3);
        spectra = synthetic_two_mode_sweep(o.g_mhz * 1e-3, device_of(o).f_res_max * 1e-9, det);
    } else {
        for (const auto &path : o.coeffs) {
            json doc = json::parse(read_text_file(path), nullptr, false);
            if (doc.is_discarded() || !doc.contains("flux")) throw Error("coefficient file " + path + " lacks a flux field");
            NormalModeHamiltonian h = load_hamiltonian(doc.dump());
            int levels = std::min<int>(ao.lower_level + 2, static_cast<int>(h.total_dim()));
            spectra.push_back(FluxSpectrum{doc["flux"].get<double>(), eigensolve_lowest(h, levels, false).eigenvalues});
        }
    }
    CsvWriter w({"flux", "e_lower_ghz", "e_upper_ghz"});
    for (const auto &s : spectra) {
        w.row({s.flux, s.energies.at(static_cast<size_t>(ao.lower_level)), s.energies.at(static_cast<size_t>(ao.lower_level) + 1)});
    }
    json j{{"synthetic", synthetic}, {"resolution_ghz", ao.resolution}};
    std::string summary;
    try {
        AntiCrossing a = anticrossing_gap(spectra, ao);
        j["detected"] = true;
        j["phi_min"] = a.phi_min;
        j["gap_ghz"] = a.gap;
        j["g_ghz"] = a.g;
        summary = "g = " + format_double(a.g * 1e3) + " MHz";
    } catch (const NoAntiCrossing &e) {
        j["detected"] = false;
        j["message"] = e.what();
        j["g_upper_bound_ghz"] = e.g_bound();
        summary = e.what();
    }
    return Result{{{"anticrossing.json", dump(j)}, {"anticrossing_levels.csv", w.str()}}, summary};
}

Result ham_t1sweep(const Options &o) {
    DeviceParams p = device_of(o);
    double kappa = decay_rate(p.f_res_max, p.q_total).kappa;
    CsvWriter w({"delta_mhz", "t1_purcell_s", "t1_combined_s"});
    for (double d : parse_sweep(o.sweep, "20:1000:50")) {
        double tp = purcell_t1(o.g_mhz * 1e6, d * 1e6, kappa);
        w.row({d, tp, combined_t1(p.t1_avg, tp)});
    }
    return Result{{{"t1sweep.csv", w.str()}}, "kappa " + format_double(kappa) + " rad/s"};
}

// ---- measurement ----------------------------------------------------------

Result measure_shots(const Options &o) {
    ReadoutModel m = calibrated_readout_model(device_of(o));
    auto shots = simulate_shots(m, o.tint, shots_or(o, 100000), o.seed);
    return Result{{{"shots.csv", shots_csv(shots)}}, std::to_string(shots.size()) + " shots"};
}

Result measure_histogram(const Options &o) {
    std::vector<ShotRecord> shots;
    if (!o.input.empty()) {
        shots = parse_shots(read_csv_file(o.input));
    } else {
        ReadoutModel m = calibrated_readout_model(device_of(o));
        shots = simulate_shots(m, o.tint, shots_or(o, 100000), o.seed);
    }
    HistogramAnalysis a = analyze_histograms(shots);
    return Result{{{"histogram.json", histogram_report_json(a) + "\n"}}, "fidelity " + format_double(a.fidelity)};
}

Result measure_sweep(const Options &o) {
    ReadoutModel m = calibrated_readout_model(device_of(o));
    std::vector<double> times;
    for (double v : parse_sweep(o.sweep, "20:1000:50")) times.push_back(v * 1e-9);
    auto pts = fidelity_vs_time(m, times, shots_or(o, 100000), o.seed);
    CsvWriter w({"t_int_s", "fidelity", "overlap_error"});
    for (const auto &pt : pts) w.row({pt.t_int, pt.fidelity, pt.overlap_error});
    return Result{{{"fidelity_sweep.csv", w.str()}}, std::to_string(pts.size()) + " integration times"};
}

// ---- outputs, manifest, lock ------------------------------------------------

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static const char *hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

class DirLock {
  public:
    explicit DirLock(const fs::path &dir) : path_(dir / kLockName) {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw Error("output directory is locked by another run: " + path_.string());
        std::string pid = std::to_string(::getpid()) + "\n";
        if (::write(fd, pid.data(), pid.size()) < 0) { /* lock content is informational */ }
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock &) = delete;
    DirLock &operator=(const DirLock &) = delete;

  private:
    fs::path path_;
};

struct OutputLayout {
    fs::path dir;
    fs::path manifest;
    std::vector<fs::path> files;
};

// --out is a file when it has an extension, otherwise a directory. In file
// mode the first artifact takes the given name and the rest are written
// next to it as <stem>_<artifact name>.
OutputLayout layout_for(const std::string &out, const std::string &command, const Result &r) {
    OutputLayout l;
    fs::path p(out);
    bool file_mode = p.has_extension() && !fs::is_directory(p);
    if (file_mode) {
        l.dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
        l.manifest = fs::path(p.string() + ".manifest.json");
        for (size_t i = 0; i < r.files.size(); ++i) {
            l.files.push_back(i == 0 ? p : l.dir / (p.stem().string() + "_" + r.files[i].name));
        }
    } else {
        l.dir = p;
        std::string tag = command;
        std::replace(tag.begin(), tag.end(), ' ', '_');
        l.manifest = l.dir / (tag + ".manifest.json");
        for (const auto &a : r.files) l.files.push_back(l.dir / a.name);
    }
    return l;
}

json config_paths(const Options &o) {
    auto abs = [](const std::string &s) { return s.empty() ? json(nullptr) : json(fs::absolute(s).lexically_normal().string()); };
    json j{{"device", o.device.empty() ? json("builtin:reference") : abs(o.device)}};
    if (!o.coeffs.empty()) {
        json c = json::array();
        for (const auto &s : o.coeffs) c.push_back(abs(s));
        j["coeffs"] = c;
    }
    for (const auto &[key, val] : {std::pair{"schedule", o.schedule}, {"input", o.input}, {"left", o.left}, {"right", o.right}}) {
        if (!val.empty()) j[key] = abs(val);
    }
    return j;
}

int check_outputs(const OutputLayout &l, const Result &r, std::ostream &out, std::ostream &err) {
    if (!fs::exists(l.manifest)) {
        err << "check failed: manifest not found: " << l.manifest.string() << "\n";
        return 1;
    }
    json m = json::parse(read_text_file(l.manifest.string()));
    std::map<std::string, std::string> recorded;
    for (const auto &e : m.at("outputs")) recorded[e.at("path").get<std::string>()] = e.at("sha256").get<std::string>();
    bool ok = recorded.size() == r.files.size();
    for (size_t i = 0; i < r.files.size(); ++i) {
        std::string rel = fs::relative(l.files[i], l.manifest.parent_path()).string();
        std::string fresh = sha256_hex(r.files[i].content);
        auto it = recorded.find(rel);
        bool match = it != recorded.end() && it->second == fresh;
        bool disk = fs::exists(l.files[i]) && sha256_hex(read_text_file(l.files[i].string())) == fresh;
        out << (match && disk ? "ok       " : "MISMATCH ") << rel << "\n";
        ok = ok && match && disk;
    }
    if (!ok) err << "check failed: outputs differ from manifest\n";
    return ok ? 0 : 1;
}

void write_outputs(const OutputLayout &l, const Result &r, const std::string &command, const Options &o,
                   const std::vector<std::string> &args, double seconds) {
    json outputs = json::array();
    for (size_t i = 0; i < r.files.size(); ++i) {
        write_text_file(l.files[i].string(), r.files[i].content);
        outputs.push_back({{"path", fs::relative(l.files[i], l.manifest.parent_path()).string()},
                           {"sha256", sha256_hex(r.files[i].content)},
                           {"bytes", r.files[i].content.size()}});
    }
    json m{{"subcommand", command},
           {"arguments", args},
           {"config_paths", config_paths(o)},
           {"seed", o.seed},
           {"output_directory", fs::absolute(l.dir).lexically_normal().string()},
           {"tool_version", kVersion},
           {"wall_clock_seconds", seconds},
           {"outputs", outputs}};
    write_text_file(l.manifest.string(), m.dump(2) + "\n");
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"fluxchain: QFP-mediated flux qubit readout simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1, 1);
    Options o;
    std::vector<std::pair<CLI::App *, Handler>> leaves;

    auto group = [&](const std::string &name, const std::string &desc) {
        auto *g = app.add_subcommand(name, desc);
        g->require_subcommand(1, 1);
        return g;
    };
    auto leaf = [&](CLI::App *g, const std::string &name, const std::string &desc, Handler h) {
        auto *c = g->add_subcommand(name, desc);
        c->add_option("--out", o.out, "output file or directory");
        c->add_flag("--check", o.check, "verify outputs against the run manifest instead of writing");
        c->add_option("--seed", o.seed, "random seed (default 0)");
        leaves.emplace_back(c, std::move(h));
        return c;
    };
    auto device = [&](CLI::App *c) { c->add_option("--device", o.device, "device configuration JSON")->check(CLI::ExistingFile); };
    auto shots = [&](CLI::App *c) { c->add_option("--shots", o.shots, "shot / trial count"); };
    auto sweep = [&](CLI::App *c, const std::string &units) {
        c->add_option("--sweep", o.sweep, "start:stop:n, " + units);
    };

    auto *dev = group("device", "device parameters");
    device(leaf(dev, "validate", "load and validate a device file", device_validate));

    auto *qfp = group("qfp", "QFP coupler and s-curve analysis");
    auto *c = leaf(qfp, "betasweep", "beta_L, susceptibility and effective mutual vs QFP x-flux", qfp_betasweep);
    device(c);
    sweep(c, "phi_x_qfp in Phi0 (default 0:1:101)");
    c = leaf(qfp, "scurve", "binomially sampled tanh s-curve and its fit", qfp_scurve);
    device(c);
    shots(c);
    sweep(c, "phi_z_qfp in mPhi0 (default -12:12:49)");
    c->add_option("--state", o.state, "prepared qubit state L or R");
    c->add_option("--width", o.width_mphi0, "s-curve width in mPhi0");
    c = leaf(qfp, "fidelity", "separation fidelity of two s-curve files", qfp_fidelity);
    c->add_option("--left", o.left, "s-curve CSV of the L state")->check(CLI::ExistingFile);
    c->add_option("--right", o.right, "s-curve CSV of the R state")->check(CLI::ExistingFile);

    auto *res = group("res", "tunable resonator");
    c = leaf(res, "modulation", "resonant frequency and flux sensitivity vs flux", res_modulation);
    device(c);
    sweep(c, "phi_tres in Phi0 (default -1:1:401)");
    c = leaf(res, "fit", "fit an S21 trace (synthetic from the device when no --input)", res_fit);
    device(c);
    c->add_option("--input", o.input, "CSV freq_hz,s21_mag")->check(CLI::ExistingFile);
    c->add_option("--bootstrap", o.bootstrap, "bootstrap resamples");
    c->add_option("--noise", o.noise, "relative noise of the synthetic trace");
    c = leaf(res, "shift", "QFP-state frequency shift and decay rate", res_shift);
    device(c);
    c->add_option("--op", o.op_point, "resonator flux operating point in Phi0");
    c->add_option("--step", o.step, "full QFP-state flux step in Phi0");

    auto *ann = group("anneal", "anneal-and-latch simulation");
    c = leaf(ann, "trace", "quasi-static anneal trace", anneal_trace);
    device(c);
    c->add_option("--schedule", o.schedule, "schedule JSON (default: readout protocol)")->check(CLI::ExistingFile);
    c->add_option("--state", o.state, "prepared qubit state L or R for the default protocol");
    c->add_option("--tilt", o.tilt_mphi0, "qubit tilt magnitude in mPhi0");
    c->add_option("--dt", o.dt, "time step in s (default shortest ramp / 100)");
    c = leaf(ann, "scurve", "Monte Carlo s-curve from repeated anneals", anneal_scurve);
    device(c);
    shots(c);
    sweep(c, "phi_z_qfp in mPhi0 (default -12:12:49)");
    c->add_option("--schedule", o.schedule, "schedule JSON (default: readout protocol)")->check(CLI::ExistingFile);
    c->add_option("--state", o.state, "prepared qubit state L or R");
    c->add_option("--tilt", o.tilt_mphi0, "qubit tilt magnitude in mPhi0");
    c->add_option("--width", o.width_mphi0, "target s-curve width in mPhi0 (sets the flux noise)");
    c->add_option("--dt", o.dt, "time step in s");

    auto *ham = group("ham", "normal-mode Hamiltonian and isolation");
    c = leaf(ham, "eig", "lowest eigenvalues of a coefficient file", ham_eig);
    c->add_option("--coeffs", o.coeffs, "Hamiltonian coefficient JSON")->check(CLI::ExistingFile);
    c->add_option("--k", o.k, "number of eigenvalues")->check(CLI::PositiveNumber);
    c->add_flag("--escalate", o.escalate, "recompute with every dim + 2 and report convergence");
    c = leaf(ham, "anticross", "anti-crossing gap from per-flux coefficient files or the synthetic model", ham_anticross);
    device(c);
    c->add_option("--coeffs", o.coeffs, "coefficient JSON files carrying a flux field")->check(CLI::ExistingFile);
    c->add_option("--g", o.g_mhz, "synthetic coupling in MHz");
    sweep(c, "synthetic detuning in MHz (default -500:500:201)");
    c = leaf(ham, "t1sweep", "Purcell and combined T1 vs detuning", ham_t1sweep);
    device(c);
    c->add_option("--g", o.g_mhz, "coupling in MHz");
    sweep(c, "detuning in MHz (default 20:1000:50)");

    auto *meas = group("measure", "single-shot readout statistics");
    c = leaf(meas, "shots", "simulate single shots", measure_shots);
    device(c);
    shots(c);
    c->add_option("--tint", o.tint, "integration time in s");
    c = leaf(meas, "histogram", "histogram analysis of shots (simulated when no --input)", measure_histogram);
    device(c);
    shots(c);
    c->add_option("--tint", o.tint, "integration time in s");
    c->add_option("--input", o.input, "shots CSV")->check(CLI::ExistingFile);
    c = leaf(meas, "sweep", "fidelity vs integration time", measure_sweep);
    device(c);
    shots(c);
    sweep(c, "integration time in ns (default 20:1000:50)");

    std::vector<std::string> argv_store{"fluxchain"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char *> argv;
    for (const auto &a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion &) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    CLI::App *chosen = nullptr;
    Handler handler;
    for (auto &[cmd, h] : leaves) {
        if (cmd->parsed()) {
            chosen = cmd;
            handler = h;
        }
    }
    if (!chosen) {
        err << "usage error: no subcommand selected\n";
        return 2;
    }
    std::string command = chosen->get_parent()->get_name() + " " + chosen->get_name();

    try {
        if (o.check && o.out.empty()) throw UsageError("--check needs --out");
        auto t0 = std::chrono::steady_clock::now();
        std::unique_ptr<DirLock> lock;
        OutputLayout layout;
        Result r;
        if (!o.out.empty()) {
            // Layout depends only on names, so resolve with a placeholder first
            // to take the lock before computing.
            fs::path p(o.out);
            fs::path dir = (p.has_extension() && !fs::is_directory(p)) ? (p.has_parent_path() ? p.parent_path() : fs::path("."))
                                                                       : p;
            if (!o.check) fs::create_directories(dir);
            if (!fs::is_directory(dir)) throw Error("output directory does not exist: " + dir.string());
            lock = std::make_unique<DirLock>(dir);
        }
        r = handler(o);
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.out.empty()) {
            if (!r.files.empty()) out << r.files.front().content;
            err << r.summary << "\n";
            return 0;
        }
        layout = layout_for(o.out, command, r);
        if (o.check) return check_outputs(layout, r, out, err);
        write_outputs(layout, r, command, o, args, seconds);
        out << r.summary << "\n";
        return 0;
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace fluxchain::cli
