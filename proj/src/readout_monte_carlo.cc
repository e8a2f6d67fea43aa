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

#include "fluxchain/readout_monte_carlo.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "fluxchain/qfp_analytics.h"
#include "fluxchain/tunable_resonator.h"
#include "json.hpp"

namespace fluxchain {

namespace {

constexpr double kFitWindow = 4.0;

// Variance of a unit normal truncated to +-k.
double truncated_variance(double k) {
    double pdf = std::exp(-0.5 * k * k) / std::sqrt(kTwoPi);
    double mass = std::erf(k / std::sqrt(2.0));
    return 1.0 - 2.0 * k * pdf / mass;
}

// P(X > t) for X ~ N(mean, sigma); a step for sigma = 0.
double upper_tail(double t, double mean, double sigma) {
    if (sigma == 0.0) return mean > t ? 1.0 : (mean == t ? 0.5 : 0.0);
    return 0.5 * std::erfc((t - mean) / (std::sqrt(2.0) * sigma));
}

// P(X < t), computed directly so deep tails keep full precision.
double lower_tail(double t, double mean, double sigma) { return upper_tail(-t, -mean, sigma); }

}  // namespace

char state_label(ReadoutState s) { return s == ReadoutState::L ? 'L' : 'R'; }

ReadoutState parse_state_label(std::string_view label) {
    if (label == "L") return ReadoutState::L;
    if (label == "R") return ReadoutState::R;
    throw Error("unknown state label '" + std::string(label) + "'");
}

double ReadoutModel::mean_signal(ReadoutState s, double t) const {
    double level = s == ReadoutState::L ? level_l : level_r;
    double tau = 2.0 / kappa;
    return scale * (level * t + (level_pre - level) * tau * -std::expm1(-t / tau));
}

double ReadoutModel::noise_sigma(double t) const { return noise_sigma_rate * std::sqrt(t); }

ReadoutModel calibrated_readout_model(const DeviceParams &p, const ReadoutCalibration &cal) {
    p.validate();
    ResonatorModel res = calibrated_resonator(p);
    ReadoutModel m;
    m.f_l = resonant_freq(res, cal.op_point - cal.half_step);
    m.f_r = resonant_freq(res, cal.op_point + cal.half_step);
    m.f_drive = m.f_l;
    m.kappa = decay_rate(m.f_drive, p.q_total).kappa;
    S21Params line{m.f_l, p.q_total, p.q_external, 0.0, 1.0};
    m.level_l = s21_model(m.f_drive, line);
    line.f0 = m.f_r;
    m.level_r = s21_model(m.f_drive, line);
    m.level_pre = line.amplitude;
    m.scale = 1.0;
    double sep = std::abs(m.mean_signal(ReadoutState::R, cal.normalization_time) -
                          m.mean_signal(ReadoutState::L, cal.normalization_time));
    if (!(sep > 0.0)) throw Error("readout states are indistinguishable");
    m.scale = 1.0 / sep;

    double dphi = qubit_flux_signal(p);
    SCurveFit left{-dphi / 2.0, cal.qfp_width, 0.0, 0.0, 0.0};
    SCurveFit right{dphi / 2.0, cal.qfp_width, 0.0, 0.0, 0.0};
    m.p_mislatch = 0.5 * (1.0 - separation_fidelity(left, right).f_sep_max);
    m.eps_prep = cal.eps_prep;
    m.noise_sigma_rate = calibrate_noise(cal.target_overlap, cal.t_calibration, m);
    return m;
}

ShotRecord simulate_shot(ReadoutState state, double t_int, const ReadoutModel &model,
                         std::mt19937_64 &rng) {
    if (!(t_int >= 2e-9)) throw Error("integration time must be at least 2 ns");
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    ReadoutState actual = state;
    if (uniform(rng) < model.flip_probability()) {
        actual = state == ReadoutState::L ? ReadoutState::R : ReadoutState::L;
    }
    double signal = model.mean_signal(actual, t_int) + model.noise_sigma(t_int) * normal(rng);
    return ShotRecord{state, signal, t_int};
}

std::vector<ShotRecord> simulate_shots(const ReadoutModel &model, double t_int, long n_per_state,
                                       uint64_t seed, uint64_t stream) {
    if (n_per_state < 1) throw Error("shot count must be positive");
    std::vector<ShotRecord> shots;
    shots.reserve(2 * static_cast<size_t>(n_per_state));
    for (ReadoutState s : {ReadoutState::L, ReadoutState::R}) {
        uint64_t tag = 2 * stream + (s == ReadoutState::L ? 0 : 1);
        for (long i = 0; i < n_per_state; ++i) {
            std::mt19937_64 rng(stream_seed(seed, tag, static_cast<uint64_t>(i)));
            shots.push_back(simulate_shot(s, t_int, model, rng));
        }
    }
    return shots;
}

GaussianFit fit_dominant_gaussian(std::span<const double> values) {
    if (values.empty()) throw Error("no values to fit");
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    const size_t n = x.size();
    auto median_of = [](const std::vector<double> &v) {
        size_t h = v.size() / 2;
        return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    };
    double mean = median_of(x);
    std::vector<double> dev(n);
    for (size_t i = 0; i < n; ++i) dev[i] = std::abs(x[i] - mean);
    std::sort(dev.begin(), dev.end());
    double sigma = 1.4826 * median_of(dev);
    if (sigma == 0.0) {
        long same = std::count(x.begin(), x.end(), mean);
        return GaussianFit{mean, 0.0, static_cast<double>(same) / static_cast<double>(n)};
    }
    const double correction = 1.0 / std::sqrt(truncated_variance(kFitWindow));
    size_t lo = n, hi = n;
    for (int it = 0; it < 200; ++it) {
        size_t a = static_cast<size_t>(std::lower_bound(x.begin(), x.end(), mean - kFitWindow * sigma) - x.begin());
        size_t b = static_cast<size_t>(std::upper_bound(x.begin(), x.end(), mean + kFitWindow * sigma) - x.begin());
        if (a == lo && b == hi) {
            return GaussianFit{mean, sigma, static_cast<double>(b - a) / static_cast<double>(n)};
        }
        if (b - a < 3) throw Error("fit non-convergence: window holds too few shots");
        lo = a;
        hi = b;
        double s = 0.0;
        for (size_t i = a; i < b; ++i) s += x[i];
        mean = s / static_cast<double>(b - a);
        double ss = 0.0;
        for (size_t i = a; i < b; ++i) ss += (x[i] - mean) * (x[i] - mean);
        sigma = std::sqrt(ss / static_cast<double>(b - a - 1)) * correction;
        if (sigma == 0.0) return GaussianFit{mean, 0.0, static_cast<double>(b - a) / static_cast<double>(n)};
    }
    throw Error("fit non-convergence: window did not settle");
}

double gaussian_threshold(const GaussianFit &a, const GaussianFit &b) {
    const double mid = 0.5 * (a.mean + b.mean);
    if (a.sigma == b.sigma || a.sigma == 0.0 || b.sigma == 0.0) return mid;
    // (x - m1)^2 / s1^2 - (x - m2)^2 / s2^2 + 2 ln(s1 / s2) = 0
    const double i1 = 1.0 / (a.sigma * a.sigma);
    const double i2 = 1.0 / (b.sigma * b.sigma);
    const double qa = i1 - i2;
    const double qb = -2.0 * (a.mean * i1 - b.mean * i2);
    const double qc = a.mean * a.mean * i1 - b.mean * b.mean * i2 + 2.0 * std::log(a.sigma / b.sigma);
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return mid;
    const double sq = std::sqrt(disc);
    // Numerically stable pair of roots.
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    const double lo = std::min(a.mean, b.mean);
    const double hi = std::max(a.mean, b.mean);
    for (double r : {q / qa, qc / q}) {
        if (std::isfinite(r) && r >= lo && r <= hi) return r;
    }
    return mid;
}

double overlap_error(const GaussianFit &fit_l, const GaussianFit &fit_r) {
    if (fit_l.mean == fit_r.mean) return 1.0;
    const GaussianFit &low = fit_l.mean < fit_r.mean ? fit_l : fit_r;
    const GaussianFit &high = fit_l.mean < fit_r.mean ? fit_r : fit_l;
    double t = gaussian_threshold(low, high);
    return upper_tail(t, low.mean, low.sigma) + lower_tail(t, high.mean, high.sigma);
}

HistogramAnalysis analyze_histograms(std::span<const ShotRecord> shots) {
    std::vector<double> xl, xr;
    for (const auto &s : shots) (s.prepared == ReadoutState::L ? xl : xr).push_back(s.integrated_signal);
    if (xl.size() < 1000 || xr.size() < 1000) {
        throw Error("histogram analysis needs at least 1000 shots of each prepared state");
    }
    HistogramAnalysis a;
    a.n_l = static_cast<long>(xl.size());
    a.n_r = static_cast<long>(xr.size());
    a.fit_l = fit_dominant_gaussian(xl);
    a.fit_r = fit_dominant_gaussian(xr);
    if (a.fit_l.mean == a.fit_r.mean) throw Error("single-peak degenerate data");
    a.threshold = gaussian_threshold(a.fit_l, a.fit_r);

    // Shots at or above the threshold are read as the state with the higher mean.
    const bool r_high = a.fit_r.mean > a.fit_l.mean;
    auto reads_r = [&](double x) { return (x >= a.threshold) == r_high; };
    long l_as_r = std::count_if(xl.begin(), xl.end(), reads_r);
    long r_as_l = std::count_if(xr.begin(), xr.end(), [&](double x) { return !reads_r(x); });
    a.p_r_given_l = static_cast<double>(l_as_r) / static_cast<double>(a.n_l);
    a.p_l_given_r = static_cast<double>(r_as_l) / static_cast<double>(a.n_r);
    a.fidelity = 1.0 - (a.p_l_given_r + a.p_r_given_l);

    auto wrong_side = [&](const GaussianFit &f, bool is_r) {
        return (r_high != is_r) ? upper_tail(a.threshold, f.mean, f.sigma)
                                : lower_tail(a.threshold, f.mean, f.sigma);
    };
    double tail_l = wrong_side(a.fit_l, false);
    double tail_r = wrong_side(a.fit_r, true);
    a.predicted_p_r_given_l = a.fit_l.weight * tail_l + (1.0 - a.fit_l.weight) * (1.0 - tail_r);
    a.predicted_p_l_given_r = a.fit_r.weight * tail_r + (1.0 - a.fit_r.weight) * (1.0 - tail_l);

    a.overlap_error = overlap_error(a.fit_l, a.fit_r);
    double pooled = std::sqrt(0.5 * (a.fit_l.sigma * a.fit_l.sigma + a.fit_r.sigma * a.fit_r.sigma));
    double d = std::abs(a.fit_r.mean - a.fit_l.mean);
    a.sigma_separation = pooled > 0.0 ? d / pooled : std::numeric_limits<double>::infinity();
    return a;
}

double calibrate_noise(double target_overlap, double t_int, const ReadoutModel &model) {
    if (!(target_overlap > 0.0 && target_overlap < 1.0)) {
        throw Error("target overlap must lie in (0, 1)");
    }
    if (!(t_int >= 2e-9)) throw Error("integration time must be at least 2 ns");
    // Equal sigmas: overlap = erfc(d / (2 sqrt2 sigma)).
    double d = std::abs(model.mean_signal(ReadoutState::R, t_int) - model.mean_signal(ReadoutState::L, t_int));
    double z = boost::math::erfc_inv(target_overlap);
    double rate = z > 0.0 ? d / (2.0 * std::sqrt(2.0) * z * std::sqrt(t_int))
                          : std::numeric_limits<double>::infinity();
    if (!(rate <= kMaxNoiseRate)) {
        throw Error("unattainable overlap target: noise rate exceeds " + format_double(kMaxNoiseRate));
    }
    return rate;
}

std::vector<FidelityPoint> fidelity_vs_time(const ReadoutModel &model, std::span<const double> times,
                                            long n_per_state, uint64_t seed) {
    std::vector<FidelityPoint> out;
    for (size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw Error("integration times must be positive");
        auto shots = simulate_shots(model, times[i], n_per_state, seed, i);
        HistogramAnalysis a = analyze_histograms(shots);
        out.push_back(FidelityPoint{times[i], a.fidelity, a.overlap_error});
    }
    return out;
}

std::string shots_csv(std::span<const ShotRecord> shots) {
    CsvWriter w({"prepared", "integrated_signal", "t_int_s"});
    for (const auto &s : shots) {
        w.row({std::string(1, state_label(s.prepared)), format_double(s.integrated_signal),
               format_double(s.integration_time)});
    }
    return w.str();
}

std::vector<ShotRecord> parse_shots(const CsvTable &table) {
    size_t cp = table.column("prepared");
    std::vector<double> sig = table.numeric_column("integrated_signal");
    std::vector<double> tint = table.numeric_column("t_int_s");
    std::vector<ShotRecord> out;
    out.reserve(sig.size());
    for (size_t i = 0; i < sig.size(); ++i) {
        out.push_back(ShotRecord{parse_state_label(table.rows[i][cp]), sig[i], tint[i]});
    }
    return out;
}

std::string histogram_report_json(const HistogramAnalysis &a) {
    auto fit = [](const GaussianFit &f) {
        return nlohmann::json{{"mean", f.mean}, {"sigma", f.sigma}, {"weight", f.weight}};
    };
    nlohmann::json j{
        {"fit_l", fit(a.fit_l)},
        {"fit_r", fit(a.fit_r)},
        {"threshold", a.threshold},
        {"fidelity", a.fidelity},
        {"p_l_given_r", a.p_l_given_r},
        {"p_r_given_l", a.p_r_given_l},
        {"predicted_p_l_given_r", a.predicted_p_l_given_r},
        {"predicted_p_r_given_l", a.predicted_p_r_given_l},
        {"overlap_error", a.overlap_error},
        {"sigma_separation", std::isfinite(a.sigma_separation) ? nlohmann::json(a.sigma_separation)
                                                               : nlohmann::json("inf")},
        {"n_l", a.n_l},
        {"n_r", a.n_r},
    };
    return j.dump(2);
}

}  // namespace fluxchain
