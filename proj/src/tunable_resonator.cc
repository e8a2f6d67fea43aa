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

#include "fluxchain/tunable_resonator.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <thread>

#include "fluxchain/least_squares.h"

namespace fluxchain {

ResonatorModel calibrated_resonator(const DeviceParams &p) {
    ResonatorModel m;
    m.z0 = p.z0_tres;
    m.ic_tres = p.ic_tres;
    m.l_tres = p.l_tres;
    m.q_total = p.q_total;
    m.q_external = p.q_external;
    if (m.beta_rf() >= 1.0) {
        throw Error("tunable resonator: beta_rf >= 1 (multivalued regime)");
    }
    // At phi = 0 the boundary condition inverts in closed form.
    const double l0 = m.l_tres / (1.0 + m.beta_rf());
    const double x = std::atan(m.z0 / (kTwoPi * p.f_res_max * l0));
    m.f_bare = kPi * p.f_res_max / (2.0 * x);
    return m;
}

double squid_phase(const ResonatorModel &m, double phi) {
    const double beta = m.beta_rf();
    if (beta >= 1.0) {
        throw Error("squid_phase: multivalued regime (beta_rf >= 1)");
    }
    const double target = kTwoPi * phi;
    if (target == 0.0) {
        return 0.0;
    }
    // g is strictly increasing with g' >= 1 - beta; root lies within beta of target.
    double lo = target - beta;
    double hi = target + beta;
    double x = target / (1.0 + beta);
    for (int it = 0; it < 200; ++it) {
        double g = x + beta * std::sin(x) - target;
        if (std::abs(g) < 1e-13) {
            break;
        }
        if (g > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        double step = g / (1.0 + beta * std::cos(x));
        double xn = x - step;
        if (!(xn > lo && xn < hi)) {
            xn = 0.5 * (lo + hi);
        }
        if (xn == x) {
            break;
        }
        x = xn;
    }
    return x;
}

namespace {

// |phi| reduced to [0, 0.5]; the model is even and 1-periodic.
double reduce_flux(double phi) { return std::abs(std::remainder(phi, 1.0)); }

}  // namespace

double squid_inductance(const ResonatorModel &m, double phi) {
    double ps = squid_phase(m, reduce_flux(phi));
    return m.l_tres / (1.0 + m.beta_rf() * std::cos(ps));
}

double resonant_freq(const ResonatorModel &m, double phi) {
    if (!(m.f_bare > 0.0)) {
        throw Error("resonant_freq: model has no calibrated f_bare");
    }
    const double r = reduce_flux(phi);
    if (r > 0.5 - kResonatorWindow) {
        throw Error("resonant_freq: flux lies in the nonlinear window around Phi0/2");
    }
    const double ls = squid_inductance(m, r);
    // tan x = c / x with x = pi f / (2 f_bare); solve x sin x - c cos x = 0 on (0, pi/2).
    const double c = m.z0 / (4.0 * m.f_bare * ls);
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw Error("resonant_freq: cannot bracket root (z0 / (4 f_bare L_s) = " + std::to_string(c) + ")");
    }
    double lo = 0.0, hi = kPi / 2.0;
    double x = std::min(std::atan(c) , hi);
    auto h = [c](double v) { return v * std::sin(v) - c * std::cos(v); };
    for (int it = 0; it < 200; ++it) {
        double hv = h(x);
        if (hv == 0.0) {
            break;
        }
        if (hv > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        double dh = std::sin(x) + x * std::cos(x) + c * std::sin(x);
        double xn = x - hv / dh;
        if (!(xn > lo && xn < hi)) {
            xn = 0.5 * (lo + hi);
        }
        if (std::abs(xn - x) <= 1e-16 * x) {
            x = xn;
            break;
        }
        x = xn;
    }
    if (!(x > 0.0 && x < kPi / 2.0)) {
        throw Error("resonant_freq: root finder failed to converge");
    }
    return 2.0 * m.f_bare * x / kPi;
}

double flux_sensitivity(const ResonatorModel &m, double phi) {
    const double h = kSensitivityStep;
    double dfdphi = (resonant_freq(m, phi + h) - resonant_freq(m, phi - h)) / (2.0 * h);
    return dfdphi * 1e-9;  // Hz/Phi0 -> MHz/mPhi0
}

StateShift state_shift(const ResonatorModel &m, double op_point, double delta_phi) {
    StateShift s;
    s.shift_hz = resonant_freq(m, op_point + delta_phi) - resonant_freq(m, op_point - delta_phi);
    s.linewidth_hz = resonant_freq(m, op_point) / m.q_total;
    s.shift_over_linewidth = s.shift_hz / s.linewidth_hz;
    return s;
}

double S21Params::q_external() const { return q_e_tilde / std::cos(phi_asym); }

double S21Params::inverse_q_internal() const { return 1.0 / q_total - 1.0 / q_external(); }

double s21_model(double f, const S21Params &p) {
    using cd = std::complex<double>;
    const cd num = (p.q_total / p.q_e_tilde) * std::exp(cd(0.0, p.phi_asym));
    const cd den(1.0, 2.0 * p.q_total * (f - p.f0) / p.f0);
    return p.amplitude * std::abs(1.0 - num / den);
}

namespace {

struct Initial {
    S21Params guess;
    double span_linewidths;
};

Initial initial_guess(std::span<const std::pair<double, double>> trace) {
    const size_t n = trace.size();
    std::vector<std::pair<double, double>> t(trace.begin(), trace.end());
    std::sort(t.begin(), t.end());
    size_t imin = 0;
    for (size_t i = 1; i < n; ++i) {
        if (t[i].second < t[imin].second) {
            imin = i;
        }
    }
    const size_t edge = std::max<size_t>(1, n / 20);
    double a = 0.0;
    for (size_t i = 0; i < edge; ++i) {
        a += t[i].second + t[n - 1 - i].second;
    }
    a /= 2.0 * edge;
    const double smin = t[imin].second;
    const double level = std::sqrt(0.5 * (smin * smin + a * a));
    // half-power crossings on each side of the dip
    double fl = NAN, fr = NAN;
    for (size_t i = imin; i > 0; --i) {
        if (t[i - 1].second >= level) {
            double u = (level - t[i].second) / (t[i - 1].second - t[i].second);
            fl = t[i].first + u * (t[i - 1].first - t[i].first);
            break;
        }
    }
    for (size_t i = imin; i + 1 < n; ++i) {
        if (t[i + 1].second >= level) {
            double u = (level - t[i].second) / (t[i + 1].second - t[i].second);
            fr = t[i].first + u * (t[i + 1].first - t[i].first);
            break;
        }
    }
    Initial out;
    if (!std::isfinite(fl) || !std::isfinite(fr) || !(fr > fl)) {
        out.span_linewidths = 0.0;
        return out;
    }
    const double fwhm = fr - fl;
    const double f0 = t[imin].first;
    out.span_linewidths = (t.back().first - t.front().first) / fwhm;
    out.guess.f0 = f0;
    out.guess.q_total = f0 / fwhm;
    out.guess.amplitude = a;
    double depth = std::clamp(1.0 - smin / a, 0.05, 1.95);
    out.guess.q_e_tilde = out.guess.q_total / depth;
    out.guess.phi_asym = 0.0;
    return out;
}

S21Params fit_from(std::span<const std::pair<double, double>> trace, std::span<const double> y,
                   const S21Params &start) {
    const int n = static_cast<int>(trace.size());
    const double fref = start.f0;
    ResidualFn f = [&](const Eigen::VectorXd &p, Eigen::VectorXd &r) {
        S21Params s{fref * (1.0 + p[0]), p[1], p[2], p[3], p[4]};
        for (int i = 0; i < n; ++i) {
            r[i] = s21_model(trace[i].first, s) - y[i];
        }
    };
    Eigen::VectorXd p0(5);
    p0 << 0.0, start.q_total, start.q_e_tilde, start.phi_asym, start.amplitude;
    LmOptions lo;
    lo.step_floor = Eigen::VectorXd::Constant(5, 1e-10);
    lo.step_floor[0] = 1e-11;
    LmResult res = levenberg_marquardt(f, p0, n, lo);
    if (!res.converged) {
        throw Error("S21 fit did not converge");
    }
    S21Params out{fref * (1.0 + res.params[0]), res.params[1], res.params[2], res.params[3], res.params[4]};
    if (!(out.q_total > 0.0) || !(std::abs(out.phi_asym) < kPi / 2.0)) {
        throw Error("S21 fit converged outside the physical region (Q <= 0 or |phi| >= pi/2)");
    }
    return out;
}

void check_trace(std::span<const std::pair<double, double>> trace) {
    if (trace.size() < 20) {
        throw Error("S21 fit needs at least 20 points");
    }
}

}  // namespace

S21Params fit_s21_point(std::span<const std::pair<double, double>> trace) {
    check_trace(trace);
    Initial init = initial_guess(trace);
    if (init.span_linewidths < 3.0) {
        throw Error("insufficient span: trace must cover at least 3 linewidths");
    }
    std::vector<double> y(trace.size());
    for (size_t i = 0; i < trace.size(); ++i) {
        y[i] = trace[i].second;
    }
    return fit_from(trace, y, init.guess);
}

S21Fit fit_s21(std::span<const std::pair<double, double>> trace, const S21FitOptions &opt) {
    S21Fit out;
    out.params = fit_s21_point(trace);
    out.q_external = out.params.q_external();
    out.inverse_q_internal = out.params.inverse_q_internal();
    out.unphysical_internal_q = out.inverse_q_internal < 0.0;
    out.n_bootstrap = std::max(opt.n_bootstrap, 0);
    if (out.n_bootstrap < 2) {
        return out;
    }

    const size_t n = trace.size();
    std::vector<double> model(n), resid(n);
    for (size_t i = 0; i < n; ++i) {
        model[i] = s21_model(trace[i].first, out.params);
        resid[i] = trace[i].second - model[i];
    }
    std::vector<S21Params> draws(out.n_bootstrap);
    std::vector<char> failed(out.n_bootstrap, 0);
    auto work = [&](int b) {
        std::mt19937_64 rng(stream_seed(opt.seed, static_cast<uint64_t>(b)));
        std::uniform_int_distribution<size_t> pick(0, n - 1);
        std::vector<double> y(n);
        for (size_t i = 0; i < n; ++i) {
            y[i] = model[i] + resid[pick(rng)];
        }
        try {
            draws[b] = fit_from(trace, y, out.params);
        } catch (const Error &) {
            failed[b] = 1;
        }
    };
    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, out.n_bootstrap);
    if (threads <= 1) {
        for (int b = 0; b < out.n_bootstrap; ++b) {
            work(b);
        }
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (int b = w; b < out.n_bootstrap; b += threads) {
                    work(b);
                }
            });
        }
    }

    auto stdev = [&](auto get) {
        std::vector<double> v;
        for (int b = 0; b < out.n_bootstrap; ++b) {
            if (!failed[b]) {
                v.push_back(get(draws[b]));
            }
        }
        if (v.size() < 2) {
            throw Error("S21 bootstrap: fewer than two successful resamples");
        }
        double mean = 0.0;
        for (double x : v) {
            mean += x;
        }
        mean /= v.size();
        double ss = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        return std::sqrt(ss / (v.size() - 1));
    };
    out.sigma.f0 = stdev([](const S21Params &s) { return s.f0; });
    out.sigma.q_total = stdev([](const S21Params &s) { return s.q_total; });
    out.sigma.q_e_tilde = stdev([](const S21Params &s) { return s.q_e_tilde; });
    out.sigma.phi_asym = stdev([](const S21Params &s) { return s.phi_asym; });
    out.sigma.amplitude = stdev([](const S21Params &s) { return s.amplitude; });
    out.q_external_sigma = stdev([](const S21Params &s) { return s.q_external(); });
    return out;
}

DecayRate decay_rate(double f0, double q) {
    if (!(f0 > 0.0) || !(q > 0.0)) {
        throw Error("decay_rate: inputs must be positive");
    }
    DecayRate d;
    d.kappa = kTwoPi * f0 / q;
    d.ringup = 1.0 / d.kappa;
    return d;
}

}  // namespace fluxchain
