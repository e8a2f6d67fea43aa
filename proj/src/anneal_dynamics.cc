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

#include "fluxchain/anneal_dynamics.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include <Eigen/Dense>

#include "fluxchain/csv_io.h"

namespace fluxchain {

namespace {

// Inductances are expressed in units of kL0 inside the solver, energies in
// (Phi0/2pi)^2 / kL0 and phases in radians.
constexpr double kL0 = 1e-9;
constexpr double kFluxUnit = kPhi0 / kTwoPi;
constexpr double kGradTol = 1e-11;
constexpr double kMaxStep = 0.5;
constexpr int kMaxNewton = 500;

double screening(double inductance, double ic_pair) { return kTwoPi * inductance * ic_pair / kPhi0; }

// Junction term -b [cos(pi x) cos(phi) + d sin(pi x) sin(phi)] of one loop.
struct Junction {
    double b = 0.0;  // 2 Ic, in solver units
    double c = 0.0;
    double ds = 0.0;

    Junction(const LoopModel &m, double phi_x)
        : b(screening(kL0, 2.0 * m.ic_junction)), c(std::cos(kPi * phi_x)),
          ds(m.d_asym * std::sin(kPi * phi_x)) {}

    double energy(double phi) const { return -b * (c * std::cos(phi) + ds * std::sin(phi)); }
    double grad(double phi) const { return b * (c * std::sin(phi) - ds * std::cos(phi)); }
    double curv(double phi) const { return b * (c * std::cos(phi) + ds * std::sin(phi)); }
};

struct CoupledSystem {
    LoopModel loops[2];
    Eigen::Matrix2d kn;  // inverse inductance matrix times kL0

    explicit CoupledSystem(const DeviceParams &p)
        : loops{loop_model(p, Loop::Qubit), loop_model(p, Loop::Qfp)} {
        Eigen::Matrix2d lm;
        lm << loops[0].inductance, -p.m_qub_qfp, -p.m_qub_qfp, loops[1].inductance;
        if (!(lm.determinant() > 0.0)) {
            throw Error("invariant violation: inductance matrix not positive definite");
        }
        kn = kL0 * lm.inverse();
    }
};

struct Evaluator {
    const CoupledSystem &sys;
    Junction j[2];
    Eigen::Vector2d theta_a;

    Evaluator(const CoupledSystem &s, const FluxBias &b)
        : sys(s), j{Junction(s.loops[0], b.phi_x_qub), Junction(s.loops[1], b.phi_x_qfp)},
          theta_a(kTwoPi * b.phi_z_qub, kTwoPi * b.phi_z_qfp) {}

    double energy(const Eigen::Vector2d &phi) const {
        Eigen::Vector2d r = phi - theta_a;
        return 0.5 * r.dot(sys.kn * r) + j[0].energy(phi[0]) + j[1].energy(phi[1]);
    }
    Eigen::Vector2d grad(const Eigen::Vector2d &phi) const {
        Eigen::Vector2d g = sys.kn * (phi - theta_a);
        g[0] += j[0].grad(phi[0]);
        g[1] += j[1].grad(phi[1]);
        return g;
    }
    Eigen::Matrix2d hess(const Eigen::Vector2d &phi) const {
        Eigen::Matrix2d h = sys.kn;
        h(0, 0) += j[0].curv(phi[0]);
        h(1, 1) += j[1].curv(phi[1]);
        return h;
    }
    // Loop currents (A) from the inductive branch: I = K (Phi_a - Phi).
    Eigen::Vector2d currents(const Eigen::Vector2d &phi) const {
        return (kFluxUnit / kL0) * (sys.kn * (theta_a - phi));
    }
};

bool positive_definite(const Eigen::Matrix2d &h) { return h(0, 0) > 0.0 && h.determinant() > 0.0; }

// Damped Newton descent to the local minimum reached from `phi`. At a point
// of non-positive curvature the step follows the softest eigenvector in the
// descending direction; an exact tie goes toward positive phase.
Eigen::Vector2d relax(const Evaluator &ev, Eigen::Vector2d phi, long step_index) {
    for (int it = 0; it < kMaxNewton; ++it) {
        Eigen::Vector2d g = ev.grad(phi);
        Eigen::Matrix2d h = ev.hess(phi);
        bool pd = positive_definite(h);
        if (pd && g.cwiseAbs().maxCoeff() < kGradTol) return phi;

        Eigen::Vector2d dir;
        if (pd) {
            dir = -h.llt().solve(g);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
            Eigen::Vector2d v = es.eigenvectors().col(0);
            double gv = g.dot(v);
            double sgn;
            if (gv != 0.0) {
                sgn = gv > 0.0 ? -1.0 : 1.0;
            } else {
                int k = std::abs(v[1]) >= std::abs(v[0]) ? 1 : 0;
                sgn = v[k] >= 0.0 ? 1.0 : -1.0;
            }
            dir = sgn * kMaxStep * v;
        }
        double norm = dir.cwiseAbs().maxCoeff();
        if (norm > kMaxStep) dir *= kMaxStep / norm;

        // Inside the quadratic basin the energy decrease falls below
        // rounding, so small Newton steps are taken without a line search.
        if (pd && norm < 1e-6) {
            phi += dir;
            continue;
        }

        double e0 = ev.energy(phi);
        double slope = g.dot(dir);
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::Vector2d trial = phi + alpha * dir;
            double e1 = ev.energy(trial);
            if (e1 <= e0 + 1e-4 * alpha * slope && (slope < 0.0 || e1 < e0)) {
                phi = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Energy differences are at rounding level: accept if stationary.
            if (pd && g.cwiseAbs().maxCoeff() < 1e3 * kGradTol) return phi;
            break;
        }
        if (pd && (alpha * dir).cwiseAbs().maxCoeff() < 1e-15) {
            if (g.cwiseAbs().maxCoeff() < 1e3 * kGradTol) return phi;
        }
    }
    throw Error("non-convergent fixed point at step " + std::to_string(step_index));
}

// Residual of the per-loop relation Ip = -(Phi0/2pi)(phi - 2pi phi_tot)/L with
// phi_tot including the mutual flux of the other loop.
void check_fixed_point(const CoupledSystem &sys, const DeviceParams &p, const Evaluator &ev,
                       const Eigen::Vector2d &phi, const Eigen::Vector2d &ip, long step_index) {
    for (int k = 0; k < 2; ++k) {
        double tot = ev.theta_a[k] + kTwoPi * p.m_qub_qfp * ip[1 - k] / kPhi0;
        double ik = -kFluxUnit * (phi[k] - tot) / sys.loops[k].inductance;
        double scale = std::max({std::abs(ip[k]), std::abs(ik), 1e-12});
        if (std::abs(ik - ip[k]) > 1e-10 * scale + 1e-18) {
            throw Error("non-convergent fixed point at step " + std::to_string(step_index));
        }
    }
}

struct Relaxer {
    const DeviceParams &p;
    CoupledSystem sys;
    Eigen::Vector2d phi;
    bool started = false;
    FluxBias last;
    LatchState state;

    explicit Relaxer(const DeviceParams &params) : p(params), sys(params) {}

    const LatchState &advance(const FluxBias &b, long step_index) {
        if (started && b == last) return state;
        Evaluator ev(sys, b);
        if (!started) phi = ev.theta_a;
        phi = relax(ev, phi, step_index);
        Eigen::Vector2d ip = ev.currents(phi);
        check_fixed_point(sys, p, ev, phi, ip, step_index);
        state = LatchState{phi[0], phi[1], ip[0], ip[1]};
        last = b;
        started = true;
        return state;
    }
};

std::vector<double> time_grid(const BiasSchedule &s, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive and finite");
    double t0 = s.start_time();
    double t1 = s.end_time();
    double ramp = s.shortest_ramp();
    if (std::isfinite(ramp) && ramp / dt < 100.0 * (1.0 - 1e-9)) {
        throw Error("unresolved ramp: shortest ramp " + format_double(ramp) + " s needs dt <= " +
                    format_double(ramp / 100.0) + " s");
    }
    std::vector<double> t;
    long n = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
    if (n < 1) n = (t1 > t0) ? 1 : 0;
    t.reserve(static_cast<size_t>(n) + 1);
    for (long k = 0; k < n; ++k) t.push_back(t0 + static_cast<double>(k) * dt);
    t.push_back(t1);
    if (t.size() >= 2 && t[t.size() - 2] >= t.back()) t.erase(t.end() - 2);
    return t;
}

FluxBias physical_at(const DeviceParams &p, const BiasSchedule &s, double t, double qfp_offset) {
    FluxBias b = physical_bias(p, s.eval(t));
    b.phi_z_qfp += qfp_offset;
    return b;
}

}  // namespace

double qubit_loop_inductance(const DeviceParams &p) {
    double ratio = p.ip_qub / (2.0 * p.ic_x_qub);
    if (!(ratio < 1.0)) throw Error("invariant violation: ip_qub must be below 2*ic_x_qub");
    double phase = kPi - std::asin(ratio);
    double beta = phase / std::sin(phase);
    return beta * kPhi0 / (kTwoPi * 2.0 * p.ic_x_qub);
}

LoopModel loop_model(const DeviceParams &p, Loop loop) {
    if (loop == Loop::Qubit) return LoopModel{qubit_loop_inductance(p), p.ic_x_qub, p.d_asym};
    return LoopModel{p.l_qfp, p.ic_x_qfp, 0.0};
}

double effective_ic(const LoopModel &m, double phi_x) {
    double c = std::cos(kPi * phi_x);
    double s = std::sin(kPi * phi_x);
    double mag = 2.0 * m.ic_junction * std::sqrt(c * c + m.d_asym * m.d_asym * s * s);
    return c < 0.0 ? -mag : mag;
}

double potential(const DeviceParams &p, Loop loop, double phase, const FluxBias &bias,
                 double external_flux) {
    LoopModel m = loop_model(p, loop);
    double phi_x = loop == Loop::Qubit ? bias.phi_x_qub : bias.phi_x_qfp;
    double phi_z = (loop == Loop::Qubit ? bias.phi_z_qub : bias.phi_z_qfp) + external_flux;
    double r = phase - kTwoPi * phi_z;
    double inductive = kFluxUnit * kFluxUnit / (2.0 * m.inductance) * r * r;
    double junction = -kFluxUnit * 2.0 * m.ic_junction *
                      (std::cos(kPi * phi_x) * std::cos(phase) +
                       m.d_asym * std::sin(kPi * phi_x) * std::sin(phase));
    return inductive + junction;
}

double degeneracy_flux(const LoopModel &m, double phi_x) {
    double t = std::tan(kPi * phi_x);
    return std::atan(m.d_asym * t) / kTwoPi;
}

double double_well_onset(const DeviceParams &p, Loop loop) {
    LoopModel m = loop_model(p, loop);
    const double beta = screening(m.inductance, 2.0 * m.ic_junction);
    const double span = beta + 1.0;
    constexpr int kGrid = 20001;
    auto minima = [&](double phi_x) {
        double c = std::cos(kPi * phi_x);
        double ds = m.d_asym * std::sin(kPi * phi_x);
        int count = 0;
        double prev = 0.0;
        for (int i = 0; i < kGrid; ++i) {
            double phi = -span + 2.0 * span * i / (kGrid - 1);
            double d = phi + beta * (c * std::sin(phi) - ds * std::cos(phi));
            if (i > 0 && prev < 0.0 && d >= 0.0) ++count;
            prev = d;
        }
        return count;
    };
    if (minima(1.0) < 2) throw Error("loop has no double well at phi_x = 1");
    double lo = 0.5, hi = 1.0;
    if (minima(lo) >= 2) return lo;
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        (minima(mid) >= 2 ? hi : lo) = mid;
    }
    return hi;
}

BiasSchedule readout_protocol(const DeviceParams &p, double tilt, double ramp_time) {
    if (!(ramp_time > 0.0)) throw Error("ramp_time must be positive");
    const double r = ramp_time;
    const double oz = p.flux_offset_z;
    const double ox = p.flux_offset_x;
    BiasSchedule s;

    LoopModel q = loop_model(p, Loop::Qubit);
    double beta = screening(q.inductance, 2.0 * q.ic_junction);
    std::vector<Breakpoint> zq{{0.0, tilt - oz}};
    double d = q.d_asym;
    if (d > 0.0 && beta * d < 1.0) {
        // Bistability onset on (0.5, 1]: beta^2 (cos^2 + d^2 sin^2) = 1.
        double c2 = (1.0 / (beta * beta) - d * d) / (1.0 - d * d);
        double x_on = 1.0 - std::acos(std::sqrt(std::clamp(c2, 0.0, 1.0))) / kPi;
        constexpr int kTrack = 64;
        zq.clear();
        zq.push_back({0.0, tilt + degeneracy_flux(q, x_on) - oz});
        for (int i = 0; i <= kTrack; ++i) {
            double x = x_on + (1.0 - x_on) * i / kTrack;
            double deg = i == kTrack ? 0.0 : degeneracy_flux(q, x);
            zq.push_back({0.1 * r + x * r, tilt + deg - oz});
        }
    }
    s.set_line(ControlLine::ZQub, std::move(zq));
    s.set_line(ControlLine::XQub,
               {{0.1 * r, 0.0 - ox}, {1.1 * r, 1.0 - ox}, {3.3 * r, 1.0 - ox}, {4.3 * r, 0.0 - ox}});
    s.set_line(ControlLine::XQfp, {{1.2 * r, 0.5}, {2.2 * r, 1.0}});
    s.set_line(ControlLine::ZQfp, {{0.0, 0.0}});
    s.set_line(ControlLine::ZTres, {{0.0, 0.25}, {5.0 * r, 0.25}});
    return s;
}

double AnnealTrace::amplification_ratio() const {
    double mq = 0.0, mf = 0.0;
    for (const auto &st : state) {
        mq = std::max(mq, std::abs(st.ip_qub));
        mf = std::max(mf, std::abs(st.ip_qfp));
    }
    if (mq == 0.0) throw Error("qubit carries no current");
    return mf / mq;
}

AnnealTrace simulate_anneal(const DeviceParams &p, const BiasSchedule &s, double dt,
                            const AnnealOptions &opt) {
    p.validate();
    std::vector<double> grid = time_grid(s, dt);
    Relaxer relaxer(p);
    AnnealTrace trace;
    if (!opt.final_only) {
        trace.t.reserve(grid.size());
        trace.bias.reserve(grid.size());
        trace.state.reserve(grid.size());
    }
    for (size_t k = 0; k < grid.size(); ++k) {
        FluxBias b = physical_at(p, s, grid[k], opt.qfp_flux_offset);
        const LatchState &st = relaxer.advance(b, static_cast<long>(k));
        if (!opt.final_only || k + 1 == grid.size()) {
            trace.t.push_back(grid[k]);
            trace.bias.push_back(b);
            trace.state.push_back(st);
        }
    }
    return trace;
}

std::string anneal_trace_csv(const AnnealTrace &trace) {
    CsvWriter w({"t_s", "phi_x_qub", "phi_z_qub", "phi_x_qfp", "phi_z_qfp", "ip_qub_na", "ip_qfp_na"});
    for (size_t k = 0; k < trace.t.size(); ++k) {
        const FluxBias &b = trace.bias[k];
        const LatchState &st = trace.state[k];
        w.row({trace.t[k], b.phi_x_qub, b.phi_z_qub, b.phi_x_qfp, b.phi_z_qfp, st.ip_qub * 1e9,
               st.ip_qfp * 1e9});
    }
    return w.str();
}

std::vector<SCurveSample> run_scurve_experiment(const DeviceParams &p, const BiasSchedule &s,
                                                std::span<const double> sweep,
                                                const SCurveExperiment &exp) {
    p.validate();
    if (!(exp.sigma_phi >= 0.0)) throw Error("sigma_phi must be nonnegative");
    if (exp.n_shots < 1) throw Error("n_shots must be positive");
    double dt = exp.dt > 0.0 ? exp.dt : s.shortest_ramp() / 100.0;
    if (!std::isfinite(dt)) dt = std::max(s.end_time() - s.start_time(), 1e-9);

    // The bias path is shared by all shots of one sweep point; only the
    // distinct consecutive values need a relaxation.
    std::vector<std::vector<FluxBias>> paths(sweep.size());
    for (size_t i = 0; i < sweep.size(); ++i) {
        BiasSchedule si = s;
        si.set_line(ControlLine::ZQfp, {{0.0, sweep[i]}});
        std::vector<double> grid = time_grid(si, dt);
        for (double t : grid) {
            FluxBias b = physical_at(p, si, t, 0.0);
            if (paths[i].empty() || !(paths[i].back() == b)) paths[i].push_back(b);
        }
    }

    const long n_total = static_cast<long>(sweep.size()) * exp.n_shots;
    std::vector<unsigned char> positive(static_cast<size_t>(n_total), 0);
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (!failed.load()) {
            long task = next.fetch_add(1);
            if (task >= n_total) break;
            size_t i = static_cast<size_t>(task / exp.n_shots);
            long shot = task % exp.n_shots;
            double offset = 0.0;
            if (exp.sigma_phi > 0.0) {
                std::mt19937_64 rng(stream_seed(exp.seed, i, static_cast<uint64_t>(shot)));
                std::normal_distribution<double> normal(0.0, exp.sigma_phi);
                offset = normal(rng);
            }
            try {
                Relaxer relaxer(p);
                const LatchState *st = nullptr;
                long k = 0;
                for (FluxBias b : paths[i]) {
                    b.phi_z_qfp += offset;
                    st = &relaxer.advance(b, k++);
                }
                positive[static_cast<size_t>(task)] = st->ip_qfp > 0.0;
            } catch (const Error &e) {
                std::lock_guard lock(failure_mutex);
                if (!failed.exchange(true)) failure = e.what();
            }
        }
    };
    unsigned n_threads = exp.threads > 0 ? static_cast<unsigned>(exp.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<long>(n_threads, n_total));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failed) throw Error(failure);

    std::vector<SCurveSample> out;
    out.reserve(sweep.size());
    for (size_t i = 0; i < sweep.size(); ++i) {
        long hits = 0;
        for (long j = 0; j < exp.n_shots; ++j) {
            hits += positive[i * static_cast<size_t>(exp.n_shots) + static_cast<size_t>(j)];
        }
        out.push_back(SCurveSample{sweep[i], hits, exp.n_shots});
    }
    return out;
}

}  // namespace fluxchain
