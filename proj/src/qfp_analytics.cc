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

#include "fluxchain/qfp_analytics.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "fluxchain/least_squares.h"

namespace fluxchain {

double beta_l(const DeviceParams &p, double phi_x_qfp) {
    // cos(pi x) evaluated through the reduced argument so that odd
    // multiples of 0.5 give exactly zero.
    double r = std::remainder(phi_x_qfp, 2.0);
    double c;
    if (std::abs(r) == 0.5) {
        c = 0.0;
    } else {
        c = std::cos(kPi * r);
    }
    return 4.0 * kPi * p.ic_x_qfp * p.l_qfp * c / kPhi0;
}

double susceptibility(const DeviceParams &p, double beta) {
    if (beta == -1.0) {
        throw Error("susceptibility pole at beta = -1");
    }
    if (std::isinf(beta)) {
        return 1.0 / p.l_qfp;
    }
    return (1.0 / p.l_qfp) * beta / (1.0 + beta);
}

double effective_mutual(const DeviceParams &p, double chi) { return p.m_qub_qfp * p.m_qfp_tres * chi; }

double qubit_flux_signal(const DeviceParams &p) { return 2.0 * p.ip_qub * p.m_qub_qfp / kPhi0; }

double scurve_prob(double phi_z, double center, double w) {
    return 0.5 * (1.0 - std::tanh((phi_z - center) / w));
}

namespace {

// Flux where the sampled probability crosses `level`, by linear
// interpolation between the first bracketing pair.
double crossing(const std::vector<double> &x, const std::vector<double> &y, double level, double fallback) {
    for (size_t i = 1; i < x.size(); ++i) {
        double a = y[i - 1] - level;
        double b = y[i] - level;
        if (a == 0.0) {
            return x[i - 1];
        }
        if ((a > 0.0) != (b > 0.0)) {
            return x[i - 1] + (x[i] - x[i - 1]) * a / (a - b);
        }
    }
    return fallback;
}

}  // namespace

SCurveFit fit_scurve(std::span<const SCurveSample> samples, const SCurveFitOptions &opt) {
    std::set<double> distinct;
    for (const auto &s : samples) {
        if (s.trials <= 0 || s.successes < 0 || s.successes > s.trials) {
            throw Error("s-curve sample counts must satisfy 0 <= successes <= trials, trials > 0");
        }
        distinct.insert(s.phi_z);
    }
    if (distinct.size() < 4) {
        throw Error("s-curve fit needs at least 4 distinct flux points");
    }
    std::vector<SCurveSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](auto &a, auto &b) { return a.phi_z < b.phi_z; });

    // Work in mPhi0 for conditioning.
    const int n = static_cast<int>(sorted.size());
    std::vector<double> x(n), y(n), wts(n, 1.0);
    for (int i = 0; i < n; ++i) {
        x[i] = sorted[i].phi_z * 1e3;
        y[i] = static_cast<double>(sorted[i].successes) / static_cast<double>(sorted[i].trials);
        if (opt.binomial_weights) {
            double pp = std::clamp(y[i], 0.5 / sorted[i].trials, 1.0 - 0.5 / sorted[i].trials);
            wts[i] = 1.0 / std::sqrt(pp * (1.0 - pp) / sorted[i].trials);
        }
    }
    double ymin = *std::min_element(y.begin(), y.end());
    double ymax = *std::max_element(y.begin(), y.end());
    if (ymax - ymin < 1e-12) {
        throw Error("width unidentifiable: all sample probabilities are equal");
    }
    const double span = x.back() - x.front();
    double c0 = crossing(x, y, 0.5, 0.5 * (x.front() + x.back()));
    double q1 = crossing(x, y, 0.75, c0 - span / 20);
    double q3 = crossing(x, y, 0.25, c0 + span / 20);
    double w0 = std::abs(q3 - q1) / 1.0986122886681098;
    if (!(w0 > 0.0)) {
        w0 = span / 20;
    }
    if (y.front() < y.back()) {
        w0 = -w0;  // rising data: let the fit report it
    }

    ResidualFn f = [&](const Eigen::VectorXd &p, Eigen::VectorXd &r) {
        for (int i = 0; i < n; ++i) {
            r[i] = wts[i] * (scurve_prob(x[i], p[0], p[1]) - y[i]);
        }
    };
    LmOptions lo;
    lo.step_floor = Eigen::Vector2d(1e-9, 1e-9);
    LmResult res;
    try {
        res = levenberg_marquardt(f, Eigen::Vector2d(c0, w0), n, lo);
    } catch (const Error &e) {
        throw Error(std::string("width unidentifiable: ") + e.what());
    }
    if (!res.converged) {
        throw Error("s-curve fit did not converge");
    }
    if (!(res.params[1] > 0.0)) {
        throw Error("s-curve fit produced a non-positive width; expected a probability decreasing in flux");
    }
    // Binomial variance of the fitted curve, propagated through the
    // (weighted) estimating equations: A^-1 B A^-1. The plateau points carry
    // almost no variance, so a pooled residual variance would understate it.
    const double c = res.params[0];
    const double w = res.params[1];
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d b = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
        double u = (x[i] - c) / w;
        double sech2 = 1.0 / (std::cosh(u) * std::cosh(u));
        Eigen::Vector2d j(sech2 / (2.0 * w), u * sech2 / (2.0 * w));
        double p = scurve_prob(x[i], c, w);
        double var = p * (1.0 - p) / static_cast<double>(sorted[i].trials);
        double w2 = wts[i] * wts[i];
        a += w2 * j * j.transpose();
        b += w2 * w2 * var * j * j.transpose();
    }
    Eigen::Matrix2d ainv = a.inverse();
    Eigen::Matrix2d cov = ainv * b * ainv;
    SCurveFit out;
    out.center = c * 1e-3;
    out.width = w * 1e-3;
    out.center_sigma = std::sqrt(std::max(cov(0, 0), 0.0)) * 1e-3;
    out.width_sigma = std::sqrt(std::max(cov(1, 1), 0.0)) * 1e-3;
    out.cov_cw = cov(0, 1) * 1e-6;
    return out;
}

namespace {

double fsep(double x, double cl, double wl, double cr, double wr) {
    return scurve_prob(x, cr, wr) - scurve_prob(x, cl, wl);
}

// Golden-section maximization on [a, b].
double golden_max(double a, double b, const auto &g) {
    const double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double gc = g(c), gd = g(d);
    for (int i = 0; i < 200 && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
        if (gc >= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

SeparationReport separation_fidelity(const SCurveFit &left, const SCurveFit &right, int curve_points) {
    if (!(left.width > 0.0) || !(right.width > 0.0)) {
        throw Error("separation_fidelity: widths must be positive");
    }
    SeparationReport rep;
    rep.delta_phi_qub = std::abs(right.center - left.center);
    rep.ratio = rep.delta_phi_qub / (0.5 * (left.width + right.width));

    const double wmax = std::max(left.width, right.width);
    const double lo = std::min(left.center, right.center) - 10.0 * wmax;
    const double hi = std::max(left.center, right.center) + 10.0 * wmax;
    auto g = [&](double x) { return fsep(x, left.center, left.width, right.center, right.width); };

    const int N = kSeparationGridPoints;
    const double h = (hi - lo) / (N - 1);
    int best = 0;
    double best_val = -2.0;
    for (int i = 0; i < N; ++i) {
        double v = g(lo + i * h);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = lo + std::max(best - 1, 0) * h;
    double b = lo + std::min(best + 1, N - 1) * h;
    double xr = golden_max(a, b, g);
    double xbest = g(xr) >= best_val ? xr : lo + best * h;
    rep.phi_at_max = xbest;
    rep.f_sep_max = std::clamp(g(xbest), 0.0, 1.0);

    // Linear propagation at the maximizer; the fits are independent.
    const double th[4] = {left.center, left.width, right.center, right.width};
    double grad[4];
    for (int k = 0; k < 4; ++k) {
        double t[4] = {th[0], th[1], th[2], th[3]};
        double step = std::max(std::abs(th[k]) * 1e-6, 1e-12);
        t[k] = th[k] + step;
        double up = fsep(xbest, t[0], t[1], t[2], t[3]);
        t[k] = th[k] - step;
        double dn = fsep(xbest, t[0], t[1], t[2], t[3]);
        grad[k] = (up - dn) / (2.0 * step);
    }
    double var = grad[0] * grad[0] * left.center_sigma * left.center_sigma +
                 grad[1] * grad[1] * left.width_sigma * left.width_sigma +
                 2.0 * grad[0] * grad[1] * left.cov_cw +
                 grad[2] * grad[2] * right.center_sigma * right.center_sigma +
                 grad[3] * grad[3] * right.width_sigma * right.width_sigma +
                 2.0 * grad[2] * grad[3] * right.cov_cw;
    rep.f_sep_max_sigma = std::sqrt(std::max(var, 0.0));

    curve_points = std::max(curve_points, 2);
    rep.f_sep_curve.reserve(curve_points);
    for (int i = 0; i < curve_points; ++i) {
        double x = lo + (hi - lo) * i / (curve_points - 1);
        rep.f_sep_curve.emplace_back(x, g(x));
    }
    return rep;
}

double required_ratio(double f_target) {
    if (!(f_target > 0.0 && f_target < 1.0)) {
        throw Error("required_ratio: target fidelity must lie in (0, 1)");
    }
    return 2.0 * std::atanh(f_target);
}

double implied_width(double delta_phi, double ratio) { return delta_phi / ratio; }

double implied_mutual(const DeviceParams &p, double width, double ratio) {
    if (!(p.ip_qub > 0.0)) {
        throw Error("implied_mutual: ip_qub must be positive");
    }
    return ratio * width * kPhi0 / (2.0 * p.ip_qub);
}

}  // namespace fluxchain
