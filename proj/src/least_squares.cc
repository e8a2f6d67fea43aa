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

#include "fluxchain/least_squares.h"

#include <cmath>

#include "fluxchain/common.h"

namespace fluxchain {

namespace {

Eigen::MatrixXd jacobian(const ResidualFn &f, const Eigen::VectorXd &p, int n, const LmOptions &opt) {
    Eigen::MatrixXd J(n, p.size());
    Eigen::VectorXd rp(n), rm(n);
    Eigen::VectorXd q = p;
    for (int j = 0; j < p.size(); ++j) {
        double floor = opt.step_floor.size() == p.size() ? opt.step_floor[j] : 1e-12;
        double h = std::max(std::abs(p[j]) * 1e-6, floor);
        q[j] = p[j] + h;
        f(q, rp);
        q[j] = p[j] - h;
        f(q, rm);
        q[j] = p[j];
        J.col(j) = (rp - rm) / (2.0 * h);
    }
    return J;
}

}  // namespace

LmResult levenberg_marquardt(const ResidualFn &f, Eigen::VectorXd p, int n, const LmOptions &opt) {
    const int m = static_cast<int>(p.size());
    Eigen::VectorXd r(n), r_try(n);
    f(p, r);
    double ssr = r.squaredNorm();
    if (!std::isfinite(ssr)) {
        throw Error("least squares: non-finite residual at the starting point");
    }
    double lambda = 1e-3;
    LmResult out;
    Eigen::MatrixXd J = jacobian(f, p, n, opt);
    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it + 1;
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= opt.gtol * std::max(1.0, ssr)) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-300);
        bool accepted = false;
        bool tiny_step = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd Ad = A;
            Ad.diagonal() += lambda * diag;
            Eigen::VectorXd step = Ad.ldlt().solve(-g);
            Eigen::VectorXd p_try = p + step;
            f(p_try, r_try);
            double ssr_try = r_try.squaredNorm();
            if (std::isfinite(ssr_try) && ssr_try <= ssr) {
                double decrease = ssr - ssr_try;
                tiny_step = step.norm() <= opt.xtol * (p.norm() + opt.xtol);
                bool tiny_gain = decrease <= opt.ftol * ssr;
                p = p_try;
                r = r_try;
                ssr = ssr_try;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (tiny_step || tiny_gain || ssr == 0.0) {
                    tiny_step = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) {
                break;
            }
        }
        if (!accepted || tiny_step) {
            // No further descent is possible: converged to the precision of
            // the objective.
            out.converged = true;
            break;
        }
        J = jacobian(f, p, n, opt);
    }
    out.params = p;
    out.ssr = ssr;
    J = jacobian(f, p, n, opt);
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < m) {
        throw Error("least squares: singular normal matrix (parameters unidentifiable)");
    }
    double s2 = n > m ? ssr / (n - m) : 0.0;
    out.covariance = s2 * lu.inverse();
    return out;
}

}  // namespace fluxchain
