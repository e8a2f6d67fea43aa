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

#ifndef FLUXCHAIN_LEAST_SQUARES_H
#define FLUXCHAIN_LEAST_SQUARES_H

#include <functional>

#include <Eigen/Dense>

namespace fluxchain {

/// r = residuals(params); r must keep its size across calls.
using ResidualFn = std::function<void(const Eigen::VectorXd &, Eigen::VectorXd &)>;

struct LmOptions {
    int max_iterations = 500;
    double xtol = 1e-14;  // relative step size
    double ftol = 1e-15;  // relative SSR decrease
    double gtol = 1e-15;
    /// Per-parameter floor for the finite-difference step; empty -> 1e-12.
    Eigen::VectorXd step_floor;
};

struct LmResult {
    Eigen::VectorXd params;
    /// s^2 (J^T J)^-1 with s^2 = SSR / (n - p).
    Eigen::MatrixXd covariance;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt with a central-difference Jacobian and Marquardt
/// diagonal scaling. Throws Error when the normal matrix is singular at
/// the solution.
LmResult levenberg_marquardt(const ResidualFn &residuals, Eigen::VectorXd p0, int n_residuals,
                             const LmOptions &opt = {});

}  // namespace fluxchain

#endif
