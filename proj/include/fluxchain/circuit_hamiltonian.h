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

#ifndef FLUXCHAIN_CIRCUIT_HAMILTONIAN_H
#define FLUXCHAIN_CIRCUIT_HAMILTONIAN_H

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fluxchain/common.h"

namespace fluxchain {

/// One normal mode: coefficient of (n^2 + theta^2) in GHz and its
/// truncation dimension in the oscillator basis.
struct ModeSpec {
    double a = 0.0;
    int dim = 1;
};

/// amp * prod_i exp(i b_i theta_i), added together with its adjoint.
struct ExpTerm {
    std::complex<double> amp;
    std::vector<double> b;
};

/// H = c0 + sum_i a_i (n_i^2 + theta_i^2) + sum_j [amp_j prod_i exp(i b_ij theta_i) + h.c.],
/// energies in GHz (h = 1). Mode 0 is the slowest index of the product basis.
struct NormalModeHamiltonian {
    double c0 = 0.0;
    std::vector<ModeSpec> modes;
    std::vector<ExpTerm> terms;

    void validate() const;
    size_t total_dim() const;
    /// Copy with every truncation dimension increased by `by`.
    NormalModeHamiltonian escalated(int by) const;
};

NormalModeHamiltonian load_hamiltonian(std::string_view json_text);
NormalModeHamiltonian load_hamiltonian_file(const std::string &path);
std::string serialize_hamiltonian(const NormalModeHamiltonian &h);

/// Truncated ladder-basis quadratures theta = (a + a^dag)/sqrt2 and
/// n = (a - a^dag)/(i sqrt2).
struct ModeOps {
    Eigen::MatrixXcd theta;
    Eigen::MatrixXcd n;
};
ModeOps build_mode_ops(int dim);

/// Largest product dimension accepted for dense assembly.
inline constexpr size_t kMaxDenseDimension = 50000;

/// Dense Hermitian matrix of `h`. The quadratic part is the number operator
/// form a (2N + 1), which equals n^2 + theta^2 except for the truncation
/// artifact in the top level; exponentials use the eigendecomposition of
/// the truncated theta.
Eigen::MatrixXcd assemble(const NormalModeHamiltonian &h);

/// max |H - H^dag|.
double hermiticity_residual(const Eigen::MatrixXcd &m);

/// Matrix-free y = H x on the Kronecker product basis.
class KroneckerOperator {
  public:
    explicit KroneckerOperator(const NormalModeHamiltonian &h);
    size_t dim() const { return n_; }
    void apply(const std::complex<double> *x, std::complex<double> *y) const;

  private:
    void apply_product(const std::vector<Eigen::MatrixXcd> &mats, const std::vector<bool> &skip,
                       const std::complex<double> *x, std::complex<double> *out) const;

    size_t n_ = 0;
    double c0_ = 0.0;
    std::vector<int> dims_;
    std::vector<double> diag_;
    std::vector<std::complex<double>> amps_;
    // Per term: one factor per mode, their adjoints, and which are identity.
    std::vector<std::vector<Eigen::MatrixXcd>> factors_;
    std::vector<std::vector<Eigen::MatrixXcd>> adjoints_;
    std::vector<std::vector<bool>> identity_;
};

struct SpectrumResult {
    std::vector<double> eigenvalues;  // GHz, ascending
    /// max |E_k(dims + 2) - E_k(dims)| over the returned levels, GHz.
    std::optional<double> convergence_delta;
    std::vector<double> escalated_eigenvalues;
};

/// Lowest k eigenvalues of a dense Hermitian matrix.
SpectrumResult eigensolve_lowest(const Eigen::MatrixXcd &m, int k);

/// Lowest k eigenvalues of an implicit operator (implicitly restarted
/// Arnoldi on the smallest real part).
std::vector<double> eigensolve_lowest_iterative(const KroneckerOperator &op, int k,
                                                double tol = 1e-13);

/// Dense solve at the given dims; with `escalate` the spectrum is recomputed
/// with every dim + 2 (matrix-free) and the convergence delta reported.
SpectrumResult eigensolve_lowest(const NormalModeHamiltonian &h, int k, bool escalate);

struct FluxSpectrum {
    double flux = 0.0;
    std::vector<double> energies;  // GHz, ascending
};

struct AntiCrossing {
    double phi_min = 0.0;
    double gap = 0.0;  // GHz
    double g = 0.0;    // GHz, gap / 2
};

/// Raised when the level pair never approaches closer than the resolution
/// or the gap has no interior minimum. `g_bound` is the coupling upper bound.
class NoAntiCrossing : public Error {
  public:
    NoAntiCrossing(const std::string &what, double g_bound) : Error(what), g_bound_(g_bound) {}
    double g_bound() const { return g_bound_; }

  private:
    double g_bound_;
};

struct AntiCrossingOptions {
    int lower_level = 1;         // pair (lower_level, lower_level + 1)
    double resolution = 18.8e-6;  // GHz
};

/// Minimum over flux of E_{m+1} - E_m, refined by a parabola through the
/// squared gaps at the smallest sample and its neighbours.
AntiCrossing anticrossing_gap(std::span<const FluxSpectrum> spectra,
                              const AntiCrossingOptions &opt = {});

/// Synthetic qubit (two-level) + resonator (n_photons levels) model with
/// exchange coupling g, all in GHz. The qubit frequency is f_res + detuning
/// for each detuning; the returned flux coordinate is the detuning.
std::vector<FluxSpectrum> synthetic_two_mode_sweep(double g, double f_res,
                                                   std::span<const double> detunings,
                                                   int n_photons = 3);

/// T1_P = Delta^2 / (kappa g^2) with g, Delta in Hz (converted to angular)
/// and kappa in rad/s. Returns infinity for g = 0.
double purcell_t1(double g_hz, double delta_hz, double kappa);

/// (1/t1_avg + 1/t1_purcell)^-1; t1_purcell may be infinite.
double combined_t1(double t1_avg, double t1_purcell);

std::string spectrum_csv(const std::vector<double> &energies);

}  // namespace fluxchain

#endif
