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

#include "fluxchain/circuit_hamiltonian.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <arpack/arpack.hpp>
#include <lapacke.h>

#include "fluxchain/csv_io.h"
#include "json.hpp"

namespace fluxchain {

using json = nlohmann::json;
using cd = std::complex<double>;

void NormalModeHamiltonian::validate() const {
    if (!std::isfinite(c0)) throw Error("invariant violation: c0 must be finite");
    if (modes.empty()) throw Error("invariant violation: at least one mode required");
    for (size_t i = 0; i < modes.size(); ++i) {
        if (modes[i].dim < 1) throw Error("invariant violation: mode " + std::to_string(i) + " dim < 1");
        if (!std::isfinite(modes[i].a)) throw Error("invariant violation: mode " + std::to_string(i) + " a not finite");
    }
    for (size_t j = 0; j < terms.size(); ++j) {
        if (terms[j].b.size() != modes.size()) {
            throw Error("invariant violation: term " + std::to_string(j) + " has " +
                        std::to_string(terms[j].b.size()) + " b entries for " +
                        std::to_string(modes.size()) + " modes");
        }
        if (!std::isfinite(terms[j].amp.real()) || !std::isfinite(terms[j].amp.imag())) {
            throw Error("invariant violation: term " + std::to_string(j) + " amplitude not finite");
        }
    }
}

size_t NormalModeHamiltonian::total_dim() const {
    size_t n = 1;
    for (const auto &m : modes) {
        n *= static_cast<size_t>(m.dim);
        if (n > std::numeric_limits<size_t>::max() / 1024) throw Error("dimension overflow");
    }
    return n;
}

NormalModeHamiltonian NormalModeHamiltonian::escalated(int by) const {
    NormalModeHamiltonian h = *this;
    for (auto &m : h.modes) m.dim += by;
    return h;
}

NormalModeHamiltonian load_hamiltonian(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("parse failure: ") + e.what());
    }
    NormalModeHamiltonian h;
    try {
        if (!doc.contains("c0")) throw Error("missing field c0");
        if (!doc.contains("modes")) throw Error("missing field modes");
        h.c0 = doc.at("c0").get<double>();
        for (const auto &m : doc.at("modes")) {
            h.modes.push_back(ModeSpec{m.at("a").get<double>(), m.at("dim").get<int>()});
        }
        if (doc.contains("terms")) {
            for (const auto &t : doc.at("terms")) {
                ExpTerm term;
                term.amp = cd(t.at("re").get<double>(), t.value("im", 0.0));
                term.b = t.at("b").get<std::vector<double>>();
                h.terms.push_back(std::move(term));
            }
        }
    } catch (const json::exception &e) {
        throw Error(std::string("parse failure: ") + e.what());
    }
    h.validate();
    return h;
}

NormalModeHamiltonian load_hamiltonian_file(const std::string &path) {
    return load_hamiltonian(read_text_file(path));
}

std::string serialize_hamiltonian(const NormalModeHamiltonian &h) {
    json doc;
    doc["c0"] = h.c0;
    doc["modes"] = json::array();
    for (const auto &m : h.modes) doc["modes"].push_back({{"a", m.a}, {"dim", m.dim}});
    doc["terms"] = json::array();
    for (const auto &t : h.terms) {
        doc["terms"].push_back({{"re", t.amp.real()}, {"im", t.amp.imag()}, {"b", t.b}});
    }
    return doc.dump(2);
}

ModeOps build_mode_ops(int dim) {
    if (dim < 1) throw Error("mode dimension must be positive");
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    const double r = 1.0 / std::sqrt(2.0);
    ModeOps ops;
    ops.theta = r * (a + a.adjoint());
    ops.n = (a - a.adjoint()) * cd(0.0, -r);
    return ops;
}

namespace {

// exp(i b theta) on the truncated basis via the eigendecomposition of theta.
Eigen::MatrixXcd exp_i_theta(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> &es, double b) {
    const Eigen::MatrixXd &v = es.eigenvectors();
    Eigen::VectorXcd phase(v.rows());
    for (Eigen::Index k = 0; k < v.rows(); ++k) phase[k] = std::polar(1.0, b * es.eigenvalues()[k]);
    return v.cast<cd>() * phase.asDiagonal() * v.transpose().cast<cd>();
}

struct ModeFactors {
    std::vector<std::vector<Eigen::MatrixXcd>> factors;  // [term][mode]
    std::vector<std::vector<bool>> identity;
};

ModeFactors mode_factors(const NormalModeHamiltonian &h) {
    ModeFactors f;
    f.factors.assign(h.terms.size(), std::vector<Eigen::MatrixXcd>(h.modes.size()));
    f.identity.assign(h.terms.size(), std::vector<bool>(h.modes.size(), false));
    for (size_t i = 0; i < h.modes.size(); ++i) {
        int d = h.modes[i].dim;
        Eigen::MatrixXd theta = build_mode_ops(d).theta.real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
        for (size_t j = 0; j < h.terms.size(); ++j) {
            double b = h.terms[j].b[i];
            if (b == 0.0) {
                f.factors[j][i] = Eigen::MatrixXcd::Identity(d, d);
                f.identity[j][i] = true;
            } else {
                f.factors[j][i] = exp_i_theta(es, b);
            }
        }
    }
    return f;
}

std::vector<double> number_diagonal(const NormalModeHamiltonian &h) {
    std::vector<double> diag(h.total_dim(), 0.0);
    size_t inner = diag.size();
    for (const auto &m : h.modes) {
        size_t d = static_cast<size_t>(m.dim);
        inner /= d;
        for (size_t idx = 0; idx < diag.size(); ++idx) {
            size_t level = (idx / inner) % d;
            diag[idx] += m.a * (2.0 * static_cast<double>(level) + 1.0);
        }
    }
    return diag;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd &a, const Eigen::MatrixXcd &b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXcd assemble(const NormalModeHamiltonian &h) {
    h.validate();
    const size_t n = h.total_dim();
    if (n > kMaxDenseDimension) {
        throw Error("dimension overflow: product dimension " + std::to_string(n) +
                    " exceeds dense limit " + std::to_string(kMaxDenseDimension));
    }
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
    std::vector<double> diag = number_diagonal(h);
    for (Eigen::Index k = 0; k < N; ++k) H(k, k) = h.c0 + diag[static_cast<size_t>(k)];

    ModeFactors f = mode_factors(h);
    for (size_t j = 0; j < h.terms.size(); ++j) {
        Eigen::MatrixXcd p = f.factors[j][0];
        for (size_t i = 1; i < h.modes.size(); ++i) p = kron(p, f.factors[j][i]);
        H += h.terms[j].amp * p;
        H += std::conj(h.terms[j].amp) * p.adjoint();
    }
    return H;
}

double hermiticity_residual(const Eigen::MatrixXcd &m) {
    if (m.rows() != m.cols()) throw Error("matrix is not square");
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

KroneckerOperator::KroneckerOperator(const NormalModeHamiltonian &h) {
    h.validate();
    n_ = h.total_dim();
    c0_ = h.c0;
    for (const auto &m : h.modes) dims_.push_back(m.dim);
    diag_ = number_diagonal(h);
    for (const auto &t : h.terms) amps_.push_back(t.amp);
    ModeFactors f = mode_factors(h);
    factors_ = std::move(f.factors);
    identity_ = std::move(f.identity);
    adjoints_.resize(factors_.size());
    for (size_t j = 0; j < factors_.size(); ++j) {
        for (const auto &m : factors_[j]) adjoints_[j].push_back(m.adjoint());
    }
}

void KroneckerOperator::apply_product(const std::vector<Eigen::MatrixXcd> &mats,
                                      const std::vector<bool> &skip, const cd *x, cd *out) const {
    std::vector<cd> cur(x, x + n_);
    std::vector<cd> next(n_);
    size_t outer = 1;
    size_t inner = n_;
    for (size_t i = 0; i < dims_.size(); ++i) {
        const size_t d = static_cast<size_t>(dims_[i]);
        inner /= d;
        if (!skip[i]) {
            const Eigen::MatrixXcd &m = mats[i];
            for (size_t o = 0; o < outer; ++o) {
                const cd *src = cur.data() + o * d * inner;
                cd *dst = next.data() + o * d * inner;
                for (size_t r = 0; r < d; ++r) {
                    cd *row = dst + r * inner;
                    std::fill(row, row + inner, cd(0.0));
                    for (size_t c = 0; c < d; ++c) {
                        const cd w = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                        const cd *col = src + c * inner;
                        for (size_t in = 0; in < inner; ++in) row[in] += w * col[in];
                    }
                }
            }
            cur.swap(next);
        }
        outer *= d;
    }
    std::copy(cur.begin(), cur.end(), out);
}

void KroneckerOperator::apply(const cd *x, cd *y) const {
    for (size_t k = 0; k < n_; ++k) y[k] = (c0_ + diag_[k]) * x[k];
    std::vector<cd> tmp(n_);
    for (size_t j = 0; j < amps_.size(); ++j) {
        apply_product(factors_[j], identity_[j], x, tmp.data());
        for (size_t k = 0; k < n_; ++k) y[k] += amps_[j] * tmp[k];
        apply_product(adjoints_[j], identity_[j], x, tmp.data());
        const cd ac = std::conj(amps_[j]);
        for (size_t k = 0; k < n_; ++k) y[k] += ac * tmp[k];
    }
}

SpectrumResult eigensolve_lowest(const Eigen::MatrixXcd &m, int k) {
    if (m.rows() != m.cols()) throw Error("matrix is not square");
    const auto n = static_cast<lapack_int>(m.rows());
    if (k < 1 || k > n) throw Error("k must lie in [1, dimension]");
    if (!m.allFinite()) throw Error("eigensolver failure: non-finite matrix entries");
    Eigen::MatrixXcd a = m;
    std::vector<double> w(static_cast<size_t>(n));
    std::vector<lapack_int> isuppz(2 * static_cast<size_t>(k));
    lapack_complex_double dummy_z{};
    lapack_int found = 0;
    lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'N', 'I', 'L', n,
                                     reinterpret_cast<lapack_complex_double *>(a.data()), n, 0.0,
                                     0.0, 1, k, LAPACKE_dlamch('S'), &found, w.data(), &dummy_z, 1,
                                     isuppz.data());
    if (info != 0 || found != k) {
        throw Error("eigensolver failure: zheevr info " + std::to_string(info));
    }
    SpectrumResult r;
    r.eigenvalues.assign(w.begin(), w.begin() + k);
    return r;
}

std::vector<double> eigensolve_lowest_iterative(const KroneckerOperator &op, int k, double tol) {
    const auto n = static_cast<a_int>(op.dim());
    if (k < 1 || k >= n - 1) throw Error("k must lie in [1, dimension - 2] for the iterative solver");
    const a_int nev = k;
    const a_int ncv = std::min<a_int>(n, std::max<a_int>(3 * k, k + 40));
    const a_int lworkl = 3 * ncv * ncv + 5 * ncv;
    std::vector<cd> resid(static_cast<size_t>(n)), v(static_cast<size_t>(n) * ncv),
        workd(3 * static_cast<size_t>(n)), workl(static_cast<size_t>(lworkl));
    std::vector<double> rwork(static_cast<size_t>(ncv));
    a_int iparam[11] = {1, 0, 20000, 1, 0, 0, 1, 0, 0, 0, 0};
    a_int ipntr[14] = {};
    // Deterministic start vector.
    for (size_t i = 0; i < resid.size(); ++i) {
        uint64_t s = splitmix64(i);
        resid[i] = cd(1.0 + static_cast<double>(s >> 11) * 0x1.0p-53, 0.0);
    }
    a_int ido = 0;
    a_int info = 1;
    auto as_c = [](cd *p) { return reinterpret_cast<double _Complex *>(p); };
    while (true) {
        arpack::internal::znaupd_c(&ido, "I", n, "SR", nev, tol, as_c(resid.data()), ncv,
                                   as_c(v.data()), n, iparam, ipntr, as_c(workd.data()),
                                   as_c(workl.data()), lworkl, rwork.data(), &info);
        if (ido == -1 || ido == 1) {
            op.apply(workd.data() + ipntr[0] - 1, workd.data() + ipntr[1] - 1);
        } else {
            break;
        }
    }
    if (info < 0) throw Error("eigensolver failure: znaupd info " + std::to_string(info));
    if (info == 1) throw Error("eigensolver failure: maximum Arnoldi iterations reached");

    std::vector<cd> d(static_cast<size_t>(nev) + 1), workev(2 * static_cast<size_t>(ncv));
    std::vector<a_int> select(static_cast<size_t>(ncv), 0);
    cd sigma(0.0);
    cd z_dummy(0.0);
    a_int info2 = 0;
    arpack::internal::zneupd_c(0, "A", select.data(), as_c(d.data()), as_c(&z_dummy), n,
                               *as_c(&sigma), as_c(workev.data()), "I", n, "SR", nev, tol,
                               as_c(resid.data()), ncv, as_c(v.data()), n, iparam, ipntr,
                               as_c(workd.data()), as_c(workl.data()), lworkl, rwork.data(), &info2);
    if (info2 != 0) throw Error("eigensolver failure: zneupd info " + std::to_string(info2));
    if (iparam[4] < nev) throw Error("eigensolver failure: only " + std::to_string(iparam[4]) + " eigenvalues converged");
    std::vector<double> out;
    for (a_int i = 0; i < nev; ++i) out.push_back(d[static_cast<size_t>(i)].real());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {
constexpr size_t kDenseSolveLimit = 6000;

std::vector<double> lowest_levels(const NormalModeHamiltonian &h, int k) {
    if (h.total_dim() <= kDenseSolveLimit) return eigensolve_lowest(assemble(h), k).eigenvalues;
    return eigensolve_lowest_iterative(KroneckerOperator(h), k);
}
}  // namespace

SpectrumResult eigensolve_lowest(const NormalModeHamiltonian &h, int k, bool escalate) {
    h.validate();
    if (k < 1 || static_cast<size_t>(k) > h.total_dim()) throw Error("k must lie in [1, dimension]");
    SpectrumResult r;
    r.eigenvalues = lowest_levels(h, k);
    if (escalate) {
        r.escalated_eigenvalues = lowest_levels(h.escalated(2), k);
        double delta = 0.0;
        for (int i = 0; i < k; ++i) {
            delta = std::max(delta, std::abs(r.escalated_eigenvalues[static_cast<size_t>(i)] -
                                             r.eigenvalues[static_cast<size_t>(i)]));
        }
        r.convergence_delta = delta;
    }
    return r;
}

AntiCrossing anticrossing_gap(std::span<const FluxSpectrum> spectra, const AntiCrossingOptions &opt) {
    if (spectra.size() < 5) throw Error("anticrossing needs at least 5 flux points");
    const int m = opt.lower_level;
    if (m < 0) throw Error("lower_level must be nonnegative");
    std::vector<FluxSpectrum> s(spectra.begin(), spectra.end());
    std::sort(s.begin(), s.end(), [](const auto &a, const auto &b) { return a.flux < b.flux; });
    std::vector<double> x, gap;
    for (const auto &sp : s) {
        if (sp.energies.size() < static_cast<size_t>(m) + 2) {
            throw Error("anticrossing needs levels " + std::to_string(m) + " and " + std::to_string(m + 1));
        }
        x.push_back(sp.flux);
        gap.push_back(sp.energies[static_cast<size_t>(m) + 1] - sp.energies[static_cast<size_t>(m)]);
    }
    size_t k = static_cast<size_t>(std::min_element(gap.begin(), gap.end()) - gap.begin());
    if (k == 0 || k + 1 == gap.size()) {
        throw NoAntiCrossing("no anti-crossing detected: gap minimum at sweep edge", gap[k] / 2.0);
    }
    // Parabola through (x, gap^2): exact for a hyperbolic avoided crossing.
    double x0 = x[k - 1], x1 = x[k], x2 = x[k + 1];
    double y0 = gap[k - 1] * gap[k - 1], y1 = gap[k] * gap[k], y2 = gap[k + 1] * gap[k + 1];
    double d01 = (y1 - y0) / (x1 - x0);
    double d12 = (y2 - y1) / (x2 - x1);
    double c2 = (d12 - d01) / (x2 - x0);
    double phi_min = x1;
    double g2 = y1;
    if (c2 > 0.0) {
        double c1 = d01 - c2 * (x0 + x1);
        phi_min = std::clamp(-c1 / (2.0 * c2), x0, x2);
        g2 = y1 + (phi_min - x1) * (d01 + c2 * (phi_min - x0));
    }
    double refined = std::sqrt(std::max(0.0, std::min(g2, y1)));
    if (refined < opt.resolution) {
        throw NoAntiCrossing("no anti-crossing detected: gap below resolution", opt.resolution);
    }
    return AntiCrossing{phi_min, refined, refined / 2.0};
}

std::vector<FluxSpectrum> synthetic_two_mode_sweep(double g, double f_res,
                                                   std::span<const double> detunings, int n_photons) {
    if (n_photons < 2) throw Error("n_photons must be at least 2");
    const int n = 2 * n_photons;  // index = q * n_photons + photons
    std::vector<FluxSpectrum> out;
    for (double det : detunings) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
        double f_q = f_res + det;
        for (int q = 0; q < 2; ++q) {
            for (int p = 0; p < n_photons; ++p) h(q * n_photons + p, q * n_photons + p) = q * f_q + p * f_res;
        }
        for (int p = 0; p + 1 < n_photons; ++p) {
            // |e, p> <-> |g, p + 1>
            int a = n_photons + p;
            int b = p + 1;
            h(a, b) = h(b, a) = g * std::sqrt(static_cast<double>(p + 1));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        const Eigen::VectorXd &ev = es.eigenvalues();
        out.push_back(FluxSpectrum{det, std::vector<double>(ev.data(), ev.data() + ev.size())});
    }
    return out;
}

double purcell_t1(double g_hz, double delta_hz, double kappa) {
    if (!(kappa > 0.0)) throw Error("kappa must be positive");
    if (delta_hz == 0.0) throw Error("divergent Purcell rate at zero detuning (T1 -> 0)");
    if (g_hz == 0.0) return std::numeric_limits<double>::infinity();
    double g = kTwoPi * g_hz;
    double delta = kTwoPi * delta_hz;
    return delta * delta / (kappa * g * g);
}

double combined_t1(double t1_avg, double t1_purcell) {
    if (!(t1_avg > 0.0) || !(t1_purcell > 0.0)) throw Error("lifetimes must be positive");
    return 1.0 / (1.0 / t1_avg + 1.0 / t1_purcell);
}

std::string spectrum_csv(const std::vector<double> &energies) {
    CsvWriter w({"index", "energy_ghz"});
    for (size_t i = 0; i < energies.size(); ++i) w.row({std::to_string(i), format_double(energies[i])});
    return w.str();
}

}  // namespace fluxchain
