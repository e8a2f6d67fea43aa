# Copyright 2026 The fluxchain Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import os

import numpy as np
import pytest

import fluxchain as fc

DATA = os.environ.get("FLUXCHAIN_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def test_reference_device_round_trip():
    dev = fc.reference_device()
    again = fc.load_device(dev.to_json())
    assert again == dev
    assert json.loads(dev.to_json())


def test_invalid_device_raises():
    dev = fc.reference_device()
    dev.l_qfp = -1e-12
    with pytest.raises(fc.FluxchainError):
        dev.validate()


def test_qfp_analytics():
    dev = fc.reference_device()
    assert fc.beta_l(dev, 0.0) == pytest.approx(2.50, abs=0.01)
    assert fc.beta_l(dev, 0.5) == 0.0
    assert fc.qubit_flux_signal(dev) * 1e3 == pytest.approx(10.69, rel=5e-3)
    rep = fc.separation_fidelity(fc.SCurveFit(-5.36e-3, 1.38e-3), fc.SCurveFit(5.36e-3, 1.42e-3))
    assert rep.f_sep_max == pytest.approx(0.9991, abs=3e-4)
    assert fc.required_ratio(0.99999) == pytest.approx(12.2, abs=0.05)


def test_scurve_fit_recovers_noiseless_curve():
    rows = []
    for i in range(41):
        x = (-10 + 0.5 * i) * 1e-3
        rows.append((x, round(fc.scurve_prob(x, 1e-3, 1.4e-3) * 10**9), 10**9))
    fit = fc.fit_scurve(rows)
    assert fit.center == pytest.approx(1e-3, abs=1e-8)
    assert fit.width == pytest.approx(1.4e-3, rel=1e-5)


def test_resonator_vectorized():
    res = fc.calibrated_resonator(fc.reference_device())
    f = fc.resonant_freq(res, np.array([0.0, 0.25, -0.25]))
    assert f.shape == (3,)
    assert f[0] == pytest.approx(6.46e9, rel=1e-12)
    assert f[1] == f[2]
    kappa, ringup = fc.decay_rate(6.46e9, 720.0)
    assert ringup == pytest.approx(17.7e-9, abs=0.05e-9)
    assert kappa * ringup == pytest.approx(1.0)


def test_anneal_sign_and_amplification():
    dev = fc.reference_device()
    a = fc.anneal_protocol(dev, 2e-3)
    b = fc.anneal_protocol(dev, -2e-3)
    assert a["ip_qfp"] > 0 > b["ip_qfp"]
    assert 5 <= a["amplification_ratio"] <= 15


def test_purcell_and_anticrossing():
    kappa, _ = fc.decay_rate(6.46e9, 720.0)
    assert math.isinf(fc.purcell_t1(0.0, 200e6, kappa))
    assert fc.combined_t1(2e-6, 2e-6) == pytest.approx(1e-6)
    det = [-0.5 + 0.005 * i for i in range(201)]
    assert fc.anticrossing_g(0.0098, 6.46, det) == pytest.approx(0.0098, abs=1e-4)


def test_readout_histograms_are_seeded():
    dev = fc.reference_device()
    a = fc.readout_histograms(dev, 80e-9, 20000, seed=5)
    b = fc.readout_histograms(dev, 80e-9, 20000, seed=5)
    assert np.array_equal(a["signal"], b["signal"])
    assert a["signal"].shape == (40000,)
    assert 0.97 < a["fidelity"] < 0.995


def test_cli_in_process(tmp_path):
    code, out, _ = fc.run_cli(["qfp", "betasweep", "--sweep", "0:0.5:3"])
    assert code == 0
    assert out.splitlines()[0] == "phi_x_qfp,beta_l,chi_a_per_wb,m_eff_h"
    assert fc.run_cli(["nosuchcmd"])[0] == 2
    out_dir = tmp_path / "run"
    assert fc.run_cli(["measure", "shots", "--shots", "100", "--out", str(out_dir)])[0] == 0
    assert (out_dir / "measure_shots.manifest.json").exists()


def test_hamiltonian_levels_from_data():
    path = os.path.join(DATA, "normal_mode_coeffs.json")
    r = fc.lowest_levels(path, k=4)
    assert len(r["eigenvalues_ghz"]) == 4
    assert r["convergence_delta_ghz"] is None
    assert r["eigenvalues_ghz"] == sorted(r["eigenvalues_ghz"])
