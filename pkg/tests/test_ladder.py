import math

import mpmath as mp
import numpy as np
import pytest

from invsq.errors import BracketError, HypothesisError
from invsq.ladder import (SIGMA_HALF_MU, InteriorModel, canonical_C, compute_ladder, counting_function,
                          critical_channel, eigenfunction, interior_solution, labelled_eigenvalue,
                          ladder_potential, localization, match_eigenvalue, model_inertia_count,
                          phase_constant_c, predicted_xi, ramp)
from invsq.potential import SpherePotential

SIGMA = 0.5


def test_ramp_properties():
    x = np.linspace(0, 1, 11)
    assert ramp(np.array([0.0]))[0] == 0 and ramp(np.array([1.0]))[0] == 1
    assert np.all(np.diff(ramp(x)) > 0)
    h = 1e-5
    d1 = (ramp(np.array([1.0])) - ramp(np.array([1.0 - h])))[0] / h
    assert abs(d1) < 1e-4


def test_sigma_half_constant():
    mode, _ = critical_channel(ladder_potential())
    assert mode.mu == pytest.approx(SIGMA_HALF_MU)
    assert math.exp(-2 * math.pi / mode.tau) == pytest.approx(SIGMA, rel=1e-14)


def test_critical_channel_hypothesis():
    with pytest.raises(HypothesisError):
        critical_channel(SpherePotential.constant(-SIGMA_HALF_MU))


def test_zero_coupling_interior_is_sinh():
    model = InteriorModel(coupling="zero")
    mode, _ = critical_channel(ladder_potential())
    lam = 2.3
    sol = interior_solution(mode, lam, model)
    r = np.linspace(0.1, 1.0, 10)
    k = math.sqrt(lam)
    ref = np.sinh(k * r) / (k * r)
    ours = sol.Y(r)
    assert np.max(np.abs(ours / ref / (ours[0] / ref[0]) - 1)) < 1e-9


def test_zero_coupling_eigenvalues_mpmath():
    """Wronskian of sinh(kr)/(kr) and x^-1/2 K_{i tau}(x) changes sign at our lam_n."""
    model = InteriorModel(coupling="zero")
    mode, _ = critical_channel(ladder_potential())
    tau = mode.tau
    mp.mp.dps = 30

    def wronskian(lam):
        k = mp.sqrt(lam)
        Y = mp.sinh(k) / k
        Yp = mp.cosh(k) - mp.sinh(k) / k
        X = lambda r: (r * k) ** -0.5 * mp.besselk(1j * tau, r * k)
        Xv = X(mp.mpf(1))
        Xp = mp.diff(X, mp.mpf(1))
        return mp.re(Y * Xp - Yp * Xv) / abs(Xv)

    for n in (1, 3, 6):
        lam = labelled_eigenvalue(model, mode, n)
        a, b = wronskian(lam * (1 - 1e-7)), wronskian(lam * (1 + 1e-7))
        assert a * b < 0, (n, lam)


def test_labels_against_inertia(model):
    mode, _ = critical_channel(ladder_potential())
    for n in (2, 5):
        lam = labelled_eigenvalue(model, mode, n)
        # n eigenvalues lie above lam (1 - 1e-3), n - 1 above lam (1 + 1e-3)
        assert counting_function(mode, lam * (1 - 1e-3), model) == n
        assert counting_function(mode, lam * (1 + 1e-3), model) == n - 1
        assert model_inertia_count(model, mode, lam * (1 - 2e-2)) == n
        assert model_inertia_count(model, mode, lam * (1 + 2e-2)) == n - 1


def test_predicted_xi_geometric():
    c, d = 1.0, 2.0
    xs = [predicted_xi(n, c, d, SIGMA_HALF_MU) for n in range(1, 6)]
    assert np.allclose(np.array(xs[1:]) / np.array(xs[:-1]), SIGMA, rtol=1e-13)
    assert 0 <= canonical_C(c, d) < 2 * math.pi


def test_phase_constant_c_window_stable(model):
    mode, _ = critical_channel(ladder_potential())
    a = phase_constant_c(model, mode)
    b = phase_constant_c(model, mode, fit_window=(2.0, 2.0 * math.exp(4 * math.pi / mode.tau)))
    diff = (a.c_value - b.c_value + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-8
    assert a.amplitude == pytest.approx(b.amplitude, rel=1e-8)


def test_empty_bracket(model):
    mode, _ = critical_channel(ladder_potential())
    lam = labelled_eigenvalue(model, mode, 10)
    with pytest.raises(BracketError):
        match_eigenvalue(model, mode, (lam * 1.05, lam * 1.2))


def test_ladder_ratios_and_xi(ladder25):
    lad = ladder25
    assert lad.onset is not None and lad.onset <= 10
    r = np.array(lad.ratios)
    assert np.all(np.abs(1.0 / r[14:] - 2.0) < 1e-4) or np.all(np.abs(r[14:] - 2.0) < 1e-4)
    dev = np.abs(np.array(lad.lambda_n) / np.array(lad.xi_n) - 1)
    assert np.all(np.diff(dev[5:]) < 0)
    assert dev[-1] < 1e-3


def test_ladder_labels_consistent(ladder25, model):
    mode, _ = critical_channel(ladder_potential())
    for n in (4, 12, 25):
        lam = ladder25.lambda_n[n - 1]
        assert counting_function(mode, lam * (1 - 1e-9), model) == n
        assert counting_function(mode, lam * (1 + 1e-9), model) == n - 1


def test_eigenfunction_normalised(ladder25, model):
    mode, _ = critical_channel(ladder_potential())
    ef = eigenfunction(model, mode, ladder25.lambda_n[9])
    assert ef.mass_below(100.0 / math.sqrt(ef.lam)) == pytest.approx(1.0, abs=1e-12)
    assert ef.mass_below(model.r0) + ef.mass_above(model.r0) == pytest.approx(1.0, abs=1e-12)


def test_localization_monotone_interior_mass(ladder25, model):
    reps = [localization(model, ladder25, n, constants=(0.0749, 0.2556)) for n in (10, 15, 20)]
    im = [r.interior_mass for r in reps]
    assert im[0] > im[1] > im[2]
