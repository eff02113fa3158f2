import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal
from scipy.special import sph_legendre_p

from invsq.angular import (angular_spectrum, build_angular_operator, classify, critical_modes,
                           indicial_exponents, legendre_table, lowest_eigenvalue, parity_mass)
from invsq.errors import EigenError, SpecError, ThresholdError
from invsq.potential import SpherePotential


def fd_lowest_m0(P, n=4000):
    """Independent oracle: lowest eigenvalue of -(sin u')'/sin + P u on (0, pi)
    for m = 0, by a symmetric finite-volume discretisation in theta."""
    h = math.pi / n
    th = (np.arange(n) + 0.5) * h               # cell centres
    faces = np.arange(1, n) * h
    w = np.sin(th) * h                          # cell weights
    k = np.sin(faces) / h                       # face conductances
    diag = np.zeros(n)
    diag[:-1] += k
    diag[1:] += k
    diag += P(th) * w
    # symmetrise with the weights
    s = 1.0 / np.sqrt(w)
    d = diag * s * s
    off = -k * s[:-1] * s[1:]
    return eigh_tridiagonal(d, off, select="i", select_range=(0, 0), eigvals_only=True)[0]


def test_legendre_matches_scipy():
    theta = np.linspace(0.01, math.pi - 0.01, 37)
    for m in (0, 1, 3, 7):
        ls, table = legendre_table(20, m, theta)
        for l, row in zip(ls, table):
            ref = np.asarray(sph_legendre_p(l, m, theta)).reshape(-1)
            assert np.max(np.abs(row - ref)) < 1e-12


def test_zero_potential_exact():
    sp = angular_spectrum(SpherePotential.constant(0.0))
    for l, md in enumerate(sp.modes[:9]):
        assert abs(md.eigenvalue - l * (l + 1)) < 1e-8
        assert md.multiplicity == 2 * l + 1


@given(st.floats(-10, 10).filter(lambda c: all(abs(-l * (l + 1) - c - 0.25) > 1e-6 for l in range(5))))
@settings(max_examples=15, deadline=None)
def test_constant_potential_shifts(c):
    sp = angular_spectrum(SpherePotential.constant(c), 16)
    for l, md in enumerate(sp.modes[:5]):
        assert md.eigenvalue == pytest.approx(l * (l + 1) + c, abs=1e-9)
        assert md.mu == pytest.approx(-(l * (l + 1) + c), abs=1e-9)


@given(st.floats(-40, 40))
@settings(max_examples=40, deadline=None)
def test_indicial_exponent_relations(mu):
    a, b = indicial_exponents(mu, 3)
    assert abs(a + b + 1) < 1e-12
    assert abs(a * b - mu) < 1e-9 * max(1, abs(mu))
    if mu > 0.25:
        assert a.real == pytest.approx(-0.5) and a.imag < 0 < b.imag
    elif mu < 0.25:
        assert a.real < -0.5 < b.real


def test_critical_classification_constant_minus5():
    modes = critical_modes(angular_spectrum(SpherePotential.constant(-5.0)))
    assert [(round(m.mu, 9), m.multiplicity) for m in modes] == [(5.0, 1), (3.0, 3)]
    assert modes[0].tau == pytest.approx(math.sqrt(4.75))
    assert modes[1].tau == pytest.approx(math.sqrt(2.75))


def test_threshold_mode_rejected_under_hypothesis_i():
    sp = angular_spectrum(SpherePotential.constant(-0.25), 8)
    with pytest.raises(ThresholdError):
        critical_modes(sp, hypothesis="i")
    assert critical_modes(sp) == []


def test_hemisphere_against_finite_difference():
    for parity in ("even", "odd"):
        P = SpherePotential.hemisphere(0.01, parity)
        ours = lowest_eigenvalue(P, 32, m=0)
        ref = fd_lowest_m0(P)
        assert abs(ours - ref) < 2e-5, (parity, ours, ref)


def test_hemisphere_lowest_values():
    ev = angular_spectrum(SpherePotential.hemisphere(0.01, "even"), 32)
    od = angular_spectrum(SpherePotential.hemisphere(0.01, "odd"), 32)
    assert ev.eigenvalues.min() < -0.25
    assert od.eigenvalues.min() >= -1.0 / 18.0 - 1e-6
    # m = 0 block gives the full-matrix minimum for the odd potential
    assert lowest_eigenvalue(SpherePotential.hemisphere(0.01, "odd"), 32, m=0) == \
        pytest.approx(od.eigenvalues.min(), abs=1e-10)


def test_hemisphere_symmetry_and_profile():
    th = np.linspace(0, math.pi, 1001)
    ev = SpherePotential.hemisphere(0.01, "even")
    od = SpherePotential.hemisphere(0.01, "odd")
    assert np.allclose(ev(math.pi - th), ev(th), atol=1e-14)
    assert np.allclose(od(math.pi - th), -od(th), atol=1e-14)
    assert ev(np.array([0.3]))[0] == pytest.approx(-1 / 3)
    assert ev(np.array([math.pi / 2 - 0.005]))[0] == 0.0


def test_even_lowest_mode_is_even():
    sp = angular_spectrum(SpherePotential.hemisphere(0.01, "even"), 32)
    even, odd = parity_mass(sp.modes[0])
    assert odd < 1e-20 * even


def test_spectral_shift_model():
    sp = angular_spectrum(SpherePotential.spectral([-82.0, 1.0]), 8)
    modes = classify(sp)
    assert modes[0].eigenvalue == pytest.approx(-82.0) and modes[0].multiplicity == 1
    assert modes[1].eigenvalue == pytest.approx(3.0) and modes[1].multiplicity == 3


def test_small_basis_fails_loudly():
    with pytest.raises(EigenError):
        angular_spectrum(SpherePotential.hemisphere(0.01, "odd"), 16)


def test_bad_hemisphere_epsilon():
    with pytest.raises(SpecError):
        SpherePotential.hemisphere(0.5, "even")


def test_operator_is_symmetric():
    op = build_angular_operator(SpherePotential.hemisphere(0.01, "even"), 12)
    M = op.dense()
    assert np.allclose(M, M.T, atol=1e-13)
