import math

import numpy as np
import pytest
from scipy.integrate import simpson

from invsq.angular import AngularMode
from invsq.approxefn import (build_phi, check_delta, eigenfunction_distance, interior_only_residual,
                             k_exponent, localize_spectrum, make_smoothing, residual_norm, rho_rule,
                             solve_approx_lambda)
from invsq.errors import HypothesisError

NS = (8, 10, 12, 14, 17, 20, 24)


@pytest.fixture(scope="module")
def approx(model, ladder25):
    out = {}
    for n in NS:
        lam = solve_approx_lambda(model, n, ladder=ladder25)
        phi = build_phi(model, lam)
        out[n] = (lam, phi, residual_norm(phi))
    return out


def test_bump_values():
    h = make_smoothing()
    t = np.array([1.0, 1.25, 1.5, 2.0, 2.5, 0.5])
    assert np.allclose(h(t), [0.0, 0.25, 0.5, 0.0, 0.0, 0.0], atol=1e-14)
    assert h(np.array([1.0]), 1)[0] == 1.0
    rec = h.smoothness
    assert max(abs(v) for v in rec[1.5]) < 1e-12
    assert max(abs(v) for v in rec[2.0]) < 1e-12


def test_bump_c2_numerically():
    h = make_smoothing()
    for t0 in (1.5, 2.0):
        for k in range(3):
            a = h(np.array([t0 - 1e-9]), k)[0]
            b = h(np.array([t0 + 1e-9]), k)[0]
            assert abs(a - b) < 1e-6


def test_unknown_bump_kind():
    with pytest.raises(ValueError):
        make_smoothing("cubic")


def test_delta_constraint():
    modes = [AngularMode.from_mu(82.0), AngularMode.from_mu(-2.0, multiplicity=3)]
    assert check_delta(0.2, modes) == pytest.approx(0.25)
    with pytest.raises(HypothesisError):
        check_delta(0.3, modes)
    with pytest.raises(HypothesisError):
        check_delta(0.0, modes)
    # -alpha/(1 - 2 alpha) >= 1/4 whenever alpha < -1/2, so 1/4 is the binding cap
    for mu in (0.2, 0.0, -2.0, -30.0):
        assert check_delta(0.1, [AngularMode.from_mu(82.0), AngularMode.from_mu(mu)]) == pytest.approx(0.25)


def test_rho_rule_exact(approx):
    for n, (lam, phi, _) in approx.items():
        if phi.rho > 1.0:
            assert phi.rho * math.sqrt(lam) == pytest.approx(lam ** 0.1, rel=1e-14)
        else:
            assert phi.rho == 1.0


def test_matching_makes_chi1_vanish(approx):
    for lam, phi, _ in approx.values():
        assert abs(phi.terms[0].slope_mismatch) < 1e-8
        assert phi.terms[0].chi == 0.0


def test_phi_is_c1_at_rho(approx):
    for lam, phi, _ in approx.values():
        rho = phi.rho
        eps = 1e-7 * rho
        left, right = phi.radial(0, np.array([rho * (1 - 1e-13), rho * (1 + 1e-13)]))
        assert abs(left - right) < 1e-8 * abs(left)
        dl = (phi.radial(0, np.array([rho]))[0] - phi.radial(0, np.array([rho - eps]))[0]) / eps
        dr = (phi.radial(0, np.array([rho + eps]))[0] - phi.radial(0, np.array([rho * (1 + 1e-13)]))[0]) / eps
        scale = abs(left) / rho + abs(dl)
        assert abs(dl - dr) < 1e-5 * scale


def test_approx_close_to_xi_and_exact(approx, ladder25):
    dev = [abs(approx[n][0] / ladder25.xi_n[n - 1] - 1) for n in NS]
    assert all(b < a for a, b in zip(dev, dev[1:]))
    assert abs(approx[24][0] / ladder25.lambda_n[23] - 1) < 2e-3


def test_phi1_scaling_and_norm(approx):
    r = [phi.phi1 / lam ** 0.25 for lam, phi, _ in approx.values()]
    assert max(np.abs(r)) / min(np.abs(r)) < 1.1
    c = [phi.norm() * math.sqrt(lam) for lam, phi, _ in approx.values()]
    assert min(c) > 0.3


def test_interior_only_residual_matches_quadrature(approx):
    lam, phi, (num, ratio) = approx[14]
    assert num == pytest.approx(interior_only_residual(phi), rel=1e-14)
    # independent quadrature of int_0^rho Y^2 r^2 dr on the zero mode
    s = np.linspace(math.log(1e-4), math.log(phi.rho), 200001)
    r = np.exp(s)
    Y = phi.radial(0, r)
    mass = simpson(Y * Y * r ** 3, x=s)
    assert num == pytest.approx(lam * math.sqrt(mass), rel=1e-6)


def test_residual_ratio_decays(approx):
    lams = np.array([approx[n][0] for n in NS])
    ratios = np.array([approx[n][2][1] for n in NS])
    slope = np.polyfit(np.log(lams), np.log(ratios), 1)[0]
    assert slope > 1.0


def test_intervals_isolate_eigenvalues(approx, ladder25):
    ivs = []
    for n in NS:
        lam, phi, (num, ratio) = approx[n]
        lo, hi = localize_spectrum(phi, ratio)
        inside = [m for m, e in zip(ladder25.n, ladder25.lambda_n) if lo <= e <= hi]
        assert inside == [n]
        ivs.append((lo, hi))
    for (lo1, hi1), (lo2, hi2) in zip(ivs, ivs[1:]):
        assert hi2 < lo1


def test_eigenfunction_proximity(approx, ladder25):
    for n in (10, 14, 20):
        lam, phi, (num, ratio) = approx[n]
        exact = ladder25.lambda_n[n - 1]
        gap = min(abs(exact - e) for e in ladder25.lambda_n if e != exact)
        assert eigenfunction_distance(phi, ladder25, n) <= 6 * ratio / gap


def test_nonprincipal_modes(model, approx):
    vals = []
    for n in (12, 17, 24):
        lam = approx[n][0]
        phi = build_phi(model, lam, mode_cut=3, psi=[1.0, 0.5])
        assert len(phi.terms) == 3
        K = k_exponent([t.mode for t in phi.terms])
        assert K == pytest.approx(1.5)
        for t in phi.terms[1:]:
            a = t.mode.alpha.real
            bound = abs(t.psi) * phi.rho ** a * abs(a) * (phi.rho * math.sqrt(lam)) ** K
            vals.append(abs(t.chi) / bound)
            # C^1 join: value and slope of psi r^alpha equal phi X + chi h at rho
            rho = phi.rho
            k = phi.terms.index(t)
            inner = t.psi * rho ** a
            outer = phi.radial(k, np.array([rho * (1 + 1e-12)]))[0]
            assert outer == pytest.approx(inner, rel=1e-9)
        num, ratio = residual_norm(phi)
        assert num > interior_only_residual(phi) * (1 - 1e-12)
        vals.append(0.0)
    assert max(vals) < 10.0
    # Phi' (non-principal exterior part) is small against lam^-1/2
    p24 = build_phi(model, approx[24][0], mode_cut=3)
    p12 = build_phi(model, approx[12][0], mode_cut=3)
    assert p24.nonprincipal_exterior_norm() * math.sqrt(p24.lam) < \
        p12.nonprincipal_exterior_norm() * math.sqrt(p12.lam)


def test_rho_clamped_at_r0():
    assert rho_rule(4.0, 0.2, 1.0) == 1.0
    assert rho_rule(1e-4, 0.2, 1.0) == pytest.approx(1e-4 ** -0.4)
