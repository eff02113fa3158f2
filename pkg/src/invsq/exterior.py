"""Decaying exterior solutions of the d = 3 mode equation.

For r^2 f'' + 2 r f' + (mu - r^2 lam) f = 0 the decaying solution is
``X(r) = x^{-1/2} K_nu(x)`` with ``x = r sqrt(lam)`` and ``nu^2 = 1/4 - mu``.
Everything is computed once per mode on the fixed profile
``F(s) = K_nu(e^s)``, which solves ``F'' = (nu^2 + e^{2s}) F``; the lam
dependence is a pure rescaling.

The profile is integrated inward from a seed point far out, where the
large-x expansion of K_nu is accurate.  Values are stored relative to the
seed value (so F(seed) = 1) and ``log_scale = ln K_nu(seed)`` restores the
usual normalisation.  Non-oscillating modes are integrated in Riccati form
(ln F, F'/F), which cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp

from .angular import AngularMode
from .errors import IntegrationError, NodeError, QuadratureError

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14
X_LO = 1e-8
SEED_BASE = 30.0
FIT_WINDOW = (1e-4, 1e-2)
FIT_RESIDUAL_MAX = 1e-4


def _mu_of(mode):
    return mode.mu if isinstance(mode, AngularMode) else float(mode)


def asymptotic_k(nu2, x, max_terms=200):
    """(ln K_nu(x), x K_nu'(x) / K_nu(x)) from the large-x expansion.

    Terms a_k = prod_{j<=k} (4 nu^2 - (2j-1)^2) / (k! 8^k); the sum is cut at
    its smallest term.
    """
    total, dtotal = 1.0, -1.0 - 0.5 / x
    term = 1.0
    prev = math.inf
    for k in range(1, max_terms):
        term *= (4.0 * nu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(term) >= prev or abs(term) < 1e-18 * abs(total):
            break
        prev = abs(term)
        total += term
        dtotal += term * (-1.0 - (k + 0.5) / x)
    log_k = 0.5 * math.log(math.pi / (2.0 * x)) - x + math.log(abs(total))
    return log_k, x * dtotal / total


def seed_point(nu2):
    return SEED_BASE + abs(nu2)


@dataclass(frozen=True)
class ExteriorProfile:
    """F(s) = K_nu(e^s) / K_nu(x_seed) on [ln x_lo, ln x_seed]."""

    mu: float
    nu2: float
    x_lo: float
    x_seed: float
    log_scale: float
    oscillating: bool
    sol: object = field(repr=False, compare=False)
    tail_seed: float = 0.0

    def _y(self, x):
        s = np.log(np.asarray(x, dtype=float))
        if np.any(s < math.log(self.x_lo) - 1e-12) or np.any(s > math.log(self.x_seed) + 1e-12):
            raise ValueError(f"x outside the evaluated range [{self.x_lo:g}, {self.x_seed:g}]")
        return self.sol.sol(s)

    def state(self, x):
        """(F, dF/ds) at x, relative to the seed value."""
        y = self._y(x)
        if self.oscillating:
            return y[0], y[1]
        F = np.exp(y[0])
        return F, y[1] * F

    def log_ratio(self, x):
        """x F_x / F = dF/ds / F; for non-oscillating modes read off directly."""
        y = self._y(x)
        if self.oscillating:
            return y[1] / y[0]
        return y[1]

    def log_abs(self, x):
        """ln |K_nu(x)| in the usual normalisation."""
        y = self._y(x)
        base = np.log(np.abs(y[0])) if self.oscillating else y[0]
        return base + self.log_scale

    def phase(self, x):
        """Continuous angle of (F, dF/ds), equal to atan2 at the seed."""
        if not self.oscillating:
            F, Fs = self.state(x)
            return np.arctan2(Fs, F)
        return self._y(x)[3]

    def mass(self, x):
        """int_x^infty t K_nu(t)^2 dt relative to K_nu(x_seed)^2."""
        y = self._y(x)
        return y[2] if self.oscillating else np.exp(y[2])


@lru_cache(maxsize=64)
def _profile(mu, x_lo):
    nu2 = 0.25 - mu
    xs = seed_point(nu2)
    log_k, w_seed = asymptotic_k(nu2, xs)
    # tail mass beyond the seed, relative to K(xs)^2
    tail, err = quad(lambda x: x * math.exp(2.0 * (asymptotic_k(nu2, x)[0] - log_k)),
                     xs, xs + 60.0, epsabs=0.0, epsrel=1e-12, limit=200)
    s_seed, s_lo = math.log(xs), math.log(x_lo)
    oscillating = nu2 < 0

    if oscillating:
        # the fourth component is the unwrapped angle of (F, dF/ds)
        def rhs(s, y):
            e2 = math.exp(2.0 * s)
            F, Fs = y[0], y[1]
            dth = ((nu2 + e2) * F * F - Fs * Fs) / (F * F + Fs * Fs)
            return [Fs, (nu2 + e2) * F, -e2 * F * F, dth]
        y0 = [1.0, w_seed, tail, math.atan2(w_seed, 1.0)]
    else:
        def rhs(s, y):
            e2 = math.exp(2.0 * s)
            return [y[1], nu2 + e2 - y[1] * y[1], -math.exp(2.0 * s + 2.0 * y[0] - y[2])]
        y0 = [0.0, w_seed, math.log(tail)]
    sol = solve_ivp(rhs, (s_seed, s_lo), y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                    dense_output=True, max_step=0.02)
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationError(f"exterior integration failed: {sol.message}", r=float(math.exp(sol.t[-1])))
    return ExteriorProfile(mu, nu2, x_lo, xs, log_k, oscillating, sol, tail)


def exterior_profile(mode, x_lo: float = X_LO) -> ExteriorProfile:
    """Cached profile for a mode, valid for x in [x_lo, seed]."""
    return _profile(float(_mu_of(mode)), float(min(x_lo, X_LO)))


@dataclass(frozen=True)
class ExteriorSolution:
    mu: float
    lam: float
    r: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    Xprime: np.ndarray = field(repr=False)
    log_scale: float = 0.0
    normalization: str = "seed"

    @property
    def logderiv(self):
        return self.Xprime / self.X


def evaluate_exterior(mode, lam: float, r_lo: float, r_hi: float | None = None,
                      n: int = 400, r=None) -> ExteriorSolution:
    """X(r) = x^{-1/2} F and X'(r) on a geometric grid (or the supplied r).

    With the stored normalisation, multiply by exp(log_scale) to get
    r-space values of (r sqrt(lam))^{-1/2} K_nu(r sqrt(lam)).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    k = math.sqrt(lam)
    if r is None:
        if r_hi is None:
            # stop short of the seed so difference stencils stay in range
            r_hi = 0.98 * seed_point(0.25 - _mu_of(mode)) / k
        if not 0 < r_lo < r_hi:
            raise ValueError("need 0 < r_lo < r_hi")
        r = np.geomspace(r_lo, r_hi, n)
    r = np.asarray(r, dtype=float)
    x = r * k
    prof = exterior_profile(mode, x_lo=float(np.min(x)))
    if np.max(x) > prof.x_seed * (1 + 1e-12):
        raise ValueError(f"r_hi * sqrt(lam) exceeds the seed point {prof.x_seed:g}")
    F, Fs = prof.state(x)
    X = F / np.sqrt(x)
    Xp = (Fs - 0.5 * F) / (np.sqrt(x) * r)
    return ExteriorSolution(prof.mu, float(lam), r, X, Xp, prof.log_scale)


def ode_residual(sol: ExteriorSolution, rel_step: float = 5e-4):
    """Relative residual of r^2 X'' + 2 r X' + (mu - r^2 lam) X at the grid.

    X'' comes from a fourth-order difference of the computed X', so the
    check does not reuse the equation itself.
    """
    r = sol.r
    # X varies on the scale r / (1 + r sqrt(lam) + |nu|)
    h = rel_step * r / (1.0 + r * math.sqrt(sol.lam) + math.sqrt(abs(0.25 - sol.mu)))
    pts = np.concatenate([r - 2 * h, r - h, r + h, r + 2 * h])
    Xp = evaluate_exterior(sol.mu, sol.lam, 0, r=pts).Xprime.reshape(4, -1)
    Xpp = (Xp[0] - 8 * Xp[1] + 8 * Xp[2] - Xp[3]) / (12 * h)
    terms = [r * r * Xpp, 2 * r * sol.Xprime, sol.mu * sol.X, -r * r * sol.lam * sol.X]
    scale = np.sum(np.abs(terms), axis=0)
    return np.abs(np.sum(terms, axis=0)) / scale


def log_derivative(mode, lam: float, rho: float) -> float:
    """X'(rho) / X(rho) for the decaying solution."""
    x = rho * math.sqrt(lam)
    prof = exterior_profile(mode, x_lo=x)
    if prof.oscillating:
        F, Fs = prof.state(x)
        amp = math.hypot(float(F), float(Fs))
        if abs(F) < 1e-10 * amp:
            raise NodeError(f"node at matching radius rho = {rho:g}")
    return float((prof.log_ratio(x) - 0.5) / rho)


def tail_mass(mode, lam: float, rho: float) -> float:
    """int_rho^infty X(r)^2 r^2 dr with X = x^{-1/2} K_nu(x), x = r sqrt(lam)."""
    x = rho * math.sqrt(lam)
    prof = exterior_profile(mode, x_lo=x)
    m = float(prof.mass(x))
    if not m > 0 or not math.isfinite(m):
        raise QuadratureError(f"tail mass quadrature failed at rho = {rho:g}")
    return m * math.exp(2.0 * prof.log_scale) * lam ** -1.5


def small_x_basis(tau, x):
    """x^{i tau} sum_k (x^2/4)^k / (k! (1 + i tau)_k), a complex solution of
    the profile equation whose real and imaginary parts span all solutions."""
    x = np.asarray(x, dtype=float)
    z = 0.25 * x * x
    term = np.ones_like(x, dtype=complex)
    total = term.copy()
    for k in range(1, 60):
        term = term * z / (k * (k + 1j * tau))
        total = total + term
        if np.max(np.abs(term)) < 1e-18:
            break
    return np.exp(1j * tau * np.log(x)) * total


@dataclass(frozen=True)
class PhaseConstantD:
    tau: float
    d_value: float
    fit_window: tuple
    fit_residual: float
    amplitude: float


def phase_constant_d(tau: float, fit_window=FIT_WINDOW, n: int = 200) -> PhaseConstantD:
    """Constants (A, d) with x^{1/2} X(x) = A cos(tau ln x + d) + O(x^2).

    The profile is fitted exactly on the window by the two real solutions
    Re/Im of ``small_x_basis``, so the answer does not depend on the window
    beyond round-off.  A is in the usual K normalisation.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    lo, hi = fit_window
    prof = exterior_profile(0.25 + tau * tau, x_lo=lo)
    x = np.geomspace(lo, hi, n)
    F, _ = prof.state(x)
    u = small_x_basis(tau, x)
    M = np.column_stack([u.real, u.imag])
    (p, q), *_ = np.linalg.lstsq(M, F, rcond=None)
    amp = math.hypot(p, q)
    resid = float(np.max(np.abs(M @ np.array([p, q]) - F)) / amp)
    if resid > FIT_RESIDUAL_MAX:
        raise QuadratureError(f"phase fit residual {resid:.3g} exceeds {FIT_RESIDUAL_MAX:g}; narrow the window")
    d = math.atan2(-q, p) % (2 * math.pi)
    return PhaseConstantD(float(tau), d, (lo, hi), resid, amp * math.exp(prof.log_scale))
