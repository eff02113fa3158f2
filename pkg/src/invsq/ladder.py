"""Exact eigenvalue ladder of a separable d = 3 model.

Inside r0 the potential is ``f(r) P / r^2 + w(r)``; outside it is ``P / r^2``.
Each angular degree l gives a radial problem, and in the critical channel the
eigenvalues -lam_n accumulate geometrically at 0.  We find them by exact
shooting: the regular interior solution at the trial lam is matched against
the decaying exterior solution at r0.

Both sides are tracked by continuous phase angles of (G, dG/ds) with
``G = r^{1/2} Y`` and ``s = ln r``.  The difference of the two angles is
monotone in lam and its passages through multiples of pi are the
eigenvalues, which gives every root a definite label n.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .angular import AngularMode, angular_spectrum, classify
from .errors import BracketError, ConvergenceError, HypothesisError, IntegrationError
from .exterior import exterior_profile
from .oscillation import _sturm_negative_count
from .potential import PiecewisePolynomial, SpherePotential

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-13
ROOT_RTOL = 1e-12
START_FRACTION = 1e-4
SIGMA_HALF_MU = 0.25 + (2.0 * math.pi / math.log(2.0)) ** 2


def ramp(x):
    """C^2 ramp 6x^2 - 8x^3 + 3x^4: ramp(0) = 0, ramp(1) = 1, ramp'(1) = ramp''(1) = 0."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * (6.0 + x * (-8.0 + 3.0 * x))


@dataclass(frozen=True)
class InteriorModel:
    """f(r) P / r^2 + w(r) inside r0, P / r^2 outside.

    ``coupling`` is 'ramp' (f = ramp(r / r0)) or 'zero' (f = 0 inside).
    ``w`` is a constant or a PiecewisePolynomial on [0, r0].
    """

    r0: float = 1.0
    coupling: str = "ramp"
    w: float | PiecewisePolynomial = 0.0
    W: float = 0.0

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if self.coupling not in ("ramp", "zero"):
            raise ValueError(f"unknown coupling {self.coupling!r}")

    def f(self, r):
        r = np.asarray(r, dtype=float)
        inside = ramp(r / self.r0) if self.coupling == "ramp" else np.zeros_like(r)
        return np.where(r >= self.r0, 1.0, inside)

    def w_of(self, r):
        r = np.asarray(r, dtype=float)
        val = self.w(r) if isinstance(self.w, PiecewisePolynomial) else np.full_like(r, float(self.w))
        return np.where(r >= self.r0, 0.0, val)

    def f_scalar(self, r):
        if r >= self.r0:
            return 1.0
        if self.coupling == "zero":
            return 0.0
        x = r / self.r0
        return x * x * (6.0 + x * (-8.0 + 3.0 * x))

    def w_scalar(self, r):
        if r >= self.r0:
            return 0.0
        if isinstance(self.w, PiecewisePolynomial):
            return float(self.w(np.array([r]))[0])
        return float(self.w)

    @property
    def f2(self):
        """Coefficient of (r / r0)^2 in f near r = 0."""
        return 6.0 if self.coupling == "ramp" else 0.0

    def well_depth(self, mu):
        """A lam above which the channel has no eigenvalues."""
        wmin = -self.w_scalar(0.0) if not isinstance(self.w, PiecewisePolynomial) else self.w.bound()
        return max(self.f2, 1.0) * abs(mu) / self.r0 ** 2 + abs(wmin) + 1.0


def ladder_potential(mu1: float = SIGMA_HALF_MU) -> SpherePotential:
    """Single critical channel: degree 0 shifted down to -mu1, the rest free."""
    return SpherePotential.spectral([-mu1])


def _degree(mode):
    return int(mode.degree) if getattr(mode, "degree", None) is not None else 0


def mu_eff(mode, model, r):
    """Radial coupling f mu - (1 - f) l(l+1); equals mu outside r0."""
    l = _degree(mode)
    fr = model.f_scalar(r)
    return fr * mode.mu - (1.0 - fr) * l * (l + 1)


@dataclass(frozen=True)
class InteriorSolution:
    """Regular solution in G = r^{1/2} Y on [r_start, r_hi].

    Normalised by Y ~ r^l at r_start.  ``mass`` is int_0^r Y^2 r^2 dr.
    """

    mode: AngularMode
    lam: float
    r_start: float
    r_hi: float
    sol: object = field(repr=False, compare=False)

    def state(self, r):
        """(G, dG/ds, theta, mass) at r."""
        return self.sol.sol(np.log(np.asarray(r, dtype=float)))

    def Y(self, r):
        r = np.asarray(r, dtype=float)
        return self.state(r)[0] / np.sqrt(r)

    def Yprime(self, r):
        r = np.asarray(r, dtype=float)
        G, Gs = self.state(r)[:2]
        return (Gs - 0.5 * G) / r ** 1.5

    def end(self):
        return self.sol.y[:, -1]


def _interior_start(mode, lam, model):
    l = _degree(mode)
    rs = START_FRACTION * model.r0
    k = model.f2 * (mode.mu + l * (l + 1)) / model.r0 ** 2 - model.w_scalar(0.0) - lam
    c = k / (2.0 * (2 * l + 3))
    Y = rs ** l * (1.0 - c * rs * rs)
    Yp = l * rs ** (l - 1) * (1.0 - c * rs * rs) - 2.0 * c * rs ** (l + 1) if l > 0 else -2.0 * c * rs
    G = math.sqrt(rs) * Y
    Gs = math.sqrt(rs) * (0.5 * Y + rs * Yp)
    mass = rs ** (2 * l + 3) / (2 * l + 3)
    return rs, [G, Gs, math.atan2(Gs, G), mass]


def interior_solution(mode: AngularMode, lam: float, model: InteriorModel,
                      r_hi: float | None = None, dense: bool = True) -> InteriorSolution:
    """Integrate r^2 Y'' + 2 r Y' + (mu_eff(r) - r^2 (w + lam)) Y = 0 outward."""
    r_hi = model.r0 if r_hi is None else float(r_hi)
    rs, y0 = _interior_start(mode, lam, model)
    if r_hi <= rs:
        raise ValueError("r_hi must exceed the series start radius")

    def rhs(s, y):
        r = math.exp(s)
        q = mu_eff(mode, model, r) - 0.25 - r * r * (model.w_scalar(r) + lam)
        G, Gs = y[0], y[1]
        c, sn = math.cos(y[2]), math.sin(y[2])
        return [Gs, -q * G, -(q * c * c + sn * sn), G * G * r * r]

    # the ramp has a kink in f''' at r0, so stop there before continuing
    spans = [(math.log(rs), math.log(min(r_hi, model.r0)))]
    if r_hi > model.r0:
        spans.append((math.log(model.r0), math.log(r_hi)))
    sols = []
    y = y0
    for a, b in spans:
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                        dense_output=dense)
        if not sol.success:
            raise IntegrationError(f"interior integration failed: {sol.message}", r=math.exp(sol.t[-1]))
        sols.append(sol)
        y = sol.y[:, -1]
    return InteriorSolution(mode, float(lam), rs, r_hi, _Joined(sols))


class _Joined:
    """Concatenate piecewise solve_ivp results behind one ``sol`` / ``y``."""

    def __init__(self, sols):
        self.parts = sols
        self.y = sols[-1].y
        self.t = sols[-1].t

    def sol(self, s):
        s = np.asarray(s, dtype=float)
        if len(self.parts) == 1:
            return self.parts[0].sol(s)
        edge = self.parts[0].t[-1]
        out = np.empty((4,) + s.shape)
        lo = s <= edge
        if np.any(lo):
            out[:, lo] = self.parts[0].sol(s[lo])
        if np.any(~lo):
            out[:, ~lo] = self.parts[1].sol(s[~lo])
        return out


def matching_phase(mode, lam, model) -> float:
    """Interior angle minus exterior angle at r0 (continuous in lam)."""
    it = interior_solution(mode, lam, model, dense=False)
    th_int = it.end()[2]
    prof = exterior_profile(mode, x_lo=model.r0 * math.sqrt(lam))
    th_ext = float(prof.phase(model.r0 * math.sqrt(lam)))
    return th_int - th_ext


def matching_function(mode, lam, model) -> float:
    """sin of the matching phase: the Wronskian of the two solutions at r0
    divided by the norms of their (G, G_s) vectors."""
    return math.sin(matching_phase(mode, lam, model))


def counting_function(mode, lam, model, top=None) -> int:
    """Number of eigenvalues -lam' < -lam in the channel."""
    lam_top = model.well_depth(mode.mu) if top is None else top
    ref = math.floor(matching_phase(mode, lam_top, model) / math.pi)
    return int(ref - math.floor(matching_phase(mode, lam, model) / math.pi))


def match_eigenvalue(model, mode, bracket, n=None, samples: int = 9) -> float:
    """Root of the matching function in the bracket, to relative 1e-12.

    The root is polished by Brent's method in ln lam.  A coarse scan first
    checks that the bracket holds exactly one sign change.
    """
    lo, hi = sorted(float(b) for b in bracket)
    if not 0 < lo < hi:
        raise BracketError("bracket must be positive and non-empty", n)
    grid = np.geomspace(lo, hi, samples)
    vals = np.array([matching_function(mode, g, model) for g in grid])
    flips = int(np.sum(np.signbit(vals[1:]) != np.signbit(vals[:-1])))
    if flips == 0:
        raise BracketError(f"empty bracket [{lo:.6g}, {hi:.6g}]", n)
    if flips > 1:
        raise BracketError(f"{flips} sign changes in [{lo:.6g}, {hi:.6g}]; refine the bracket", n)
    k = int(np.nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1]))[0][0])
    g = lambda u: matching_function(mode, math.exp(u), model)
    u = brentq(g, math.log(grid[k]), math.log(grid[k + 1]), xtol=ROOT_RTOL, rtol=1e-15)
    return math.exp(u)


def labelled_eigenvalue(model, mode, n, top=None) -> float:
    """lam_n found from the phase label: the matching phase equals
    (ref - n + 1) pi, with ref the label of a lam above the spectrum."""
    lam_top = model.well_depth(mode.mu) if top is None else top
    ref = math.floor(matching_phase(mode, lam_top, model) / math.pi)
    target = (ref - n + 1) * math.pi
    h = lambda u: matching_phase(mode, math.exp(u), model) - target
    hi = math.log(lam_top)
    if h(hi) <= 0:
        raise BracketError("reference lam is not above the spectrum", n)
    step = 2.0 * math.pi / max(mode.tau, 1e-3)
    lo = hi - step
    while h(lo) > 0:
        hi, lo = lo, lo - step
        if lo < -700:
            raise BracketError("label not reached before underflow", n)
    u = brentq(h, lo, hi, xtol=ROOT_RTOL, rtol=1e-15)
    return math.exp(u)


# phase constants --------------------------------------------------------

@dataclass(frozen=True)
class PhaseConstantC:
    c_value: float
    amplitude: float
    fit_window: tuple
    fit_residual: float


def phase_constant_c(model, mode, fit_window=None, n: int = 200) -> PhaseConstantC:
    """Fit r^{1/2} Y(r; lam = 0) = A cos(tau ln r + c) on a window beyond r0."""
    if not mode.critical:
        raise HypothesisError("phase constant c needs a critical mode")
    tau = mode.tau
    if fit_window is None:
        fit_window = (model.r0, model.r0 * math.exp(4.0 * math.pi / tau))
    lo, hi = fit_window
    if lo < model.r0 - 1e-12:
        raise ValueError("fit window must lie in r >= r0")
    it = interior_solution(mode, 0.0, model, r_hi=hi)
    r = np.geomspace(lo, hi, n)
    G = it.state(r)[0]
    s = np.log(r)
    M = np.column_stack([np.cos(tau * s), np.sin(tau * s)])
    (a, b), *_ = np.linalg.lstsq(M, G, rcond=None)
    amp = math.hypot(a, b)
    resid = float(np.max(np.abs(M @ np.array([a, b]) - G)) / amp)
    if resid > 1e-4:
        raise ConvergenceError(f"phase fit residual {resid:.3g} exceeds 1e-4")
    # a cos + b sin = A cos(x + c) with A cos c = a, A sin c = -b
    c = math.atan2(-b, a) % (2.0 * math.pi)
    return PhaseConstantC(c, amp, (lo, hi), resid)


def canonical_C(c, d):
    return (2.0 * (d - c)) % (2.0 * math.pi)


def predicted_xi(n, c, d, mu1, branch: int = 0) -> float:
    """xi_n = exp((-2 pi (n + branch) - C) / tau), C = 2(d - c) in [0, 2 pi)."""
    tau = math.sqrt(mu1 - 0.25)
    C = canonical_C(c, d)
    return math.exp((-2.0 * math.pi * (n + branch) - C) / tau)


def align_branch(n, lam_n, c, d, mu1) -> int:
    """Integer branch putting xi_n nearest lam_n in ln lam."""
    tau = math.sqrt(mu1 - 0.25)
    x = (-tau * math.log(lam_n) - canonical_C(c, d)) / (2.0 * math.pi) - n
    return int(round(x))


# ladder -----------------------------------------------------------------

def critical_channel(potential: SpherePotential, basis_size: int = 16):
    """The unique critical mode; the ladder needs exactly one, and it must be simple."""
    spec = angular_spectrum(potential, basis_size)
    modes = classify(spec, 3)
    crit = [m for m in modes if m.critical]
    if len(crit) != 1 or crit[0].multiplicity != 1:
        raise HypothesisError(
            f"need exactly one simple critical angular mode, found {[(m.mu, m.multiplicity) for m in crit]}")
    if any(m.borderline for m in modes):
        raise HypothesisError("an angular eigenvalue sits on the threshold -1/4")
    return crit[0], modes


@dataclass(frozen=True)
class EigenLadder:
    n: tuple
    lambda_n: tuple
    ratios: tuple
    sigma: float
    a_estimates: tuple
    xi_n: tuple
    c: float
    d: float
    branch: int
    mu1: float
    onset: int | None = None
    bracketed: tuple = ()


def compute_ladder(model: InteriorModel, potential: SpherePotential | None = None, n_max: int = 25,
                   threads: int | None = None) -> EigenLadder:
    """lam_1..lam_{n_max} of the critical channel, with xi_n predictions.

    Each lam_n is first sought in the bracket [xi (1 + sigma)/2, xi (3 - sigma)/2]
    (widened once by 50 %); the phase label must confirm the root is the n-th.
    Where that fails (small n) the label alone fixes the root.  ``onset``
    is the first n from which every bracket succeeded.
    """
    from .exterior import phase_constant_d

    potential = ladder_potential() if potential is None else potential
    mode, _ = critical_channel(potential)
    mu1, tau = mode.mu, mode.tau
    sigma = math.exp(-2.0 * math.pi / tau)
    c = phase_constant_c(model, mode).c_value
    d = phase_constant_d(tau).d_value
    top = model.well_depth(mu1)

    lam_ref = labelled_eigenvalue(model, mode, n_max, top)
    branch = align_branch(n_max, lam_ref, c, d, mu1)

    def one(n):
        xi = predicted_xi(n, c, d, mu1, branch)
        for widen in (1.0, 1.5):
            half = widen * xi * (1.0 - sigma) / 2.0
            try:
                lam = match_eigenvalue(model, mode, (xi - half, xi + half), n)
            except BracketError:
                continue
            if counting_function(mode, lam * (1 - 1e-9), model, top) == n:
                return lam, True
        return labelled_eigenvalue(model, mode, n, top), False

    ns = list(range(1, n_max + 1))
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, ns))
    else:
        results = [one(n) for n in ns]
    lams = tuple(r[0] for r in results)
    ok = tuple(r[1] for r in results)
    onset = None
    for k in range(n_max - 1, -1, -1):
        if not ok[k]:
            break
        onset = k + 1
    ratios = tuple(lams[k] / lams[k + 1] for k in range(n_max - 1))
    a_est = tuple(lams[k] / sigma ** (k + 1) for k in range(n_max))
    xis = tuple(predicted_xi(n, c, d, mu1, branch) for n in ns)
    return EigenLadder(tuple(ns), lams, ratios, sigma, a_est, xis, c, d, branch, mu1, onset, ok)


def model_inertia_count(model, mode, lam, R=None, h: float = 4e-3) -> int:
    """Eigenvalues below -lam in the channel, from the inertia of the
    second-difference matrix of -G'' - q G on [ln r_start, ln R]."""
    rs = START_FRACTION * model.r0
    if R is None:
        R = 40.0 / math.sqrt(lam)
    s0, S = math.log(rs), math.log(R)
    n = int(math.ceil((S - s0) / h))
    hh = (S - s0) / n
    s = s0 + hh * np.arange(1, n)
    r = np.exp(s)
    l = _degree(mode)
    fr = model.f(r)
    q = fr * mode.mu - (1 - fr) * l * (l + 1) - 0.25 - r * r * (model.w_of(r) + lam)
    return _sturm_negative_count(2.0 / hh ** 2 - q, np.full(n - 2, -1.0 / hh ** 2))


# localization -----------------------------------------------------------

@dataclass(frozen=True)
class LocalizationReport:
    n: int
    lam: float
    mass_fraction: float
    annulus: tuple
    C_minus: float
    C_plus: float
    interior_mass: float
    x_bounds: tuple = ()


@dataclass(frozen=True)
class Eigenfunction:
    """Normalised radial eigenfunction: interior solution up to r0, then
    ``amp * F(ln(r sqrt(lam)))`` in the G variable."""

    mode: AngularMode
    lam: float
    interior: InteriorSolution
    amp: float
    total_mass: float
    model: InteriorModel

    def G(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inside = r <= self.model.r0
        if np.any(inside):
            out[inside] = self.interior.state(r[inside])[0]
        if np.any(~inside):
            prof = exterior_profile(self.mode, x_lo=self.model.r0 * math.sqrt(self.lam))
            out[~inside] = self.amp * prof.state(r[~inside] * math.sqrt(self.lam))[0]
        return out / math.sqrt(self.total_mass)

    def Y(self, r):
        return self.G(r) / np.sqrt(np.asarray(r, dtype=float))

    def mass_above(self, r):
        """int_r^infty Y^2 r^2 dr for r >= r0 (normalised)."""
        prof = exterior_profile(self.mode, x_lo=self.model.r0 * math.sqrt(self.lam))
        return self.amp ** 2 * float(prof.mass(r * math.sqrt(self.lam))) / self.lam / self.total_mass

    def mass_below(self, r):
        if r <= self.model.r0:
            return float(self.interior.state(r)[3]) / self.total_mass
        return 1.0 - self.mass_above(r)


def eigenfunction(model, mode, lam) -> Eigenfunction:
    it = interior_solution(mode, lam, model)
    G, Gs, _, m_in = it.end()
    x0 = model.r0 * math.sqrt(lam)
    prof = exterior_profile(mode, x_lo=x0)
    F, Fs = prof.state(x0)
    amp = float((G * F + Gs * Fs) / (F * F + Fs * Fs))
    m_out = amp ** 2 * float(prof.mass(x0)) / lam
    return Eigenfunction(mode, float(lam), it, amp, float(m_in + m_out), model)


def _quantile_radius(ef, target_below, outward):
    """r with mass below r equal to target (searched in r >= r0).

    The root is pushed 1e-10 in ln r away from the annulus centre
    (``outward`` for the upper radius) so the enclosed mass is never short
    by root-finding round-off.
    """
    r0 = ef.model.r0
    if ef.mass_below(r0) >= target_below:
        return r0
    lo, hi = math.log(r0), math.log(r0)
    while ef.mass_below(math.exp(hi)) < target_below:
        hi += 1.0
    u = brentq(lambda u: ef.mass_below(math.exp(u)) - target_below, lo, hi, xtol=1e-12)
    return math.exp(u + 1e-10 if outward else u - 1e-10)


def equal_tail_annulus(model, mode, lam, epsilon=0.1):
    """Radii leaving mass epsilon/2 on each side."""
    ef = eigenfunction(model, mode, lam)
    return _quantile_radius(ef, epsilon / 2.0, False), _quantile_radius(ef, 1.0 - epsilon / 2.0, True), ef


def localization(model, ladder: EigenLadder, n: int, epsilon: float = 0.1,
                 constants: tuple | None = None, n_min: int = 10) -> LocalizationReport:
    """Mass of v_n in C_- sigma^{-n/2} <= r <= C_+ sigma^{-n/2}.

    Without ``constants`` they are stabilised over the ladder's n >= n_min:
    C_- is the smallest and C_+ the largest equal-tail constant.
    """
    mode, _ = critical_channel(ladder_potential(ladder.mu1))
    if constants is None:
        constants = stabilized_constants(model, ladder, epsilon, n_min)
    cm, cp = constants
    lam = ladder.lambda_n[n - 1]
    ef = eigenfunction(model, mode, lam)
    scale = ladder.sigma ** (-n / 2.0)
    a, b = cm * scale, cp * scale
    frac = ef.mass_below(b) - ef.mass_below(a)
    return LocalizationReport(n, lam, float(frac), (a, b), cm, cp, ef.mass_below(model.r0),
                              (a * math.sqrt(lam), b * math.sqrt(lam)))


def stabilized_constants(model, ladder: EigenLadder, epsilon: float = 0.1, n_min: int = 10):
    mode, _ = critical_channel(ladder_potential(ladder.mu1))
    lows, highs = [], []
    for n in ladder.n:
        if n < n_min:
            continue
        lam = ladder.lambda_n[n - 1]
        lo, hi, _ = equal_tail_annulus(model, mode, lam, epsilon)
        s = ladder.sigma ** (n / 2.0)
        lows.append(lo * s)
        highs.append(hi * s)
    if not lows:
        raise ValueError(f"ladder has no n >= {n_min}")
    return min(lows), max(highs)


def equal_tail_constants(model, ladder: EigenLadder, epsilon: float = 0.1, n_min: int = 10):
    """Per-n equal-tail constants (C_-(n), C_+(n)) for n >= n_min."""
    mode, _ = critical_channel(ladder_potential(ladder.mu1))
    out = []
    for n in ladder.n:
        if n < n_min:
            continue
        lo, hi, _ = equal_tail_annulus(model, mode, ladder.lambda_n[n - 1], epsilon)
        s = ladder.sigma ** (n / 2.0)
        out.append((n, lo * s, hi * s))
    return out
