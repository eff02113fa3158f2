"""Bound-state counting per critical angular mode.

A mode with coupling mu contributes the radial equation
``r^2 X'' + (d-1) r X' + (mu + T - r^2 E) X = 0`` on r >= 1 with X(1) = 0.
Putting ``X = r^{-(d-2)/2} g(ln r)`` gives ``g'' + Q(s) g = 0`` with

    Q(s) = mu - (d-2)^2/4 - E e^{2s} + T(s),

and the number of eigenvalues below -E in that mode is the number of zeros of
g on s > 0.  We count them with the Pruefer phase, and check the count with a
plain sign-change integration and with the inertia of a finite-difference
matrix.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .angular import AngularMode, AngularSpectrum, classify, critical_modes, critical_value
from .errors import ConvergenceError, GridError, HypothesisError, IntegrationError
from .potential import RadialPerturbation

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
# Q must stay below this for TAIL_WINDOW units before we stop integrating
TAIL_LEVEL = -1.0
TAIL_WINDOW = 5.0
TAIL_GUARD = 1e-3
R_MAX_MARGIN = 20.0
ENDPOINT_TOL = 1e-8
DEFAULT_E_GRID = tuple(10.0 ** (-2 * k) for k in range(1, 7))


@dataclass(frozen=True)
class QProfile:
    """Q(s) = mu - (d-2)^2/4 - E e^{2s} + t-term, or an arbitrary callable."""

    mu: float
    d: int = 3
    E: float = 1.0
    t: RadialPerturbation = field(default_factory=RadialPerturbation.zero)
    func: Callable | None = field(default=None, compare=False)

    @property
    def kappa(self):
        return self.mu - critical_value(self.d)

    @classmethod
    def custom(cls, func):
        """Wrap a user-supplied Q(s); no tail termination is possible then."""
        return cls(mu=0.0, d=3, E=0.0, func=func)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(s), dtype=float) + np.zeros_like(s)
        return self.kappa - self.E * np.exp(2.0 * s) + self.t.q_term(s)

    def scalar(self, s):
        """Fast float evaluation for the step-by-step oracle."""
        if self.func is not None:
            return float(self.func(s))
        t = self.t
        if t.kind == "zero":
            extra = 0.0
        elif t.kind == "log_power":
            extra = -t.sign * t.C * (1.0 + max(s, 0.0)) ** (-t.p)
        else:
            extra = float(t.q_term(s))
        return self.kappa - self.E * math.exp(2.0 * s) + extra

    def turning_bound(self):
        """An s beyond which Q < -1 is guaranteed."""
        if self.func is not None or self.E <= 0:
            return math.inf
        big = abs(self.kappa) + self.t.sup() + 1.0
        return max(0.0, 0.5 * math.log(big / self.E))

    @property
    def r0(self):
        """Last sign change of Q (0 if Q < 0 everywhere on s >= 0)."""
        hi = self.turning_bound()
        if not math.isfinite(hi):
            raise ValueError("r0 is undefined for a custom Q profile")
        s = np.linspace(0.0, hi, max(200, int(200 * hi) + 1))
        q = self(s)
        pos = np.nonzero(q >= 0)[0]
        if pos.size == 0:
            return 0.0
        k = pos[-1]
        if k == s.size - 1:
            return float(s[-1])
        from scipy.optimize import brentq
        return float(brentq(lambda x: float(self(x)), s[k], s[k + 1], xtol=1e-13))


def make_q_profile(mode: AngularMode | float, E: float, t: RadialPerturbation | None = None,
                   d: int = 3) -> QProfile:
    if not E > 0:
        raise ValueError("E must be positive")
    mu = mode.mu if isinstance(mode, AngularMode) else float(mode)
    return QProfile(mu=mu, d=d, E=float(E), t=t if t is not None else RadialPerturbation.zero())


@dataclass(frozen=True)
class PruferTrace:
    zero_count: int
    theta_samples: np.ndarray = field(repr=False)
    r_end: float
    terminated_by: str
    tail_zero_possible: bool

    @property
    def theta_end(self):
        return float(self.theta_samples[-1, 1])


def _phase_rhs(q):
    def rhs(s, y):
        c = math.cos(y[0])
        sn = math.sin(y[0])
        return [-(q.scalar(s) * c * c + sn * sn)]
    return rhs


def _crossings(theta):
    # theta starts at pi/2 and only ever crosses pi/2 (mod pi) downward
    x = (0.5 * math.pi - theta) / math.pi
    return int(math.floor(x + ENDPOINT_TOL))


def _in_tail(q, s):
    """Q < TAIL_LEVEL and decreasing on [s - TAIL_WINDOW, s]."""
    if q.func is not None or q.E <= 0 or s < TAIL_WINDOW:
        return False
    grid = np.linspace(s - TAIL_WINDOW, s, 101)
    vals = q(grid)
    return bool(np.all(vals < TAIL_LEVEL) and np.all(np.diff(vals) < 0))


def _basin_margin(theta, qval):
    """Distance of theta (mod pi) above the unstable point -arctan sqrt(-Q).

    Positive means no further zero can occur while Q keeps decreasing.
    """
    phi = theta - math.pi * round(theta / math.pi)
    return phi + math.atan(math.sqrt(-qval))


def count_zeros(q: QProfile, r_max: float | None = None, rtol: float | None = None,
                atol: float | None = None) -> PruferTrace:
    """Count zeros of g on (0, r_max] with g(0) = 0 from the Pruefer phase.

    theta' = -(Q cos^2 theta + sin^2 theta), theta(0) = pi/2.  The zeros of g
    are the points where theta passes pi/2 mod pi; there theta' = -1, so the
    passage is always downward.
    """
    rtol = ODE_RTOL if rtol is None else rtol
    atol = ODE_ATOL if atol is None else atol
    if r_max is None:
        r_max = q.turning_bound() + R_MAX_MARGIN
        if not math.isfinite(r_max):
            raise ValueError("custom Q profiles need an explicit r_max")
    elif q.func is None and q.E > 0 and r_max <= q.r0:
        raise ValueError(f"r_max = {r_max} does not pass the turning point r0 = {q.r0:.6g}")

    rhs = _phase_rhs(q)
    s = 0.0
    theta = 0.5 * math.pi
    ts, ths = [0.0], [theta]
    terminated = "r_max"
    tail = True
    while s < r_max:
        s_next = min(s + 1.0, r_max)
        sol = solve_ivp(rhs, (s, s_next), [theta], method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegrationError(f"phase integration failed: {sol.message}", r=float(sol.t[-1]))
        ts.extend(sol.t[1:])
        ths.extend(sol.y[0, 1:])
        s, theta = float(sol.t[-1]), float(sol.y[0, -1])
        if _in_tail(q, s):
            margin = _basin_margin(theta, q.scalar(s))
            if margin > 0:
                terminated = "phase_plateau"
                phi = theta - math.pi * round(theta / math.pi)
                tail = margin < TAIL_GUARD or phi + 0.5 * math.pi < TAIL_GUARD
                break
    if terminated == "r_max" and q.func is None:
        logger.warning("r_max = %.6g reached before the phase settled; count is a lower bound", r_max)
    samples = np.column_stack([ts, ths])
    return PruferTrace(_crossings(theta), samples, s, terminated, tail)


def sign_change_oracle(q: QProfile, r_max: float | None = None, step: float = 5e-3) -> int:
    """Zeros of g by classical RK4 on (g, g') and counting sign changes.

    Independent of the phase: stops only when Q has been below -1 and
    decreasing for a while and g g' > 0 (then |g| grows for good).
    """
    if r_max is None:
        r_max = q.turning_bound() + R_MAX_MARGIN
        if not math.isfinite(r_max):
            raise ValueError("custom Q profiles need an explicit r_max")
    Q = q.scalar
    s, g, gp = 0.0, 0.0, 1.0
    sign = 1
    count = 0
    next_check = 1.0
    while s < r_max - 1e-14:
        h = min(step, 0.1 / math.sqrt(max(abs(Q(s)), 1e-300)), r_max - s)
        k1g, k1p = gp, -Q(s) * g
        qm = Q(s + 0.5 * h)
        k2g, k2p = gp + 0.5 * h * k1p, -qm * (g + 0.5 * h * k1g)
        k3g, k3p = gp + 0.5 * h * k2p, -qm * (g + 0.5 * h * k2g)
        k4g, k4p = gp + h * k3p, -Q(s + h) * (g + h * k3g)
        g += h * (k1g + 2 * k2g + 2 * k3g + k4g) / 6.0
        gp += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        s += h
        if abs(g) + abs(gp) > 1e150:
            g *= 1e-150
            gp *= 1e-150
        if g != 0.0:
            sg = 1 if g > 0 else -1
            if sg != sign:
                count += 1
                sign = sg
        if s >= next_check:
            next_check = s + 1.0
            if g * gp > 0 and _in_tail(q, s):
                return count
    # a zero sitting on the right endpoint still counts
    if abs(g) <= ENDPOINT_TOL * abs(gp) and g * gp < 0:
        count += 1
    return count


def _sturm_negative_count(diag, off):
    """Number of negative eigenvalues of a symmetric tridiagonal matrix.

    LDL^T pivots; by Sylvester's law the count of negative pivots is the
    count of negative eigenvalues.
    """
    off2 = off * off
    count = 0
    piv = 1.0
    tiny = 1e-300
    for j in range(diag.size):
        piv = diag[j] - (off2[j - 1] / piv if j > 0 else 0.0)
        if piv == 0.0:
            piv = -tiny
        if piv < 0:
            count += 1
    return count


def _inertia_count(q, S, h):
    n = int(round(S / h))
    h = S / n
    s = h * np.arange(1, n)
    diag = 2.0 / h ** 2 - q(s)
    off = np.full(n - 2, -1.0 / h ** 2)
    return _sturm_negative_count(diag, off)


def inertia_oracle(mode: AngularMode | float, E: float, t: RadialPerturbation | None = None,
                   R_max: float | None = None, n_grid: int | None = None, d: int = 3,
                   h: float = 5e-3, check: bool = True) -> int:
    """Eigenvalues below -E of the Dirichlet mode operator on [1, R_max].

    The quadratic form in s = ln r is int g'^2 - Q g^2 ds, which is
    discretised by second differences; its negative-eigenvalue count equals
    the number of eigenvalues below -E of the operator in L^2(r^{d-1} dr).
    With ``check`` the count is recomputed on [1, 2 R_max] and must agree.
    """
    q = make_q_profile(mode, E, t, d)
    S = q.turning_bound() + 3.0 if R_max is None else math.log(R_max)
    if S <= 0:
        raise ValueError("R_max must exceed 1")
    if n_grid is not None:
        h = S / n_grid
    c = _inertia_count(q, S, h)
    if check:
        c2 = _inertia_count(q, S + math.log(2.0), h)
        if c2 != c:
            raise ConvergenceError(
                f"inertia count moved from {c} to {c2} when R_max was doubled; enlarge R_max")
    return c


def predicted_count(modes: Sequence[AngularMode], E: float, d: int = 3) -> float:
    """(ln(1/E) / 2 pi) * sum of multiplicity * tau over the critical modes."""
    total = 0.0
    for md in modes:
        kappa = md.mu - critical_value(d)
        if kappa <= 0:
            raise HypothesisError(f"mode {md.index} (mu = {md.mu:.6g}) is not critical")
        total += md.multiplicity * math.sqrt(kappa)
    return math.log(1.0 / E) / (2.0 * math.pi) * total


@dataclass(frozen=True)
class ModeCount:
    index: int
    mu: float
    multiplicity: int
    count: int
    tail_zero_possible: bool


def count_bound_states(spectrum: AngularSpectrum | Sequence[AngularMode], E: float,
                       t: RadialPerturbation | None = None, d: int | None = None,
                       exhaustive: bool = False, r_max: float | None = None):
    """(total, per_mode) counts below -E, summed with multiplicity.

    By default only critical modes contribute; the bounded contribution of
    the others is part of the O(1) remainder.  ``exhaustive`` adds them.
    """
    if isinstance(spectrum, AngularSpectrum):
        d = spectrum.dimension if d is None else d
        modes = classify(spectrum, d) if exhaustive else critical_modes(spectrum, d)
    else:
        d = 3 if d is None else d
        modes = [md for md in spectrum if exhaustive or md.mu > critical_value(d)]
    per_mode = []
    total = 0
    for md in modes:
        tr = count_zeros(make_q_profile(md, E, t, d), r_max=r_max)
        per_mode.append(ModeCount(md.index, md.mu, md.multiplicity, tr.zero_count,
                                  tr.tail_zero_possible))
        total += md.multiplicity * tr.zero_count
    return total, per_mode


@dataclass(frozen=True)
class CountReport:
    E_grid: tuple
    per_mode_counts: np.ndarray
    totals: tuple
    predicted: tuple
    mode_index: tuple = ()
    multiplicity: tuple = ()
    slope_fit: tuple | None = None


def count_report(spectrum: AngularSpectrum | Sequence[AngularMode], E_grid=DEFAULT_E_GRID,
                 t: RadialPerturbation | None = None, d: int | None = None,
                 threads: int | None = None) -> CountReport:
    """Counts over an E grid; the slope fit is attached when the grid allows one."""
    E_grid = tuple(float(e) for e in E_grid)
    if isinstance(spectrum, AngularSpectrum):
        d = spectrum.dimension if d is None else d
        modes = critical_modes(spectrum, d)
    else:
        d = 3 if d is None else d
        modes = [md for md in spectrum if md.mu > critical_value(d)]

    def one(E):
        return count_bound_states(modes, E, t, d)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, E_grid))
    else:
        results = [one(E) for E in E_grid]
    counts = np.array([[mc.count for mc in res[1]] for res in results], dtype=int).T
    counts = counts.reshape(len(modes), len(E_grid))
    totals = tuple(int(res[0]) for res in results)
    predicted = tuple(predicted_count(modes, E, d) for E in E_grid)
    rep = CountReport(E_grid, counts, totals, predicted,
                      tuple(md.index for md in modes), tuple(md.multiplicity for md in modes))
    try:
        fit = slope_fit(rep)
    except GridError:
        fit = None
    return CountReport(rep.E_grid, rep.per_mode_counts, rep.totals, rep.predicted,
                       rep.mode_index, rep.multiplicity, fit)


def slope_fit(report: CountReport | tuple):
    """Least-squares line of total count against ln(1/E).

    Returns (slope, intercept, max_abs_residual).  Accepts a CountReport or
    a pair (E_grid, totals).
    """
    if isinstance(report, CountReport):
        E, totals = report.E_grid, report.totals
    else:
        E, totals = report
    E = np.asarray(E, dtype=float)
    y = np.asarray(totals, dtype=float)
    if E.size < 5:
        raise GridError(f"slope fit needs at least 5 E values, got {E.size}")
    x = np.log(1.0 / E)
    if (x.max() - x.min()) / math.log(10.0) < 6.0 - 1e-9:
        raise GridError("slope fit needs an E grid spanning at least 6 decades")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))
