"""The two counterexample constructions.

* A multiplicatively periodic g (g(4t) = g(t)) with g'' = 0 near its zeros,
  giving T = -g''/g = O(t^-2).  At critical coupling g'' + T g = 0 has
  infinitely many zeros, so the bound-state count diverges as E -> 0,
  while a (ln r)^{-2.5} correction leaves it bounded.
* The hemisphere pair P_ev / P_odd: same |P|, one with a critical angular
  mode and one without.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .angular import angular_spectrum, classify, critical_modes, lowest_eigenvalue
from .errors import SpecError
from .oscillation import QProfile, count_bound_states, count_zeros
from .potential import RadialPerturbation, SpherePotential

PERIOD = 4.0
NEAR_T = math.pi ** 2 / 4.0      # g = sin(pi s / 2) on [0, 1] meets g(1) = 1, g'(1) = 0
DEFAULT_ZEROS = (1.75, 3.8)
DEFAULT_WIDTH = 0.03             # half-width in ln t of the linear pieces
DEFAULT_STEEPNESS = 1.0          # slope at the zeros relative to the chord slope
ZERO_GUARD = 1e-3
COMPLIANT_C = 20.0             # log_power(C, 2.5) comparison; saturates well before E = 1e-4


def _hermite5(a, b, ya, yb):
    """Coefficients in (t - a) of the quintic matching (g, g', g'') at both ends."""
    L = b - a
    M = np.array([[1, 0, 0, 0, 0, 0],
                  [0, 1, 0, 0, 0, 0],
                  [0, 0, 2, 0, 0, 0],
                  [1, L, L ** 2, L ** 3, L ** 4, L ** 5],
                  [0, 1, 2 * L, 3 * L ** 2, 4 * L ** 3, 5 * L ** 4],
                  [0, 0, 2, 6 * L, 12 * L ** 2, 20 * L ** 3]], dtype=float)
    return np.linalg.solve(M, np.concatenate([ya, yb]))


@dataclass(frozen=True)
class PeriodicG:
    """g on [1, 4] as pieces (a, b, coeffs in t - a), extended by g(4t) = g(t)."""

    pieces: tuple = field(repr=False)
    zeros: tuple = DEFAULT_ZEROS
    width: float = DEFAULT_WIDTH
    steepness: float = DEFAULT_STEEPNESS

    @property
    def breaks(self):
        return np.array([p[0] for p in self.pieces] + [self.pieces[-1][1]])

    def _reduce(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 1.0):
            raise ValueError("g is defined for t >= 1")
        k = np.floor(np.log(t) / math.log(PERIOD) + 1e-14)
        u = t / PERIOD ** k
        # round-off can leave u a hair outside [1, 4)
        k = np.where(u >= PERIOD, k + 1, np.where(u < 1.0, k - 1, k))
        return t / PERIOD ** k, k

    def base(self, u, deriv=0):
        """g^(deriv) on [1, 4]."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for a, b, c in self.pieces:
            sel = (u >= a) & (u <= b)
            cc = P.polyder(c, deriv) if deriv else c
            out[sel] = P.polyval(u[sel] - a, cc)
        return out

    def __call__(self, t, deriv=0):
        u, k = self._reduce(t)
        return self.base(u, deriv) / PERIOD ** (deriv * k)

    def junction_defects(self):
        """g(1)-1, g(2)+1, g(4)-1, g'(1)-4g'(4), g''(1)-16g''(4)."""
        e = lambda t, k=0: float(self.base(np.array([t]), k)[0])
        return [e(1) - 1, e(2) + 1, e(4) - 1, e(1, 1) - 4 * e(4, 1), e(1, 2) - 16 * e(4, 2)]

    def zeros_in_period(self, k=0):
        return [z * PERIOD ** k for z in self.zeros]


def build_periodic_g(zeros=DEFAULT_ZEROS, width=DEFAULT_WIDTH, steepness=DEFAULT_STEEPNESS) -> PeriodicG:
    """g = 1, -1, 1 at t = 1, 2, 4 with flat (g' = g'' = 0) junctions, linear
    through the zeros on [z e^-w, z e^w], quintic Hermite pieces elsewhere."""
    z1, z2 = map(float, zeros)
    if not (1.0 < z1 < 2.0 < z2 < 4.0):
        raise SpecError(f"zeros must satisfy 1 < z1 < 2 < z2 < 4, got {zeros}", field="zeros")
    if not (0 < width and z1 * math.exp(-width) > 1 and z1 * math.exp(width) < 2
            and z2 * math.exp(-width) > 2 and z2 * math.exp(width) < 4):
        raise SpecError(f"width {width} pushes a linear piece past a junction", field="width")
    if not steepness > 0:
        raise SpecError("steepness must be positive", field="steepness")
    m1, m2 = -2.0 * steepness, 1.0 * steepness          # chord slopes -2/1 and 2/2
    # knots (t, (g, g', g''), starts a linear piece)
    knots = [(1.0, [1, 0, 0], False)]
    for z, m, end in ((z1, m1, (2.0, [-1, 0, 0])), (z2, m2, (4.0, [1, 0, 0]))):
        a, b = z * math.exp(-width), z * math.exp(width)
        knots += [(a, [m * (a - z), m, 0.0], True), (b, [m * (b - z), m, 0.0], False), (*end, False)]
    pieces = []
    for (a, ya, lin), (b, yb, _) in zip(knots[:-1], knots[1:]):
        c = np.array([ya[0], ya[1]], dtype=float) if lin else _hermite5(a, b, ya, yb)
        pieces.append((a, b, c))
    g = PeriodicG(tuple(pieces), (z1, z2), float(width), float(steepness))
    # strict monotonicity on (1, 2) and (2, 4)
    for lo, hi, sgn in ((1.0, 2.0, -1), (2.0, 4.0, 1)):
        u = np.linspace(lo, hi, 4001)[1:-1]
        bad = sgn * g.base(u, 1) <= 0
        if np.any(bad):
            raise SpecError(f"g is not strictly monotone on ({lo:g}, {hi:g}) near t = {u[bad][0]:.4f}; "
                            "lower the steepness or widen the zero spacing", field="steepness")
    defects = g.junction_defects()
    if max(abs(x) for x in defects) > 1e-9:
        raise SpecError(f"junction equations violated: {defects}", field="pieces")
    return g


@dataclass(frozen=True)
class CounterexampleT:
    """T(t) = -g''(t)/g(t) for t >= 1 and the constant pi^2/4 on [0, 1)."""

    g: PeriodicG = field(repr=False)
    C: float = 0.0
    near: float = NEAR_T

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.full_like(s, self.near)
        far = s >= 1.0
        if np.any(far):
            t = s[far]
            g0 = self.g(t)
            g2 = self.g(t, 2)
            small = np.abs(g0) < ZERO_GUARD
            if np.any(np.abs(g2[small]) > 0):
                raise ValueError("g'' does not vanish where g is small")
            val = np.zeros_like(t)
            val[~small] = -g2[~small] / g0[~small]
            out[far] = val
        return out

    def perturbation(self) -> RadialPerturbation:
        """As a radial correction entering Q with a + sign."""
        return RadialPerturbation.tabulated(self, sign=-1, label="counterexample")


def build_counterexample_T(g: PeriodicG) -> CounterexampleT:
    """Also computes C = sup t^2 |T(t)|, attained in the first period."""
    u = np.linspace(1.0, PERIOD, 200001)
    g0, g2 = g.base(u), g.base(u, 2)
    small = np.abs(g0) < ZERO_GUARD
    if np.any(np.abs(g2[small]) > 0):
        raise ValueError("g'' must vanish wherever |g| is small")
    T = np.zeros_like(u)
    T[~small] = -g2[~small] / g0[~small]
    return CounterexampleT(g, float(np.max(u * u * np.abs(T))))


def _critical_profile(E, t, d=3):
    mu = (d - 2) ** 2 / 4.0
    return QProfile(mu=mu, d=d, E=float(E), t=t)


def sharpness_experiment(T: CounterexampleT | RadialPerturbation, E_grid=(1e-3, 1e-5, 1e-7), d: int = 3):
    """Zero counts of g'' + (-E e^{2s} + T) g = 0 at critical coupling, per E."""
    E_grid = [float(e) for e in E_grid]
    if any(b >= a for a, b in zip(E_grid[:-1], E_grid[1:])):
        raise ValueError("E_grid must be decreasing")
    t = T.perturbation() if isinstance(T, CounterexampleT) else T
    return [count_zeros(_critical_profile(E, t, d)).zero_count for E in E_grid]


def window_zero_count(g: PeriodicG, E: float):
    """Zeros of g in [1, s_E] with s_E = ln(1/E)/2, plus the one of sin on (0, 1]
    (none there); the E -> 0 oracle for the counterexample counts."""
    s_e = 0.5 * math.log(1.0 / E)
    n = 0
    k = 0
    while PERIOD ** k <= s_e:
        n += sum(1 for z in g.zeros_in_period(k) if z <= s_e)
        k += 1
    return n


@dataclass(frozen=True)
class HemisphereReport:
    epsilon: float
    lambda_min_ev: float
    lambda_min_odd: float
    lambda_min_odd_block: float
    critical_ev: int
    critical_odd: int
    E_grid: tuple
    counts_ev: tuple
    counts_odd: tuple
    note: str = ("P_ev and P_odd have the same |P|; the even continuation joins the two "
                 "attractive caps into one region and so admits a critical mode.")


HEMISPHERE_E_GRID = tuple(10.0 ** -k for k in (2, 5, 10, 20, 30, 40))


def hemisphere_experiment(epsilon: float = 0.01, E_grid=HEMISPHERE_E_GRID, basis_size: int = 32):
    if not 0 < epsilon <= 0.01:
        raise ValueError("epsilon must lie in (0, 0.01]")
    pe = SpherePotential.hemisphere(epsilon, "even")
    po = SpherePotential.hemisphere(epsilon, "odd")
    se = angular_spectrum(pe, basis_size)
    so = angular_spectrum(po, basis_size)
    ce, co = critical_modes(se), critical_modes(so)
    counts_ev = tuple(count_bound_states(ce, E)[0] for E in E_grid)
    counts_odd = tuple(count_bound_states(co, E)[0] for E in E_grid)
    return HemisphereReport(float(epsilon), float(se.eigenvalues.min()), float(so.eigenvalues.min()),
                            lowest_eigenvalue(po, basis_size, m=0), len(ce), len(co),
                            tuple(E_grid), counts_ev, counts_odd)
