"""Angular profiles P on the sphere and radial perturbations t(r).

The full potential of interest is ``V = r^-2 (P(omega) + t(r))`` for ``r >= 1``.
Everything downstream works with one of these two objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import SpecError

HEMISPHERE_DEPTH = -1.0 / 3.0


def smoothstep5(u):
    """C^2 monotone quintic rising from 0 at u<=0 to 1 at u>=1."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Polynomial pieces on ``[breaks[k], breaks[k+1]]`` in the local variable
    ``x - breaks[k]``, coefficients lowest power first."""

    breaks: tuple
    coeffs: tuple

    def __post_init__(self):
        if len(self.breaks) != len(self.coeffs) + 1:
            raise SpecError("need len(breaks) == len(coeffs) + 1", field="breaks")
        if any(b1 <= b0 for b0, b1 in zip(self.breaks, self.breaks[1:])):
            raise SpecError("breaks must be strictly increasing", field="breaks")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.breaks)
        k = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.coeffs) - 1)
        out = np.zeros_like(x)
        for j, c in enumerate(self.coeffs):
            sel = k == j
            if np.any(sel):
                # polyval wants highest power first
                out[sel] = np.polyval(np.asarray(c, dtype=float)[::-1], x[sel] - b[j])
        return out

    def bound(self, samples=2001):
        x = np.linspace(self.breaks[0], self.breaks[-1], samples)
        return float(np.max(np.abs(self(np.concatenate([x, self.breaks])))))


@dataclass(frozen=True)
class SpherePotential:
    """A bounded function P on S^{d-1}.

    ``kind`` is one of ``constant``, ``axisymmetric``, ``hemisphere`` or
    ``spectral``.  The last one is not a multiplication operator: it shifts the
    degree-l spherical harmonics by ``shifts[l]`` (zero past the list), which
    is how a single critical channel is modelled.
    """

    dimension: int = 3
    kind: str = "constant"
    value: float = 0.0
    profile: PiecewisePolynomial | None = None
    epsilon: float | None = None
    parity: str | None = None
    shifts: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        if self.dimension < 3:
            raise SpecError("dimension must be >= 3", field="dimension")
        if self.kind not in ("constant", "axisymmetric", "hemisphere", "spectral"):
            raise SpecError(f"unknown angular kind {self.kind!r}", field="angular.kind")
        if self.kind == "hemisphere":
            if self.epsilon is None or not 0.0 < self.epsilon <= 0.01:
                raise SpecError("hemisphere epsilon must lie in (0, 0.01]", field="angular.parameters.epsilon")
            if self.parity not in ("even", "odd"):
                raise SpecError("hemisphere parity must be 'even' or 'odd'", field="angular.parameters.parity")
        if self.kind == "axisymmetric":
            if self.profile is None:
                raise SpecError("axisymmetric kind needs a profile", field="angular.parameters")
            if abs(self.profile.breaks[0]) > 1e-12 or abs(self.profile.breaks[-1] - math.pi) > 1e-9:
                raise SpecError("profile must cover [0, pi]", field="angular.parameters.breaks")
        if self.kind != "constant" and self.dimension != 3:
            raise SpecError("non-constant P is only supported on S^2 (d = 3)", field="dimension")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c, dimension=3):
        return cls(dimension=dimension, kind="constant", value=float(c))

    @classmethod
    def hemisphere(cls, epsilon, parity):
        return cls(kind="hemisphere", epsilon=float(epsilon), parity=parity)

    @classmethod
    def axisymmetric(cls, breaks, coeffs):
        pp = PiecewisePolynomial(tuple(float(b) for b in breaks),
                                 tuple(tuple(float(a) for a in c) for c in coeffs))
        return cls(kind="axisymmetric", profile=pp)

    @classmethod
    def spectral(cls, shifts):
        return cls(kind="spectral", shifts=tuple(float(s) for s in shifts))

    # evaluation ----------------------------------------------------------
    @property
    def is_axisymmetric(self):
        return True

    def breakpoints(self):
        """Interior theta values where the profile is not smooth."""
        if self.kind == "hemisphere":
            e = self.epsilon
            h = math.pi / 2
            return (h - 2 * e, h - e, h, h + e, h + 2 * e)
        if self.kind == "axisymmetric":
            return tuple(self.profile.breaks[1:-1])
        return ()

    def __call__(self, theta):
        """Evaluate P(theta) for an axisymmetric multiplication potential."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            return np.full_like(theta, self.value)
        if self.kind == "axisymmetric":
            return self.profile(theta) + self.offset
        if self.kind == "hemisphere":
            upper = np.minimum(theta, math.pi - theta)
            e = self.epsilon
            u = (math.pi / 2 - e - upper) / e
            val = HEMISPHERE_DEPTH * smoothstep5(u)
            if self.parity == "odd":
                val = np.where(theta > math.pi / 2, -val, val)
            return val + self.offset
        raise TypeError("spectral potentials are not multiplication operators")

    def bound(self):
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "hemisphere":
            return -HEMISPHERE_DEPTH + abs(self.offset)
        if self.kind == "axisymmetric":
            return self.profile.bound() + abs(self.offset)
        return max((abs(s) for s in self.shifts), default=0.0) + abs(self.offset)

    def shift(self, c):
        """Return ``P + c``."""
        if self.kind == "constant":
            return SpherePotential.constant(self.value + c, self.dimension)
        if self.kind == "spectral":
            return SpherePotential(kind="spectral", shifts=self.shifts, offset=self.offset + c)
        return replace(self, offset=self.offset + float(c))


@dataclass(frozen=True)
class RadialPerturbation:
    """The radial correction t(r) for r >= 1, used through ``T(s) = t(e^s)``.

    ``sign`` selects the envelope ``V_± = r^-2 P ± t``: ``-1`` (the lower,
    more attractive operator) adds ``+T`` to the oscillation coefficient,
    ``+1`` subtracts it.
    """

    kind: str = "zero"
    C: float = 0.0
    p: float = 0.0
    sign: int = -1
    table: Callable | None = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("zero", "log_power", "tabulated"):
            raise SpecError(f"unknown radial kind {self.kind!r}", field="radial.kind")
        if self.sign not in (-1, 1):
            raise SpecError("sign must be +1 or -1", field="radial.sign")
        if self.kind == "log_power" and self.p <= 1.0:
            raise SpecError("log_power exponent p must exceed 1", field="radial.parameters.p")
        if self.kind == "tabulated" and self.table is None:
            raise SpecError("tabulated kind needs a table", field="radial.parameters")

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def log_power(cls, C, p, sign=-1):
        return cls(kind="log_power", C=float(C), p=float(p), sign=sign)

    @classmethod
    def tabulated(cls, func, sign=-1, label="tabulated"):
        return cls(kind="tabulated", table=func, sign=sign, label=label)

    @classmethod
    def from_table(cls, s_nodes: Sequence[float], values: Sequence[float], sign=-1):
        """Linear interpolation of T(s) on the nodes, continued by an s^-2 tail."""
        s_nodes = np.asarray(s_nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if s_nodes.ndim != 1 or s_nodes.size < 2 or s_nodes.size != values.size:
            raise SpecError("table needs matching 1-d 's' and 'T' arrays", field="radial.parameters")
        if np.any(np.diff(s_nodes) <= 0) or s_nodes[0] > 0.0:
            raise SpecError("table nodes must increase and start at s <= 0", field="radial.parameters.s")
        s_last, v_last = s_nodes[-1], values[-1]

        def T(s):
            s = np.asarray(s, dtype=float)
            inside = np.interp(s, s_nodes, values)
            tail = v_last * (s_last / np.maximum(s, s_last)) ** 2
            return np.where(s <= s_last, inside, tail)

        return cls(kind="tabulated", table=T, sign=sign, label="table")

    def T(self, s):
        """t(e^s) for s >= 0."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "log_power":
            return self.C * (1.0 + np.maximum(s, 0.0)) ** (-self.p)
        return np.asarray(self.table(s), dtype=float)

    def q_term(self, s):
        """Contribution of t to the oscillation coefficient Q(s)."""
        return -self.sign * self.T(s)

    def sup(self, s_max=200.0):
        if self.kind == "zero":
            return 0.0
        if self.kind == "log_power":
            return abs(self.C)
        s = np.linspace(0.0, s_max, 20001)
        return float(np.max(np.abs(self.T(s))))

    def with_sign(self, sign):
        return RadialPerturbation(self.kind, self.C, self.p, sign, self.table, self.label)

    def check_hypothesis(self, which):
        """Validate the decay exponent against hypothesis (i) or (ii)."""
        if self.kind != "log_power":
            return
        need = 1.0 if which == "i" else 2.0
        if self.p <= need:
            raise SpecError(f"hypothesis ({which}) needs p > {need:g}, got {self.p:g}",
                            field="radial.parameters.p")
