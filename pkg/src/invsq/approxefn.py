"""Approximate eigenfunctions built from the zero mode.

Inside a ball of radius rho the trial function is the lam = 0 solution of
the critical channel; outside it is the decaying exterior solution, scaled
to match in value.  The approximate eigenvalue is fixed by also matching the
derivative, with rho tied to lam by ``rho = lam^{-1/2 + delta/2}``.
Non-principal channels (optional, ``mode_cut > 1``) carry a user-chosen
amplitude psi_i r^{alpha_i} inside and are joined C^1 with the smoothing
bump h.

The residual ``||(L + lam) Phi||`` has two sources: lam times the zero mode
inside the ball, and the ODE defect of the bump terms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson
from scipy.optimize import brentq

from .angular import AngularMode, classify, angular_spectrum
from .errors import BracketError, HypothesisError
from .exterior import exterior_profile
from .ladder import (EigenLadder, InteriorModel, compute_ladder, critical_channel,
                     eigenfunction, interior_solution, ladder_potential, predicted_xi)

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.2
UNDERFLOW_FLOOR = 1e-280


# smoothing bump -----------------------------------------------------------

def _quintic_hermite(a, b, ya, yb):
    """Coefficients (in t - a, lowest first) of the quintic with value,
    first and second derivative ya at a and yb at b."""
    L = b - a
    M = np.array([[1, 0, 0, 0, 0, 0],
                  [0, 1, 0, 0, 0, 0],
                  [0, 0, 2, 0, 0, 0],
                  [1, L, L ** 2, L ** 3, L ** 4, L ** 5],
                  [0, 1, 2 * L, 3 * L ** 2, 4 * L ** 3, 5 * L ** 4],
                  [0, 0, 2, 6 * L, 12 * L ** 2, 20 * L ** 3]], dtype=float)
    return np.linalg.solve(M, np.concatenate([ya, yb]))


@dataclass(frozen=True)
class SmoothingBump:
    """h on [1, 2]: t - 1 on [1, 1.5], a C^2 quintic down to 0 at 2, zero after."""

    join: np.ndarray = field(repr=False)
    kind: str = "quintic"

    def __call__(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        lin = (t >= 1.0) & (t <= 1.5)
        if deriv == 0:
            out[lin] = t[lin] - 1.0
        elif deriv == 1:
            out[lin] = 1.0
        q = (t > 1.5) & (t < 2.0)
        c = np.polynomial.polynomial.polyder(self.join, deriv) if deriv else self.join
        out[q] = np.polynomial.polynomial.polyval(t[q] - 1.5, c)
        return out

    @property
    def smoothness(self):
        """Jumps of (h, h', h'') at t = 1.5 and t = 2, from the quintic's ends."""
        P = np.polynomial.polynomial
        ends = [[float(P.polyval(u, P.polyder(self.join, k))) for k in range(3)] for u in (0.0, 0.5)]
        return {1.5: [e - l for e, l in zip(ends[0], (0.5, 1.0, 0.0))], 2.0: ends[1]}


def make_smoothing(kind: str = "quintic") -> SmoothingBump:
    if kind != "quintic":
        raise ValueError(f"unknown smoothing kind {kind!r}")
    return SmoothingBump(_quintic_hermite(1.5, 2.0, [0.5, 1.0, 0.0], [0.0, 0.0, 0.0]))


# matching ----------------------------------------------------------------

def rho_rule(lam, delta=DEFAULT_DELTA, r_min: float = 0.0):
    """lam^{-1/2 + delta/2}, clamped below at r_min (the exterior form of the
    solution only holds outside the interior region)."""
    return max(lam ** (-0.5 + 0.5 * delta), r_min)


def check_delta(delta, modes):
    """delta < min(1/4, -alpha_2 / (1 - 2 alpha_2)) for the first non-critical mode."""
    noncrit = [m for m in modes if not m.critical]
    bound = 0.25
    if noncrit:
        a2 = noncrit[0].alpha.real
        bound = min(bound, -a2 / (1.0 - 2.0 * a2))
    if not 0 < delta < bound:
        raise HypothesisError(f"delta = {delta} must lie in (0, {bound:.6g})")
    return bound


def k_exponent(modes):
    """K = min(2, min_{i >= 2} (-1/2 - alpha_i)), the decay rate in the
    bound |chi_i| <~ |psi_i| rho^{alpha_i} |alpha_i| (rho sqrt(lam))^K."""
    rates = [-0.5 - m.alpha.real for m in modes if not m.critical]
    return min([2.0] + rates)


class _ZeroMode:
    """The lam = 0 interior solution of the critical channel, out to r_hi."""

    def __init__(self, model, mode, r_hi):
        self.model = model
        self.mode = mode
        self.r_hi = r_hi
        self.sol = interior_solution(mode, 0.0, model, r_hi=r_hi)

    def state(self, r):
        if np.max(r) > self.r_hi:
            raise ValueError(f"r = {np.max(r):g} beyond the zero-mode range {self.r_hi:g}")
        return self.sol.state(r)


_ZERO_CACHE = {}


def zero_mode(model, mode, r_hi):
    key = (model, mode.mu, mode.degree)
    zm = _ZERO_CACHE.get(key)
    if zm is None or zm.r_hi < r_hi:
        zm = _ZeroMode(model, mode, max(1.5 * r_hi, 2.0 * (zm.r_hi if zm else model.r0)))
        _ZERO_CACHE[key] = zm
    return zm


def approx_matching_phase(model, mode, lam, delta=DEFAULT_DELTA, zm=None):
    """Angle of the zero mode minus angle of X^lam at rho(lam)."""
    rho = rho_rule(lam, delta, model.r0)
    zm = zm or zero_mode(model, mode, rho)
    th_int = float(zm.state(rho)[2])
    x = rho * math.sqrt(lam)
    th_ext = float(exterior_profile(mode, x_lo=x).phase(x))
    return th_int - th_ext


def solve_approx_lambda(model: InteriorModel, n: int, delta: float = DEFAULT_DELTA,
                        ladder: EigenLadder | None = None, samples: int = 9) -> float:
    """Approximate lam_n: derivative matching of the zero mode at rho(lam).

    Brent's method in ln lam on the xi_n bracket [xi (1 + sigma)/2,
    xi (3 - sigma)/2], widened once by 50 %; the bracket must hold a single
    sign change.
    """
    ladder = ladder or compute_ladder(model, n_max=max(n, 10))
    mode, modes = critical_channel(ladder_potential(ladder.mu1))
    check_delta(delta, modes)
    xi = predicted_xi(n, ladder.c, ladder.d, ladder.mu1, ladder.branch)
    sigma = ladder.sigma
    zm = zero_mode(model, mode, rho_rule(xi * (1 + sigma) / 4, delta, model.r0))
    g = lambda u: math.sin(approx_matching_phase(model, mode, math.exp(u), delta, zm))
    found = 0
    for widen in (1.0, 1.5):
        half = widen * xi * (1.0 - sigma) / 2.0
        grid = np.linspace(math.log(xi - half), math.log(xi + half), samples)
        vals = np.array([g(u) for u in grid])
        flips = np.nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1]))[0]
        found = flips.size
        if found == 1:
            k = int(flips[0])
            return math.exp(brentq(g, grid[k], grid[k + 1], xtol=1e-13, rtol=1e-15))
    raise BracketError(f"{found} sign changes of the matching function on the xi bracket", n)


# Phi ------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeTerm:
    mode: AngularMode
    psi: float
    phi: float
    chi: float
    value_mismatch: float = 0.0
    slope_mismatch: float = 0.0


@dataclass(frozen=True)
class PhiFunction:
    lam: float
    rho: float
    delta: float
    terms: tuple
    model: InteriorModel
    bump: SmoothingBump = field(repr=False)
    zero: object = field(repr=False, compare=False)

    @property
    def phi1(self):
        """phi_1 with X in the usual K normalisation and Y ~ 1 at the origin."""
        t = self.terms[0]
        return t.phi * math.exp(-exterior_profile(t.mode).log_scale)

    def X(self, mode, r):
        """Exterior solution x^{-1/2} F(ln x) in profile units."""
        x = np.asarray(r, dtype=float) * math.sqrt(self.lam)
        F, _ = exterior_profile(mode, x_lo=float(np.min(x))).state(x)
        return F / np.sqrt(x)

    def Xprime(self, mode, r):
        r = np.asarray(r, dtype=float)
        x = r * math.sqrt(self.lam)
        F, Fs = exterior_profile(mode, x_lo=float(np.min(x))).state(x)
        return (Fs - 0.5 * F) / (np.sqrt(x) * r)

    def radial(self, k, r):
        """Radial profile of term k (principal term k = 0)."""
        r = np.asarray(r, dtype=float)
        t = self.terms[k]
        out = np.zeros_like(r)
        inside = r <= self.rho
        if k == 0:
            if np.any(inside):
                st = self.zero.state(r[inside])
                out[inside] = st[0] / np.sqrt(r[inside])
        else:
            sel = inside & (r >= self.model.r0)
            out[sel] = t.psi * r[sel] ** t.mode.alpha.real
        ext = ~inside
        if np.any(ext):
            out[ext] = t.phi * self.X(t.mode, r[ext]) + t.chi * self.bump(r[ext] / self.rho)
        return out

    def _x_max(self, mode):
        return exterior_profile(mode).x_seed

    def _exterior_mass(self, k):
        t = self.terms[k]
        x = self.rho * math.sqrt(self.lam)
        prof = exterior_profile(t.mode, x_lo=x)
        base = t.phi ** 2 * float(prof.mass(x)) * self.lam ** -1.5
        if t.chi == 0.0:
            return base
        # cross and bump terms live on [rho, 2 rho]
        f = lambda r: (2 * t.phi * self.X(t.mode, r) * t.chi * self.bump(r / self.rho)
                       + (t.chi * self.bump(r / self.rho)) ** 2) * r * r
        extra, _ = quad(lambda r: float(f(np.array([r]))[0]), self.rho, 2 * self.rho,
                        points=[1.5 * self.rho], epsabs=0.0, epsrel=1e-10, limit=200)
        return base + extra

    def interior_mass(self):
        """int over B(0, rho) of |Psi|^2 (the non-principal part from r0 on)."""
        total = float(self.zero.state(self.rho)[3])
        for t in self.terms[1:]:
            p = 2 * t.mode.alpha.real + 3
            total += t.psi ** 2 * (self.rho ** p - self.model.r0 ** p) / p
        return total

    def norm(self):
        return math.sqrt(self.interior_mass() + sum(self._exterior_mass(k) for k in range(len(self.terms))))

    def principal_exterior_norm(self):
        return math.sqrt(self._exterior_mass(0))

    def nonprincipal_exterior_norm(self):
        return math.sqrt(sum(self._exterior_mass(k) for k in range(1, len(self.terms))))


def build_phi(model: InteriorModel, lam: float, mode_cut: int = 1, delta: float = DEFAULT_DELTA,
              psi=None, potential=None) -> PhiFunction:
    """Assemble Phi at lam from the first ``mode_cut`` angular modes.

    psi gives the interior amplitudes of modes 2..mode_cut (default 1 each);
    the principal amplitude is fixed by the zero mode itself.
    """
    if mode_cut < 1:
        raise ValueError("mode_cut must be >= 1")
    potential = potential or ladder_potential()
    mode, _ = critical_channel(potential)
    modes = classify(angular_spectrum(potential, max(16, mode_cut + 2)), 3)
    check_delta(delta, modes)
    rho = rho_rule(lam, delta, model.r0)
    zm = zero_mode(model, mode, rho)
    bump = make_smoothing()
    x = rho * math.sqrt(lam)

    terms = []
    G, Gs = zm.state(rho)[:2]
    Y = G / math.sqrt(rho)
    Yp = (Gs - 0.5 * G) / rho ** 1.5
    prof = exterior_profile(mode, x_lo=x)
    F, Fs = prof.state(x)
    X = F / math.sqrt(x)
    Xp = (Fs - 0.5 * F) / (math.sqrt(x) * rho)
    phi = Y / X
    chi = rho * (Yp - phi * Xp)
    terms.append(ModeTerm(mode, 1.0, float(phi), 0.0, 0.0, float(chi / (rho * abs(Yp) + abs(Y)))))

    others = [m for m in modes if not m.critical][: mode_cut - 1]
    psi = list(psi) if psi is not None else [1.0] * len(others)
    if len(psi) < len(others):
        raise ValueError("need one psi per non-principal mode")
    for md, ps in zip(others, psi):
        a = md.alpha.real
        Yi, Ypi = ps * rho ** a, ps * a * rho ** (a - 1)
        pr = exterior_profile(md, x_lo=x)
        if pr.log_abs(x) - pr.log_scale < math.log(UNDERFLOW_FLOOR):
            logger.warning("mode %d dropped: exterior solution below the underflow floor", md.index)
            continue
        Fi, Fsi = pr.state(x)
        Xi = Fi / math.sqrt(x)
        Xpi = (Fsi - 0.5 * Fi) / (math.sqrt(x) * rho)
        phi_i = Yi / Xi
        chi_i = rho * (Ypi - phi_i * Xpi)
        terms.append(ModeTerm(md, float(ps), float(phi_i), float(chi_i)))
    return PhiFunction(float(lam), rho, delta, tuple(terms), model, bump, zm)


def residual_norm(phi: PhiFunction):
    """(||(L + lam) Phi||, ||(L + lam) Phi|| / ||Phi||).

    Inside the ball (L + lam) Psi = lam Psi.  Outside only the bump terms
    leave a defect, chi (h_rho'' + 2 h_rho'/r + (mu/r^2 - lam) h_rho).
    """
    lam, rho = phi.lam, phi.rho
    num2 = lam ** 2 * phi.interior_mass()
    for t in phi.terms[1:]:
        if t.chi == 0.0:
            continue

        def defect(r, t=t):
            u = np.array([r / rho])
            h, h1, h2 = (float(phi.bump(u, k)[0]) for k in range(3))
            d = h2 / rho ** 2 + 2.0 * h1 / (rho * r) + (t.mode.mu / r ** 2 - lam) * h
            return (t.chi * d) ** 2 * r * r

        val, _ = quad(defect, rho, 2 * rho, points=[1.5 * rho], epsabs=0.0, epsrel=1e-10, limit=200)
        num2 += val
    num = math.sqrt(num2)
    return num, num / phi.norm()


def interior_only_residual(phi: PhiFunction):
    """lam ||Psi||_{B(0, rho)}: the residual with the exterior switched off."""
    return phi.lam * math.sqrt(phi.interior_mass())


def localize_spectrum(phi: PhiFunction, ratio: float | None = None):
    """[lam - eps, lam + eps] with eps the residual ratio; by the spectral
    theorem it meets the spectrum of the (positive) operator -L."""
    if ratio is None:
        ratio = residual_norm(phi)[1]
    return phi.lam - ratio, phi.lam + ratio


def eigenfunction_distance(phi: PhiFunction, ladder: EigenLadder, n: int, points: int = 40001):
    """|| Phi/||Phi|| - v_n || for the exact normalised eigenfunction v_n
    (sign chosen to make the overlap positive)."""
    mode = phi.terms[0].mode
    v = eigenfunction(phi.model, mode, ladder.lambda_n[n - 1])
    x_seed = exterior_profile(mode).x_seed
    r_hi = 0.999 * x_seed / math.sqrt(max(phi.lam, ladder.lambda_n[n - 1]))
    s = np.linspace(math.log(v.interior.r_start), math.log(r_hi), points)
    r = np.exp(s)
    a = phi.radial(0, r)
    b = v.Y(r)
    overlap = simpson(a * b * r ** 3, x=s) / phi.norm()
    return math.sqrt(max(0.0, 2.0 - 2.0 * abs(overlap)))
