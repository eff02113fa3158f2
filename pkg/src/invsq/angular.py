"""Spectrum of the angular operator Delta_{S^{d-1}} + P.

Axisymmetric profiles are discretised in real spherical harmonics, one dense
block per azimuthal order m (the cos and sin harmonics of order m > 0 give
identical blocks).  Matrix elements come from composite Gauss-Legendre
quadrature in cos(theta), split at the profile's breakpoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh
from scipy.special import comb

from .errors import EigenError, QuadratureError, ThresholdError
from .potential import SpherePotential

logger = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-8
NEAR_DEGENERACY_RTOL = 1e-5
BORDERLINE_TOL = 1e-9
QUADRATURE_TOL = 1e-10
RESIDUAL_TOL = 1e-6
DEFAULT_BASIS = 32


def critical_value(d):
    """The coupling threshold (d-2)^2/4."""
    return 0.25 * (d - 2) ** 2


def indicial_exponents(mu, d=3):
    """Roots of s^2 + (d-2) s + mu = 0, ordered so that Re(alpha) <= Re(beta).

    In d = 3 these are ``(-1 -/+ sqrt(1 - 4 mu)) / 2``.
    """
    disc = (d - 2) ** 2 - 4.0 * mu
    root = complex(math.sqrt(disc), 0.0) if disc >= 0 else complex(0.0, math.sqrt(-disc))
    alpha = (-(d - 2) - root) / 2.0
    beta = (-(d - 2) + root) / 2.0
    if disc >= 0:
        return alpha, beta
    # complex pair: put the negative imaginary part first
    return complex(alpha.real, -abs(alpha.imag)), complex(beta.real, abs(beta.imag))


@dataclass(frozen=True)
class AngularMode:
    index: int
    mu: float
    multiplicity: int = 1
    alpha: complex = 0j
    beta: complex = 0j
    critical: bool = False
    tau: float = 0.0
    borderline: bool = False
    degree: int | None = None
    m: int | None = None
    coefficients: np.ndarray | None = field(default=None, compare=False, repr=False)
    degrees: np.ndarray | None = field(default=None, compare=False, repr=False)
    residual: float = 0.0

    @property
    def eigenvalue(self):
        return -self.mu

    @classmethod
    def from_mu(cls, mu, d=3, multiplicity=1, index=1, degree=None, **kw):
        mu = float(mu)
        thr = critical_value(d)
        borderline = abs(mu - thr) < BORDERLINE_TOL
        crit = (mu > thr) and not borderline
        alpha, beta = indicial_exponents(mu, d)
        tau = math.sqrt(mu - thr) if crit else 0.0
        return cls(index=index, mu=mu, multiplicity=multiplicity, alpha=alpha, beta=beta,
                   critical=crit, tau=tau, borderline=borderline, degree=degree, **kw)


@dataclass(frozen=True)
class AngularSpectrum:
    modes: tuple
    basis_size: int
    galerkin_residual: float
    dimension: int = 3
    near_degenerate: tuple = ()

    @property
    def eigenvalues(self):
        return np.array([-md.mu for md in self.modes])

    @property
    def multiplicities(self):
        return np.array([md.multiplicity for md in self.modes])

    def expanded(self):
        """Eigenvalues repeated by multiplicity, ascending."""
        return np.repeat(self.eigenvalues, self.multiplicities)


@dataclass(frozen=True)
class AngularOperator:
    """Block-diagonal Galerkin matrix.  ``blocks[m] = (degrees, matrix)``;
    ``weights[m]`` is the number of real harmonics sharing that block."""

    potential: SpherePotential
    basis_size: int
    blocks: dict
    weights: dict
    quadrature_nodes: int = 0

    def dense(self):
        """The full symmetric matrix in the real-harmonic ordering (m block by block)."""
        mats = []
        for m in sorted(self.blocks):
            mats.extend([self.blocks[m][1]] * self.weights[m])
        n = sum(a.shape[0] for a in mats)
        out = np.zeros((n, n))
        k = 0
        for a in mats:
            j = a.shape[0]
            out[k:k + j, k:k + j] = a
            k += j
        return out

    def rayleigh_quotient(self, m, coeffs):
        degrees, mat = self.blocks[m]
        c = np.asarray(coeffs, dtype=float)
        return float(c @ mat @ c / (c @ c))


def legendre_table(lmax, m, theta):
    """Normalised associated Legendre functions Theta_l^m(theta), l = m..lmax.

    Normalisation: 2*pi * int Theta^2 sin(theta) dtheta = 1, Condon-Shortley
    phase.  Built with the standard three-term recurrence in l.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.abs(np.sin(theta))
    ls = np.arange(m, lmax + 1)
    out = np.empty((ls.size, theta.size))
    log_c = 0.5 * (math.log((2 * m + 1) / (4 * math.pi))
                   + sum(math.log((2 * k - 1) / (2 * k)) for k in range(1, m + 1)))
    if m == 0:
        pmm = np.full(theta.shape, math.exp(log_c))
    else:
        with np.errstate(divide="ignore"):
            pmm = (-1) ** m * np.exp(log_c + m * np.log(s))
    out[0] = pmm
    if ls.size > 1:
        out[1] = x * math.sqrt(2 * m + 3) * pmm
    a_prev = math.sqrt(2 * m + 3)
    for k in range(2, ls.size):
        l = m + k
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        out[k] = a * (x * out[k - 1] - out[k - 2] / a_prev)
        a_prev = a
    return ls, out


def _quadrature_nodes(potential, n_per_segment):
    """Composite Gauss-Legendre nodes in x = cos(theta) split at breakpoints."""
    cuts = sorted({-1.0, 1.0, *(math.cos(b) for b in potential.breakpoints())})
    xg, wg = leggauss(n_per_segment)
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        xs.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wg)
    x = np.concatenate(xs)
    return np.arccos(np.clip(x, -1.0, 1.0)), np.concatenate(ws)


def _potential_blocks(potential, lmax, n_per_segment):
    theta, w = _quadrature_nodes(potential, n_per_segment)
    pw = 2.0 * math.pi * potential(theta) * w
    blocks = {}
    for m in range(lmax + 1):
        ls, tab = legendre_table(lmax, m, theta)
        blocks[m] = (ls, (tab * pw) @ tab.T)
    return blocks, theta.size


def build_angular_operator(p: SpherePotential, basis_size: int = DEFAULT_BASIS,
                           quad_tol: float = QUADRATURE_TOL) -> AngularOperator:
    """Galerkin matrix of Delta + P on harmonics of degree <= basis_size.

    Raises QuadratureError when doubling the node count moves any matrix
    element by more than ``quad_tol``.
    """
    if basis_size < 1:
        raise ValueError("basis_size must be >= 1")
    lmax = int(basis_size)
    if p.dimension != 3:
        if p.kind != "constant":
            raise NotImplementedError("only constant P is supported for d > 3")
        return _constant_operator_general_d(p, lmax)

    weights = {m: (1 if m == 0 else 2) for m in range(lmax + 1)}
    if p.kind in ("constant", "spectral"):
        blocks = {}
        for m in range(lmax + 1):
            ls = np.arange(m, lmax + 1)
            if p.kind == "constant":
                diag = ls * (ls + 1.0) + p.value
            else:
                sh = np.array([p.shifts[l] if l < len(p.shifts) else 0.0 for l in ls])
                diag = ls * (ls + 1.0) + sh + p.offset
            blocks[m] = (ls, np.diag(diag))
        return AngularOperator(p, lmax, blocks, weights, 0)

    n_per = max(4 * (lmax + 1), 32)
    check, _ = _potential_blocks(p, lmax, 2 * n_per)
    worst = 0.0
    if math.isfinite(quad_tol):
        pot, _ = _potential_blocks(p, lmax, n_per)
        worst = max(np.max(np.abs(pot[m][1] - check[m][1])) for m in pot)
    if worst > quad_tol:
        raise QuadratureError(
            f"angular quadrature not converged: element change {worst:.3g} > {quad_tol:.1g} "
            f"when doubling {n_per} nodes per segment")
    blocks = {}
    for m, (ls, vmat) in check.items():
        mat = vmat + np.diag(ls * (ls + 1.0))
        blocks[m] = (ls, 0.5 * (mat + mat.T))
    return AngularOperator(p, lmax, blocks, weights, 2 * n_per * (len(p.breakpoints()) + 1))


def _constant_operator_general_d(p, lmax):
    d = p.dimension
    ls = np.arange(lmax + 1)
    diag = ls * (ls + d - 2.0) + p.value
    mult = [int(comb(l + d - 1, d - 1, exact=True) - (comb(l + d - 3, d - 1, exact=True) if l >= 2 else 0))
            for l in ls]
    # one 1x1 block per degree, weighted by the harmonic-space dimension
    blocks = {int(l): (np.array([l]), np.array([[diag[l]]])) for l in ls}
    weights = {int(l): mult[l] for l in ls}
    return AngularOperator(p, lmax, blocks, weights, 0)


def angular_eigenvalues(op: AngularOperator, tolerance: float = DEGENERACY_RTOL,
                        residual_tol: float = RESIDUAL_TOL) -> AngularSpectrum:
    """Diagonalise each block, merge equal eigenvalues, attach truncation residuals.

    The residual of an eigenpair is how far its eigenvalue moves when the
    block is rebuilt with twice the degree.  Modes are reported from the
    bottom up until the first one whose residual exceeds ``residual_tol``.
    """
    p = op.potential
    d = p.dimension
    big = None
    if d == 3 and p.kind in ("axisymmetric", "hemisphere"):
        big = build_angular_operator(p, 2 * op.basis_size, quad_tol=math.inf)

    entries = []
    for m in sorted(op.blocks):
        ls, mat = op.blocks[m]
        try:
            vals, vecs = eigh(mat)
        except np.linalg.LinAlgError as exc:
            raise EigenError(f"eigensolver failed in block m={m}: {exc}") from exc
        big_vals = None
        if big is not None:
            big_vals = eigh(big.blocks[m][1], eigvals_only=True)
        for k in range(vals.size):
            v = vecs[:, k]
            res = 0.0 if big_vals is None else float(abs(vals[k] - big_vals[k]))
            if d != 3:
                m_label, degree = None, int(ls[0])
            else:
                m_label = m
                degree = int(ls[np.argmax(np.abs(v))]) if p.kind in ("constant", "spectral") else None
            entries.append((float(vals[k]), op.weights[m], m_label, degree, v, ls, res))
    entries.sort(key=lambda e: e[0])

    groups = []
    near = []
    for e in entries:
        if groups:
            last = groups[-1]
            gap = abs(e[0] - last[0][0])
            scale = max(1.0, abs(e[0]))
            if gap <= tolerance * scale:
                last.append(e)
                continue
            if gap <= NEAR_DEGENERACY_RTOL * scale:
                near.append((len(groups) - 1, len(groups)))
        groups.append([e])

    modes = []
    worst = 0.0
    for g in groups:
        res = max(e[6] for e in g)
        if res > residual_tol:
            break
        worst = max(worst, res)
        val = float(np.mean([e[0] for e in g]))
        mult = sum(e[1] for e in g)
        rep = min(g, key=lambda e: (e[2] if e[2] is not None else 0))
        modes.append(AngularMode.from_mu(-val, d, multiplicity=mult, index=len(modes) + 1,
                                         degree=rep[3], m=rep[2], coefficients=rep[4],
                                         degrees=rep[5], residual=res))
    if not modes:
        raise EigenError("no angular eigenpair met the residual tolerance; increase the basis")
    near = tuple(pair for pair in near if pair[1] < len(modes))
    for a, b in near:
        # only a split critical mode changes the counts
        level = logging.WARNING if modes[a].mu > critical_value(d) else logging.DEBUG
        logger.log(level, "near-degenerate angular eigenvalues %d and %d not merged", a + 1, b + 1)
    return AngularSpectrum(tuple(modes), op.basis_size, worst, d, near)


def angular_spectrum(p: SpherePotential, basis_size: int = DEFAULT_BASIS, **kw) -> AngularSpectrum:
    return angular_eigenvalues(build_angular_operator(p, basis_size), **kw)


def critical_modes(spectrum: AngularSpectrum, d: int | None = None, hypothesis: str | None = None):
    """Modes with mu > (d-2)^2/4, exponents filled in.

    With ``hypothesis='i'`` a mode sitting on the threshold raises
    ThresholdError instead of being silently skipped.
    """
    d = spectrum.dimension if d is None else d
    out = []
    for md in spectrum.modes:
        mode = AngularMode.from_mu(md.mu, d, multiplicity=md.multiplicity, index=md.index,
                                   degree=md.degree, m=md.m, coefficients=md.coefficients,
                                   degrees=md.degrees, residual=md.residual)
        if mode.borderline:
            if hypothesis == "i":
                raise ThresholdError(
                    f"eigenvalue at critical threshold: mode {mode.index} has mu = {mode.mu!r}")
            logger.warning("mode %d is borderline (mu = %.12g); not classified", mode.index, mode.mu)
            continue
        if mode.critical:
            out.append(mode)
    return out


def classify(spectrum: AngularSpectrum, d: int | None = None):
    """All modes re-labelled with exponents and criticality for dimension d."""
    d = spectrum.dimension if d is None else d
    return [AngularMode.from_mu(md.mu, d, multiplicity=md.multiplicity, index=md.index,
                                degree=md.degree, m=md.m, coefficients=md.coefficients,
                                degrees=md.degrees, residual=md.residual)
            for md in spectrum.modes]


def parity_mass(mode: AngularMode):
    """(even, odd) coefficient mass under theta -> pi - theta; harmonic (l, m)
    has parity (-1)^(l+m)."""
    c = np.asarray(mode.coefficients)
    par = (np.asarray(mode.degrees) + (mode.m or 0)) % 2
    even = float(np.sum(c[par == 0] ** 2))
    odd = float(np.sum(c[par == 1] ** 2))
    return even, odd


def lowest_eigenvalue(p: SpherePotential, basis_size: int = DEFAULT_BASIS, m: int | None = None):
    """Smallest eigenvalue of the Galerkin matrix, optionally from a single m block."""
    op = build_angular_operator(p, basis_size)
    if m is not None:
        return float(eigh(op.blocks[m][1], eigvals_only=True)[0])
    return float(min(eigh(b[1], eigvals_only=True)[0] for b in op.blocks.values()))
