"""Closed-form equilibrium analysis of the disc trimer.

The shape of the trimer is summarized by the half-opening angle ``omega``
(see :mod:`rolldisc._shape`).  This module provides:

* the four stationary shape densities (sliding/rolling x rigid/vibrating
  bonds) with analytic log-derivatives,
* the vibrational (stiff-spring) weight from the Gram matrix of the released
  bond coordinates,
* the stationary-flux residual of the one-dimensional shape equation for the
  rolling trimer (a direct check that a candidate density is stationary),
* the overlap diagnostic between the rolling-admissible velocity space and
  the shape plane,
* the two exactly conserved rolling quantities and the integer tangent
  tables behind them,
* tail probabilities of the opening angle under several conventions.

All ``omega`` arguments accept scalars or numpy arrays unless noted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import _shape, model

DENSITY_KINDS = ("slide_hard", "roll_hard", "slide_vibr", "roll_vibr")

# Each density is a product of factors (offset + 2 sin^2 w)^e or
# (offset + 2 cos^2 w)^e; the table lists (offset, "sin"|"cos", exponent).
# "hard" densities weight shapes visited by the rigidly bonded trimer;
# "vibr" densities include the stiff-spring vibrational factor.
_FACTORS = {
    "slide_hard": ((1.0, "sin", 0.5), (1.0, "cos", 0.5)),
    "roll_hard": ((5.0, "sin", 0.5), (13.0, "cos", 0.5)),
    "slide_vibr": (),
    "roll_vibr": (
        (5.0, "sin", 0.5),
        (13.0, "cos", 0.5),
        (1.0, "sin", -0.5),
        (1.0, "cos", -0.5),
    ),
}

FULL_DOMAIN = (0.0, math.pi)
# Shapes with the outer discs overlapping (center distance 2 sin w below one
# diameter) are excluded: sin w >= 1/2.
NO_OVERLAP_DOMAIN = (math.pi / 6.0, 5.0 * math.pi / 6.0)


def density_value_and_log_derivs(kind: str, omega):
    """Unnormalized density with first and second log-derivatives.

    Returns ``(value, dlog, d2log)`` where ``dlog = (ln pi)'`` and
    ``d2log = (ln pi)''``; all formulas are analytic (no differencing).
    """
    if kind not in _FACTORS:
        raise ValueError(f"unknown density kind {kind!r}; choose from {DENSITY_KINDS}")
    omega = np.asarray(omega, dtype=float)
    s2 = np.sin(omega) ** 2
    sin2w = np.sin(2.0 * omega)
    cos2w = np.cos(2.0 * omega)
    value = np.ones_like(omega)
    dlog = np.zeros_like(omega)
    d2log = np.zeros_like(omega)
    for offset, trig, expo in _FACTORS[kind]:
        if trig == "sin":
            f = offset + 2.0 * s2
            fp = 2.0 * sin2w
            fpp = 4.0 * cos2w
        else:
            f = offset + 2.0 * (1.0 - s2)
            fp = -2.0 * sin2w
            fpp = -4.0 * cos2w
        value = value * f ** expo
        dlog = dlog + expo * fp / f
        d2log = d2log + expo * (fpp / f - (fp / f) ** 2)
    return value, dlog, d2log


def density_unnormalized(kind: str, omega):
    """Unnormalized stationary shape density pi(omega) of the given kind.

    ``omega`` must lie in the closed interval [0, pi]; the formulas happen to
    be periodic, but values outside the shape domain are a caller bug.
    """
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < FULL_DOMAIN[0]) or np.any(omega_arr > FULL_DOMAIN[1]):
        raise ValueError(f"omega outside the shape domain [0, pi]: {omega!r}")
    return density_value_and_log_derivs(kind, omega)[0]


def fixman_factor(omega: float) -> float:
    """Vibrational weight of the stiff-bond trimer at shape ``omega``.

    Built from first principles: the two released coordinates are the bond
    lengths; their full-space gradients g_a at the reference configuration
    form the Gram matrix A_ab = g_a . g_b, and the stiff-spring limit weights
    each shape by det(A)^(-1/2).  For this geometry
    A = [[2, cos 2w], [cos 2w, 2]], so the result equals
    ((1 + 2 sin^2 w)(1 + 2 cos^2 w))^(-1/2); the closed form is asserted in
    the tests, the construction here stays numeric on purpose.
    """
    cfg = model.Configuration.from_parts(_shape.positions(float(omega), 0.0), np.zeros(3))
    grads = []
    for pair in model.CHAIN_PAIRS:
        u = cfg.bond_vector(pair)
        unit = u / np.hypot(u[0], u[1])
        g = np.zeros(model.N_COORDS)
        g[2 * (pair[0] - 1): 2 * (pair[0] - 1) + 2] = unit
        g[2 * (pair[1] - 1): 2 * (pair[1] - 1) + 2] = -unit
        grads.append(g)
    gram = np.array([[gi @ gj for gj in grads] for gi in grads])
    return 1.0 / math.sqrt(np.linalg.det(gram))


@dataclass
class DensityModel:
    """A normalized shape density on a sub-interval of (0, pi).

    Normalization and the CDF come from a dense Simpson integration of the
    closed-form density, wrapped in a cubic Hermite spline (the PDF supplies
    exact derivative values, making the CDF accurate to ~1e-12).
    """

    kind: str
    domain: Tuple[float, float] = FULL_DOMAIN
    grid_size: int = 4097
    _z: float = field(init=False, repr=False)
    _cdf_spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not (FULL_DOMAIN[0] <= lo < hi <= FULL_DOMAIN[1]):
            raise ValueError(f"domain {self.domain} must be inside {FULL_DOMAIN}")
        grid = np.linspace(lo, hi, self.grid_size)
        pdf = density_unnormalized(self.kind, grid)
        cum = cumulative_simpson(pdf, x=grid, initial=0.0)
        self._z = float(cum[-1])
        self._cdf_spline = CubicHermiteSpline(grid, cum / self._z, pdf / self._z)

    @property
    def normalization(self) -> float:
        """Integral of the unnormalized density over the domain."""
        return self._z

    def pdf(self, omega):
        """Normalized density; zero outside the domain."""
        omega = np.asarray(omega, dtype=float)
        inside = (omega >= self.domain[0]) & (omega <= self.domain[1])
        clipped = np.clip(omega, self.domain[0], self.domain[1])
        vals = np.where(inside, density_unnormalized(self.kind, clipped) / self._z, 0.0)
        return vals if vals.ndim else float(vals)

    def cdf(self, omega):
        """Cumulative distribution, clipped to [0, 1] outside the domain."""
        omega = np.asarray(omega, dtype=float)
        vals = self._cdf_spline(np.clip(omega, self.domain[0], self.domain[1]))
        vals = np.clip(vals, 0.0, 1.0)
        return vals if vals.ndim else float(vals)

    def ppf(self, q: float) -> float:
        """Quantile function by root finding on the CDF."""
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile level {q} outside [0, 1]")
        if q == 0.0:
            return self.domain[0]
        if q == 1.0:
            return self.domain[1]
        return brentq(lambda w: self.cdf(w) - q, self.domain[0], self.domain[1])

    @property
    def median(self) -> float:
        return self.ppf(0.5)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws (used for synthetic-data tests, not dynamics)."""
        u = rng.random(n)
        return np.array([self.ppf(float(q)) for q in u])


DensityLike = Union[str, DensityModel, Callable[[float], float]]


def _density_triplet(density: DensityLike, omega: np.ndarray, h: float):
    """Helper: (pi, pi', pi'') for a kind name, model, or plain callable.

    Kinds and models use the analytic log-derivatives; a bare callable is
    differentiated centrally with step ``h`` (reduced precision, suitable for
    cross-checks and user-supplied candidates).
    """
    if isinstance(density, DensityModel):
        kind = density.kind
    elif isinstance(density, str):
        kind = density
    else:
        pi = np.asarray([density(float(w)) for w in np.atleast_1d(omega)], dtype=float)
        plus = np.asarray([density(float(w) + h) for w in np.atleast_1d(omega)])
        minus = np.asarray([density(float(w) - h) for w in np.atleast_1d(omega)])
        d1 = (plus - minus) / (2.0 * h)
        d2 = (plus - 2.0 * pi + minus) / (h * h)
        return pi, d1, d2
    value, dlog, d2log = density_value_and_log_derivs(kind, np.atleast_1d(omega))
    return value, value * dlog, value * (d2log + dlog * dlog)


def _flux_coefficients(omega: np.ndarray):
    """Coefficients (c1, c1', a1sq, a1sq') of the rolling shape equation.

    The stationary flux of the rolling trimer's shape marginal is

        F(w) = c1(w) pi(w) + alpha1(w)^2 pi'(w),
        c1 = alpha1 alpha1' - L L' alpha1^2 alpha2^2,

    and stationarity of pi is F' = 0 with no-flux ends.  All derivatives
    below are analytic; the test suite cross-checks them against finite
    differences.
    """
    a1 = _shape.alpha1(omega)
    a2 = _shape.alpha2(omega)
    a1p = _shape.alpha1_prime(omega)
    a2p = _shape.alpha2_prime(omega)
    k2p = _shape.k_sq_prime(omega)
    l2p = _shape.l_sq_prime(omega)
    k2pp = -8.0 / 3.0 * np.cos(2.0 * omega)
    l2pp = 8.0 / 3.0 * np.cos(2.0 * omega)
    # alpha1'' from alpha1' = -1/2 alpha1^3 (K^2)'
    a1pp = -0.5 * (3.0 * a1 * a1 * a1p * k2p + a1 ** 3 * k2pp)
    llp = 0.5 * l2p          # L L'
    llp_p = 0.5 * l2pp       # (L L')'
    c1 = a1 * a1p - llp * a1 * a1 * a2 * a2
    c1p = (
        a1p * a1p
        + a1 * a1pp
        - llp_p * a1 * a1 * a2 * a2
        - llp * (2.0 * a1 * a1p * a2 * a2 + 2.0 * a2 * a2p * a1 * a1)
    )
    a1sq = a1 * a1
    a1sq_p = 2.0 * a1 * a1p
    return c1, c1p, a1sq, a1sq_p


def fp_flux(density: DensityLike, omega, h: float = 1e-6):
    """Stationary flux F(w) of the rolling shape equation for a candidate density."""
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    pi, d1, _ = _density_triplet(density, omega_arr, h)
    c1, _, a1sq, _ = _flux_coefficients(omega_arr)
    flux = c1 * pi + a1sq * d1
    return flux if np.ndim(omega) else float(flux[0])


def fp_residual(density: DensityLike, omega, h: float = 1e-6):
    """Flux divergence F'(w): zero everywhere iff the density is stationary.

    For kind names and models everything is analytic, so a true stationary
    density yields residuals at roundoff level; a bare callable is handled
    with central differences of step ``h`` (cross-check quality ~1e-5).
    """
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    pi, d1, d2 = _density_triplet(density, omega_arr, h)
    c1, c1p, a1sq, a1sq_p = _flux_coefficients(omega_arr)
    resid = c1p * pi + (c1 + a1sq_p) * d1 + a1sq * d2
    return resid if np.ndim(omega) else float(resid[0])


def subspace_overlap(omega: float, mode: str = "roll") -> float:
    """Overlap between the admissible velocity space and the shape plane.

    Forms the matrix of inner products between an orthonormal basis E of the
    admissible (constraint-compatible) velocities and the unit tangents of
    the shape plane (d/d omega, d/d phi directions at frozen spins), and
    returns the product of its singular values, rescaled in rolling mode by
    the bare parameter speeds K and L.

    * sliding: the admissible space contains the shape plane -> overlap 1;
    * rolling: the result equals alpha1 * alpha2, the product of the two
      shape-noise gains, which is also (up to a constant) the reciprocal of
      the stationary shape density of the rolling trimer.
    """
    omega = float(omega)
    k = math.sqrt(_shape.k_sq(omega))
    l = math.sqrt(_shape.l_sq(omega))
    fhat = _shape.shape_tangents(omega, 0.0)
    fhat = fhat / np.array([k, l])
    if mode == "roll":
        basis = _shape.horizontal_basis(omega, 0.0)
        raw = float(np.prod(np.linalg.svd(basis.T @ fhat, compute_uv=False)))
        return raw / (k * l)
    if mode == "slide":
        basis = np.zeros((9, 5))
        basis[:, :2] = fhat
        basis[6:, 2:] = np.eye(3)
        return float(np.prod(np.linalg.svd(basis.T @ fhat, compute_uv=False)))
    raise ValueError(f"mode must be 'roll' or 'slide', got {mode!r}")


def conserved_quantities(omega, phi=None, theta=None) -> Tuple[np.ndarray, np.ndarray]:
    """The two quantities frozen by rolling contact.

    Q1 = -4 omega - th1 + th3     (shape change forces counter-spin),
    Q2 = -4 phi + th1 + 2 th2 + th3   (rigid rotation forces co-spin).

    Both are exactly conserved by the rolling trimer's dynamics at every
    noise realization; the sliding trimer conserves neither.  Accepts either
    a single reduced-state object carrying ``omega``/``phi``/``theta``
    attributes, or the three pieces directly; the pieces may be arrays
    (trajectories), with the three spin angles in theta's last axis.
    """
    if phi is None and theta is None:
        state = omega
        omega, phi, theta = state.omega, state.phi, state.theta
    elif phi is None or theta is None:
        raise TypeError("supply a reduced state or all of omega, phi, theta")
    theta = np.asarray(theta, dtype=float)
    q1 = -4.0 * np.asarray(omega, dtype=float) - theta[..., 0] + theta[..., 2]
    q2 = (
        -4.0 * np.asarray(phi, dtype=float)
        + theta[..., 0]
        + 2.0 * theta[..., 1]
        + theta[..., 2]
    )
    return q1, q2


@dataclass(frozen=True)
class GeometryTables:
    """Integer tangent/normal tables of the reduced coordinates (w, phi, th1..3).

    ``t_omega``, ``t_phi``, ``t_spin`` span the directions reachable under
    rolling; ``n1``, ``n2`` are the gradients of the conserved quantities.
    All pairwise products n_i . t_j vanish exactly in integer arithmetic.
    """

    t_omega: np.ndarray = field(default_factory=lambda: np.array([1, 0, -2, 0, 2]))
    t_phi: np.ndarray = field(default_factory=lambda: np.array([0, 3, 2, 4, 2]))
    t_spin: np.ndarray = field(default_factory=lambda: np.array([0, 0, 1, -1, 1]))
    n1: np.ndarray = field(default_factory=lambda: np.array([-4, 0, -1, 0, 1]))
    n2: np.ndarray = field(default_factory=lambda: np.array([0, -4, 1, 2, 1]))

    def orthogonality_products(self) -> np.ndarray:
        """2x3 integer matrix of n_i . t_j; exactly zero."""
        normals = np.stack([self.n1, self.n2])
        tangents = np.stack([self.t_omega, self.t_phi, self.t_spin])
        return normals @ tangents.T

    def q1(self, reduced_point: np.ndarray) -> float:
        """First conserved functional n1 . (w, phi, th1, th2, th3)."""
        return float(self.n1 @ np.asarray(reduced_point, dtype=float))

    def q2(self, reduced_point: np.ndarray) -> float:
        """Second conserved functional n2 . (w, phi, th1, th2, th3)."""
        return float(self.n2 @ np.asarray(reduced_point, dtype=float))


@dataclass
class TangentMapReport:
    """Result of pushing the integer tangent table through the shape map."""

    scale_omega: float
    scale_phi: float
    scale_spin: float
    max_misalignment: float


def tangent_map_check(omega: float, phi: float = 0.0) -> TangentMapReport:
    """Push the integer tangents into the full space and compare with the
    orthonormal admissible basis.

    Each integer tangent (a direction in (w, phi, th) space) maps to
    scale * unit vector with

        scale_omega = sqrt(K^2 + 8),  scale_phi = 3 sqrt(L^2 + 8/3),
        scale_spin = sqrt(3),

    all positive.  Raises AssertionError if any image fails to align with
    the corresponding admissible direction to 1e-10.
    """
    tables = GeometryTables()
    basis = _shape.horizontal_basis(omega, phi)
    cols = _shape.shape_tangents(omega, phi)
    spin_axes = np.zeros((9, 3))
    spin_axes[6:, :] = np.eye(3)
    push = np.column_stack([cols, spin_axes])  # 9 x 5: images of d/dw, d/dphi, d/dth_i

    scales = []
    mis = 0.0
    for vec, unit in zip((tables.t_omega, tables.t_phi, tables.t_spin), basis.T):
        image = push @ vec.astype(float)
        scale = float(image @ unit)
        mis = max(mis, float(np.linalg.norm(image - scale * unit)))
        scales.append(scale)
    if mis > 1e-10:
        raise AssertionError(f"tangent images misaligned by {mis:.3e}")
    if min(scales) <= 0.0:
        raise AssertionError(f"tangent image scales must be positive, got {scales}")
    return TangentMapReport(scales[0], scales[1], scales[2], mis)


def _interval_probability(mdl: DensityModel, lo: float, hi: float) -> float:
    lo = max(lo, mdl.domain[0])
    hi = min(hi, mdl.domain[1])
    if hi <= lo:
        return 0.0
    return float(mdl.cdf(hi) - mdl.cdf(lo))


def tail_probability(
    kind: str,
    threshold: float,
    domain: str = "full",
    angle_variable: str = "omega",
) -> float:
    """Probability that the trimer opening exceeds ``threshold``.

    ``domain`` restricts (and renormalizes) the density: "full" is (0, pi),
    "no_overlap" excludes shapes whose outer discs overlap.

    ``angle_variable`` selects what the threshold is compared against:

    * "omega"     -- the half-opening coordinate itself: P(w > t);
    * "two_omega" -- the doubled coordinate: P(2 w > t);
    * "internal"  -- the geometric opening angle 2*min(w, pi - w), which is
      what a histogram of measured angles between the two bonds reports
      (it cannot distinguish w from pi - w): P(2 min(w, pi - w) > t).
    """
    domains = {"full": FULL_DOMAIN, "no_overlap": NO_OVERLAP_DOMAIN}
    if domain not in domains:
        raise ValueError(f"domain must be one of {sorted(domains)}, got {domain!r}")
    mdl = DensityModel(kind, domains[domain])
    if angle_variable == "omega":
        return _interval_probability(mdl, threshold, mdl.domain[1])
    if angle_variable == "two_omega":
        return _interval_probability(mdl, 0.5 * threshold, mdl.domain[1])
    if angle_variable == "internal":
        return _interval_probability(mdl, 0.5 * threshold, math.pi - 0.5 * threshold)
    raise ValueError(
        "angle_variable must be 'omega', 'two_omega' or 'internal', "
        f"got {angle_variable!r}"
    )


def tail_sweep(threshold: float) -> list:
    """Tail probabilities for every (kind, domain, angle_variable) combination.

    Returns a list of dicts, one per combination, for reporting/CSV output.
    """
    rows = []
    for kind in DENSITY_KINDS:
        for domain in ("full", "no_overlap"):
            for variable in ("omega", "two_omega", "internal"):
                rows.append(
                    {
                        "kind": kind,
                        "domain": domain,
                        "angle_variable": variable,
                        "threshold": threshold,
                        "probability": tail_probability(kind, threshold, domain, variable),
                    }
                )
    return rows
