"""Measurement and statistics helpers.

Angle extraction maps Cartesian trimer states back to shape coordinates;
the Kolmogorov-Smirnov helpers compare sampled shapes against the
closed-form equilibrium densities; the covariance oracle draws projected
Gaussian velocities for comparison with the equipartition prediction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .analytics import DensityModel
from .model import N_COORDS


def wrap_angle(x):
    """Wrap to the principal interval (-pi, pi]."""
    return -((-np.asarray(x) + math.pi) % (2.0 * math.pi) - math.pi)


def _as_coords(state) -> np.ndarray:
    """Coordinate array from a raw array or a configuration-like object."""
    coords = getattr(state, "coords", state)
    return np.asarray(coords, dtype=float)


def extract_omega(coords) -> Union[float, np.ndarray]:
    """Folded shape angle in [0, pi) from Cartesian coordinates.

    Half the signed angle from the bond vector x1 - x2 to x3 - x2, folded
    into [0, pi).  Rotation invariant, chirality aware, and the exact left
    inverse of :func:`rolldisc.dynamics_overdamped.parameterize` on [0, pi).
    Accepts a configuration, a single 9-vector, or an (..., 9) array; raises
    if any state has coincident disc centers (the angle is undefined there).
    """
    coords = _as_coords(coords)
    u = coords[..., 0:2] - coords[..., 2:4]
    v = coords[..., 4:6] - coords[..., 2:4]
    if np.any(np.hypot(u[..., 0], u[..., 1]) < 1e-12) or np.any(
        np.hypot(v[..., 0], v[..., 1]) < 1e-12
    ):
        raise ValueError("coincident disc centers: opening angle undefined")
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    angle = np.arctan2(cross, dot)  # signed opening, (-pi, pi]
    folded = 0.5 * np.mod(angle, 2.0 * math.pi)
    return folded if folded.ndim else float(folded)


def extract_phi(coords) -> Union[float, np.ndarray]:
    """Rigid rotation angle in (-pi, pi] from Cartesian coordinates.

    Uses the unit-magnitude combination w = (z3 - z1)/2 + (3/2) z2 of the
    centers as complex numbers, whose argument is phi - omega + pi/2 at
    every on-manifold state (no degenerate shapes, unlike the direction of
    any single chord).
    """
    coords = _as_coords(coords)
    re = 0.5 * (coords[..., 4] - coords[..., 0]) + 1.5 * coords[..., 2]
    im = 0.5 * (coords[..., 5] - coords[..., 1]) + 1.5 * coords[..., 3]
    u = coords[..., 0:2] - coords[..., 2:4]
    v = coords[..., 4:6] - coords[..., 2:4]
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    omega = 0.5 * np.mod(np.arctan2(cross, dot), 2.0 * math.pi)
    phi = wrap_angle(np.arctan2(im, re) - 0.5 * math.pi + omega)
    return phi if phi.ndim else float(phi)


def extract_reduced(coords) -> Tuple:
    """(omega, phi, theta) from Cartesian coordinates (vectorized)."""
    coords = _as_coords(coords)
    return extract_omega(coords), extract_phi(coords), coords[..., 6:9].copy()


@dataclass
class KSReport:
    """One-sample Kolmogorov-Smirnov comparison against a model CDF."""

    statistic: float
    n_samples: int
    p_value: float


def kolmogorov_sf(x: float) -> float:
    """Asymptotic Kolmogorov survival function Q(x) = 2 sum (-1)^(k-1) e^(-2 k^2 x^2)."""
    if x <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * (k * x) ** 2)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def ks_distance(samples: np.ndarray, model: Union[DensityModel, Callable]) -> KSReport:
    """One-sample KS statistic of ``samples`` against a model CDF.

    ``model`` is a :class:`DensityModel` or any vectorized CDF callable.
    """
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    n = samples.size
    if n == 0:
        raise ValueError("need at least one sample")
    cdf = model.cdf if isinstance(model, DensityModel) else model
    f = np.asarray(cdf(samples), dtype=float)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    d = float(max(np.max(grid_hi - f), np.max(f - grid_lo)))
    return KSReport(statistic=d, n_samples=n, p_value=kolmogorov_sf(d * math.sqrt(n)))


@dataclass
class TwoSampleKS:
    """Two-sample Kolmogorov-Smirnov comparison."""

    statistic: float
    n_first: int
    n_second: int
    p_value: float

    def threshold(self, alpha: float = 0.01) -> float:
        """Rejection threshold at level alpha for these sample sizes."""
        return ks_two_sample_threshold(alpha, self.n_first, self.n_second)


def ks_two_sample_threshold(alpha: float, n: int, m: int) -> float:
    """c(alpha) sqrt((n + m)/(n m)) with c = sqrt(-ln(alpha/2)/2)."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def two_sample_ks(first: np.ndarray, second: np.ndarray) -> TwoSampleKS:
    """Two-sample KS statistic with the asymptotic p-value."""
    first = np.sort(np.asarray(first, dtype=float).ravel())
    second = np.sort(np.asarray(second, dtype=float).ravel())
    n, m = first.size, second.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    everything = np.concatenate([first, second])
    cdf1 = np.searchsorted(first, everything, side="right") / n
    cdf2 = np.searchsorted(second, everything, side="right") / m
    d = float(np.max(np.abs(cdf1 - cdf2)))
    effective = math.sqrt(n * m / (n + m))
    return TwoSampleKS(statistic=d, n_first=n, n_second=m, p_value=kolmogorov_sf(d * effective))


@dataclass
class HistogramReport:
    """Binned shape-angle histogram next to a model density.

    ``tail_estimates`` maps each requested shape-angle threshold to the
    empirical fraction of samples above it (within the model domain).
    """

    edges: np.ndarray
    counts: np.ndarray
    empirical_density: np.ndarray
    model_density: np.ndarray
    n_samples: int
    ks_statistic: float
    kind: str
    tail_estimates: dict

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def make_histogram(
    samples: np.ndarray,
    model: DensityModel,
    bins: int = 60,
    tail_thresholds: Tuple[float, ...] = (),
) -> HistogramReport:
    """Histogram ``samples`` on the model's domain and attach the model curve."""
    samples = np.asarray(samples, dtype=float).ravel()
    edges = np.linspace(model.domain[0], model.domain[1], bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    widths = np.diff(edges)
    total = counts.sum()
    empirical = counts / (total * widths) if total else np.zeros(bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    report = ks_distance(samples, model)
    inside = samples[(samples >= edges[0]) & (samples <= edges[-1])]
    tails = {
        float(t): float(np.mean(inside > t)) if inside.size else 0.0
        for t in tail_thresholds
    }
    return HistogramReport(
        edges=edges,
        counts=counts,
        empirical_density=empirical,
        model_density=np.asarray(model.pdf(centers)),
        n_samples=int(total),
        ks_statistic=report.statistic,
        kind=model.kind,
        tail_estimates=tails,
    )


def velocity_covariance_oracle(
    projection: np.ndarray,
    beta: float,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 65536,
) -> np.ndarray:
    """Sample covariance of projected Maxwell velocities v = P n, n ~ N(0, I/beta).

    Equilibrium of the constrained Langevin dynamics puts mass-scaled
    velocities in the range of P with covariance P/beta; this draws
    ``n_samples`` of them in chunks and accumulates the raw second moment
    (the mean is zero by symmetry and is not subtracted).
    """
    projection = np.asarray(projection, dtype=float)
    accum = np.zeros((N_COORDS, N_COORDS))
    remaining = n_samples
    scale = 1.0 / math.sqrt(beta)
    while remaining > 0:
        batch = min(chunk, remaining)
        draws = rng.standard_normal((batch, N_COORDS)) * scale
        vels = draws @ projection.T
        accum += vels.T @ vels
        remaining -= batch
    return accum / n_samples


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation of a scalar series up to ``max_lag``."""
    series = np.asarray(series, dtype=float).ravel()
    x = series - series.mean()
    var = float(x @ x)
    if var == 0.0:
        return np.ones(max_lag + 1)
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        out[lag] = float(x[: x.size - lag] @ x[lag:]) / var if lag < x.size else 0.0
    return out


def integrated_autocorr_time(series: np.ndarray, max_lag: Optional[int] = None) -> float:
    """Integrated autocorrelation time with a simple first-negative cutoff.

    Returned in units of the sampling interval: 1 means uncorrelated.
    """
    series = np.asarray(series, dtype=float).ravel()
    if max_lag is None:
        max_lag = min(series.size // 4, 2000)
    rho = autocorrelation(series, max_lag)
    tau = 1.0
    for lag in range(1, max_lag + 1):
        if rho[lag] <= 0.0:
            break
        tau += 2.0 * rho[lag]
    return tau
