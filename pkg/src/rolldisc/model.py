"""Constraint algebra for a trimer of unit-spaced discs in the plane.

State layout is a flat 9-vector ``(x1, y1, x2, y2, x3, y3, th1, th2, th3)``:
three center positions followed by three spin angles.  Discs are numbered
1..3 in the public API; the chain pairs are (1, 2) and (2, 3).

Velocity-level constraints supported:

* bond rows      -- the two center distances stay fixed (rigid links),
* rolling rows   -- touching discs roll without slipping, which couples the
  tangential relative center velocity to the mean of the pair's spin rates,
* center rows    -- the summed x and y velocities vanish (center of mass
  pinned at the origin).

``assemble`` stacks the rows into C, forms the Gram matrix G = C C^T and the
orthogonal projection P = I - C^T G^-1 C onto admissible velocities.
``gamma_p_dagger`` builds the pseudoinverse of the projected friction
P Gamma P used by the overdamped dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

N_COORDS = 9
CHAIN_PAIRS: Tuple[Tuple[int, int], ...] = ((1, 2), (2, 3))

# Relative eigenvalue cutoff shared by the rank check in `assemble` and the
# pseudoinverse in `gamma_p_dagger`.
RANK_RTOL = 1e-12


class ContactError(ValueError):
    """A rolling row was requested for a pair that is not in contact."""


class NumericalRankError(np.linalg.LinAlgError):
    """The constraint Gram matrix is numerically rank deficient."""


@dataclass
class Configuration:
    """A point in the 9-dimensional state space.

    ``coords`` is the flat vector; ``positions`` and ``spins`` are reshaped
    views for convenience.
    """

    coords: np.ndarray

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.shape != (N_COORDS,):
            raise ValueError(f"expected shape ({N_COORDS},), got {self.coords.shape}")

    @classmethod
    def from_parts(cls, positions: np.ndarray, spins: np.ndarray) -> "Configuration":
        positions = np.asarray(positions, dtype=float).reshape(6)
        spins = np.asarray(spins, dtype=float).reshape(3)
        return cls(np.concatenate([positions, spins]))

    @property
    def positions(self) -> np.ndarray:
        """Disc centers as a (3, 2) view."""
        return self.coords[:6].reshape(3, 2)

    @property
    def spins(self) -> np.ndarray:
        """Spin angles as a length-3 view."""
        return self.coords[6:]

    def bond_vector(self, pair: Tuple[int, int]) -> np.ndarray:
        """Center difference x_i - x_j for 1-based disc indices (i, j)."""
        i, j = pair
        return self.positions[i - 1] - self.positions[j - 1]


@dataclass(frozen=True)
class ConstraintSet:
    """Which velocity constraints are active.

    ``rolling=True`` is the rolling trimer (6 rows); ``rolling=False`` the
    sliding trimer (4 rows).  The center of mass is pinned in both.
    """

    rolling: bool
    pin_com: bool = True
    pairs: Tuple[Tuple[int, int], ...] = CHAIN_PAIRS

    @property
    def n_rows(self) -> int:
        n = 2 * len(self.pairs) if self.rolling else len(self.pairs)
        if self.pin_com:
            n += 2
        return n


@dataclass
class ProjectionBundle:
    """Constraint matrix C, Gram matrix G = C C^T, projection P = I - C^T G^-1 C."""

    C: np.ndarray
    G: np.ndarray
    P: np.ndarray
    constraints: ConstraintSet
    gamma_p_pinv: Optional[np.ndarray] = field(default=None, repr=False)


def bond_row(cfg: Configuration, pair: Tuple[int, int]) -> np.ndarray:
    """Velocity row of the fixed-distance constraint for disc pair (i, j).

    Differentiating |x_i - x_j|^2 = const gives (x_i - x_j) . (v_i - v_j) = 0.
    """
    i, j = pair
    u = cfg.bond_vector(pair)
    row = np.zeros(N_COORDS)
    row[2 * (i - 1): 2 * (i - 1) + 2] = u
    row[2 * (j - 1): 2 * (j - 1) + 2] = -u
    return row


def rolling_row(
    cfg: Configuration, pair: Tuple[int, int], contact_tol: float = 1e-6
) -> np.ndarray:
    """Velocity row of the no-slip condition for touching discs (i, j).

    With u = x_i - x_j and perp(u) = (-u_y, u_x), rolling contact of two
    unit-diameter discs requires

        perp(u) . (v_i - v_j) = (dth_i + dth_j) / 2,

    i.e. the tangential relative center velocity equals the mean surface
    speed at the contact point.  The row encodes the homogeneous form with
    spin coefficients -1/2 on both members of the pair.

    Raises :class:`ContactError` when the centers are not at unit distance to
    within ``contact_tol`` (the no-slip condition is meaningless without
    contact; soft-bond callers pass a looser tolerance).
    """
    i, j = pair
    u = cfg.bond_vector(pair)
    length = float(np.hypot(u[0], u[1]))
    if abs(length - 1.0) > contact_tol:
        raise ContactError(
            f"discs {pair} are not in contact: center distance {length!r} "
            f"deviates from 1 by more than contact_tol={contact_tol!r}"
        )
    perp = np.array([-u[1], u[0]])
    row = np.zeros(N_COORDS)
    row[2 * (i - 1): 2 * (i - 1) + 2] = perp
    row[2 * (j - 1): 2 * (j - 1) + 2] = -perp
    row[6 + (i - 1)] = -0.5
    row[6 + (j - 1)] = -0.5
    return row


def com_rows() -> np.ndarray:
    """The two rows pinning the center of mass: sum of vx and of vy vanish."""
    rows = np.zeros((2, N_COORDS))
    rows[0, 0:6:2] = 1.0
    rows[1, 1:6:2] = 1.0
    return rows


def constraint_matrix(
    cfg: Configuration, constraints: ConstraintSet, contact_tol: float = 1e-6
) -> np.ndarray:
    """Stack the active rows in the fixed order: bonds, rolling, center."""
    rows = [bond_row(cfg, pair) for pair in constraints.pairs]
    if constraints.rolling:
        rows += [rolling_row(cfg, pair, contact_tol) for pair in constraints.pairs]
    mat = np.array(rows) if rows else np.zeros((0, N_COORDS))
    if constraints.pin_com:
        mat = np.vstack([mat, com_rows()])
    return mat


def assemble(
    cfg: Configuration, constraints: ConstraintSet, contact_tol: float = 1e-6
) -> ProjectionBundle:
    """Build C, G and the velocity projection P at the given configuration.

    Raises :class:`NumericalRankError` when G = C C^T is rank deficient
    relative to ``RANK_RTOL`` (linearly dependent constraint rows), with a
    condition-number estimate in the message.
    """
    c_mat = constraint_matrix(cfg, constraints, contact_tol)
    gram = c_mat @ c_mat.T
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[0] <= RANK_RTOL * max(eigvals[-1], 1.0):
        cond = np.inf if eigvals[0] <= 0 else eigvals[-1] / eigvals[0]
        raise NumericalRankError(
            f"constraint Gram matrix is rank deficient "
            f"(cond estimate {cond:.3e}, eigenvalues {eigvals!r})"
        )
    proj = np.eye(N_COORDS) - c_mat.T @ np.linalg.solve(gram, c_mat)
    proj = 0.5 * (proj + proj.T)
    return ProjectionBundle(C=c_mat, G=gram, P=proj, constraints=constraints)


def gamma_p_dagger(bundle: ProjectionBundle, friction: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of the projected friction P Gamma P.

    ``friction`` may be a scalar, a length-9 diagonal, or a full (9, 9)
    matrix.  The pseudoinverse is computed by symmetric eigendecomposition
    with a relative cutoff ``RANK_RTOL`` on the eigenvalues; the result is
    cached on the bundle.

    For isotropic friction Gamma = g*I the result is P / g, because P is an
    orthogonal projection (idempotent and symmetric).
    """
    gamma = np.asarray(friction, dtype=float)
    if gamma.ndim == 0:
        gamma_mat = float(gamma) * np.eye(N_COORDS)
    elif gamma.ndim == 1:
        gamma_mat = np.diag(gamma)
    else:
        gamma_mat = gamma
    projected = bundle.P @ gamma_mat @ bundle.P
    projected = 0.5 * (projected + projected.T)
    eigvals, eigvecs = np.linalg.eigh(projected)
    cutoff = RANK_RTOL * max(abs(eigvals[0]), abs(eigvals[-1]), 1e-300)
    inv = np.where(np.abs(eigvals) > cutoff, 1.0 / np.where(eigvals == 0, 1.0, eigvals), 0.0)
    pinv = (eigvecs * inv) @ eigvecs.T
    pinv = 0.5 * (pinv + pinv.T)
    bundle.gamma_p_pinv = pinv
    return pinv


def position_residuals(cfg: Configuration, constraints: ConstraintSet) -> dict:
    """Position-level residuals of the holonomic constraints.

    Returns bond-length deviations |x_i - x_j| - 1 per pair and the center
    of mass (rolling contact is velocity-level only and has no position
    residual).
    """
    out = {}
    for pair in constraints.pairs:
        u = cfg.bond_vector(pair)
        out[f"bond_{pair[0]}{pair[1]}"] = float(np.hypot(u[0], u[1]) - 1.0)
    if constraints.pin_com:
        com = cfg.positions.mean(axis=0)
        out["com_x"] = float(com[0])
        out["com_y"] = float(com[1])
    return out
