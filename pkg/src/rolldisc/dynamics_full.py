"""Underdamped Langevin dynamics of the disc trimer.

The integrator advances positions and momenta with a four-stage cycle:

1. free drift            q <- q + (p/m) dt
2. position projection   pull q back onto the bond/center manifold
                         (skipped when bonds are soft springs)
3. momentum kick         p <- p - (gamma/m) p dt + F(q) dt + sigma sqrt(dt) N
4. velocity projection   p <- P(q) p  (removes constraint-violating velocity)

Hard bonds keep the trimer exactly on the constraint manifold; soft bonds
replace stages 2 by a stiff harmonic bond force in stage 3 and project in
stage 4 only onto the constraints that remain exact (rolling and/or center
of mass).

The module holds the single-step reference implementation and the
diagnostic operations (Lagrange multipliers, constrained acceleration, mass
rescaling); long trajectories are delegated to the compiled kernels via
:func:`run_langevin`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _shape, model
from .model import Configuration, ConstraintSet, N_COORDS


class ProjectionError(RuntimeError):
    """Newton projection onto the position manifold failed to converge."""


@dataclass(frozen=True)
class SimParams:
    """Parameters of a Langevin run.

    The defaults (m = 0.1, gamma = 1, sigma = 1) give inverse temperature
    beta = 2 gamma / sigma^2 = 2.  ``beta`` may be passed explicitly, in
    which case it must satisfy the fluctuation-dissipation relation
    sigma^2 = 2 gamma / beta.
    """

    dt: float
    n_steps: int
    mass: float = 0.1
    gamma: float = 1.0
    sigma: float = 1.0
    beta: Optional[float] = None
    seed: int = 0
    constraint_mode: str = "roll"
    bond_mode: str = "hard"
    k_bond: float = 1.0e4
    record_stride: int = 100
    soft_projection: str = "rolling_com"
    contact_tol: Optional[float] = None

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.mass <= 0.0 or self.gamma < 0.0 or self.sigma < 0.0:
            raise ValueError("mass must be positive; gamma and sigma non-negative")
        if self.constraint_mode not in ("roll", "slide"):
            raise ValueError(f"constraint_mode must be 'roll' or 'slide', got {self.constraint_mode!r}")
        if self.bond_mode not in ("hard", "soft"):
            raise ValueError(f"bond_mode must be 'hard' or 'soft', got {self.bond_mode!r}")
        if self.soft_projection not in ("rolling_com", "com", "full"):
            raise ValueError(f"unknown soft_projection {self.soft_projection!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.beta is not None:
            if self.sigma == 0.0:
                raise ValueError("beta cannot be prescribed with sigma = 0")
            expected = 2.0 * self.gamma / (self.sigma * self.sigma)
            if not math.isclose(self.beta, expected, rel_tol=1e-12, abs_tol=0.0):
                raise ValueError(
                    f"beta={self.beta} violates sigma^2 = 2 gamma / beta "
                    f"(expected beta={expected})"
                )

    @property
    def beta_effective(self) -> float:
        """Inverse temperature implied by gamma and sigma."""
        if self.beta is not None:
            return self.beta
        if self.sigma == 0.0:
            return math.inf
        return 2.0 * self.gamma / (self.sigma * self.sigma)

    @property
    def constraints(self) -> ConstraintSet:
        return ConstraintSet(rolling=self.constraint_mode == "roll")

    @property
    def contact_tol_effective(self) -> float:
        """Contact tolerance for rolling rows.

        Soft bonds fluctuate with standard deviation 1/sqrt(2 k beta), so
        the rolling rows must accept center distances that far from one;
        twenty standard deviations keeps false rejections negligible.
        """
        if self.contact_tol is not None:
            return self.contact_tol
        if self.bond_mode == "soft":
            beta = self.beta_effective
            if not math.isfinite(beta) or beta <= 0:
                return 0.1
            return max(1e-6, 20.0 / math.sqrt(2.0 * self.k_bond * beta))
        return 1e-6


@dataclass
class PhaseState:
    """Positions and momenta of the trimer."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float).reshape(N_COORDS)
        self.p = np.asarray(self.p, dtype=float).reshape(N_COORDS)

    def copy(self) -> "PhaseState":
        return PhaseState(self.q.copy(), self.p.copy())


def default_initial(omega: float = math.pi / 2.0, phi: float = 0.0) -> PhaseState:
    """State on the manifold at the given shape, zero spin angles and momenta."""
    q = np.concatenate([_shape.positions(omega, phi), np.zeros(3)])
    return PhaseState(q, np.zeros(N_COORDS))


def soft_bond_force(q: np.ndarray, k_bond: float) -> np.ndarray:
    """Force of the stiff harmonic bonds U = k sum (|x_i - x_j| - 1)^2.

    Returns -grad U as a length-9 vector (zero spin components).
    """
    cfg = Configuration(np.asarray(q, dtype=float))
    force = np.zeros(N_COORDS)
    for (i, j) in model.CHAIN_PAIRS:
        u = cfg.bond_vector((i, j))
        length = float(np.hypot(u[0], u[1]))
        if length == 0.0:
            raise ValueError(f"bond {(i, j)} has zero length; force undefined")
        pull = 2.0 * k_bond * (length - 1.0) / length
        force[2 * (i - 1): 2 * (i - 1) + 2] -= pull * u
        force[2 * (j - 1): 2 * (j - 1) + 2] += pull * u
    return force


def soft_bond_energy(q: np.ndarray, k_bond: float) -> float:
    """Potential energy of the stiff harmonic bonds."""
    cfg = Configuration(np.asarray(q, dtype=float))
    total = 0.0
    for pair in model.CHAIN_PAIRS:
        u = cfg.bond_vector(pair)
        total += (float(np.hypot(u[0], u[1])) - 1.0) ** 2
    return k_bond * total


def _position_residual(q: np.ndarray) -> np.ndarray:
    """Stacked holonomic residuals: (|u|^2 - 1)/2 per bond, then summed x, y."""
    cfg = Configuration(q)
    res = np.empty(4)
    for idx, pair in enumerate(model.CHAIN_PAIRS):
        u = cfg.bond_vector(pair)
        res[idx] = 0.5 * (u @ u - 1.0)
    res[2] = q[0] + q[2] + q[4]
    res[3] = q[1] + q[3] + q[5]
    return res


def _position_rows(q: np.ndarray) -> np.ndarray:
    """Gradients of :func:`_position_residual`: bond rows then center rows."""
    cfg = Configuration(q)
    rows = [model.bond_row(cfg, pair) for pair in model.CHAIN_PAIRS]
    return np.vstack([rows, model.com_rows()])


def project_position(
    q: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> np.ndarray:
    """Pull a drifted position back onto the bond/center manifold.

    The correction is constrained to the row space of the constraint
    gradients at the input point: q' = q + A^T mu with A the bond/center
    rows at q, and mu found by Newton iteration on the holonomic residuals
    (the Jacobian is rows(q') @ A^T, re-evaluated each iteration).

    Raises :class:`ProjectionError` if the residual does not drop below
    ``tol`` within ``max_iter`` iterations (wildly off-manifold input or a
    degenerate configuration).
    """
    q = np.asarray(q, dtype=float)
    base_rows = _position_rows(q)
    mu = np.zeros(base_rows.shape[0])
    current = q.copy()
    for _ in range(max_iter):
        res = _position_residual(current)
        if np.max(np.abs(res)) < tol:
            return current
        jac = _position_rows(current) @ base_rows.T
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError(f"singular projection Jacobian: {exc}") from exc
        mu += delta
        current = q + base_rows.T @ mu
    res = _position_residual(current)
    raise ProjectionError(
        f"position projection did not converge in {max_iter} iterations "
        f"(last residual {np.max(np.abs(res)):.3e}, tol {tol:.1e})"
    )


def _velocity_rows(q: np.ndarray, params: SimParams) -> np.ndarray:
    """Constraint rows used in the velocity projection (stage 4)."""
    cfg = Configuration(q)
    tol = params.contact_tol_effective
    if params.bond_mode == "hard" or params.soft_projection == "full":
        return model.constraint_matrix(cfg, params.constraints, tol)
    rows = []
    if params.soft_projection == "rolling_com" and params.constraint_mode == "roll":
        rows = [model.rolling_row(cfg, pair, tol) for pair in model.CHAIN_PAIRS]
    if rows:
        return np.vstack([rows, model.com_rows()])
    return model.com_rows()


def project_velocity(p: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Remove the component of p violating the velocity constraints C p = 0."""
    if rows.size == 0:
        return p.copy()
    gram = rows @ rows.T
    return p - rows.T @ np.linalg.solve(gram, rows @ p)


def step(
    state: PhaseState,
    params: SimParams,
    noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> PhaseState:
    """One integrator cycle (reference implementation, see module docstring).

    ``noise`` is the standard-normal 9-vector of the momentum kick; it is
    drawn from ``rng`` if not supplied (sigma = 0 runs need neither).
    """
    if noise is None:
        if params.sigma == 0.0:
            noise = np.zeros(N_COORDS)
        else:
            if rng is None:
                raise ValueError("supply either noise or rng when sigma > 0")
            noise = rng.standard_normal(N_COORDS)
    q = state.q + (params.dt / params.mass) * state.p
    if params.bond_mode == "hard":
        q = project_position(q)
    p = state.p - (params.gamma / params.mass) * params.dt * state.p
    if params.bond_mode == "soft":
        p = p + params.dt * soft_bond_force(q, params.k_bond)
    p = p + params.sigma * math.sqrt(params.dt) * noise
    p = project_velocity(p, _velocity_rows(q, params))
    return PhaseState(q, p)


def constraint_curvature(cfg: Configuration, constraints: ConstraintSet, velocity: np.ndarray) -> np.ndarray:
    """Quadratic curvature terms (dC/dt) v per constraint row.

    Bond rows contribute |v_i - v_j|^2; rolling rows vanish identically
    (perp(u_dot) . u_dot = 0); center rows are constant.  Row order matches
    :func:`rolldisc.model.constraint_matrix`.
    """
    velocity = np.asarray(velocity, dtype=float)
    kappa = []
    for pair in constraints.pairs:
        i, j = pair
        dv = velocity[2 * (i - 1): 2 * (i - 1) + 2] - velocity[2 * (j - 1): 2 * (j - 1) + 2]
        kappa.append(float(dv @ dv))
    if constraints.rolling:
        kappa.extend([0.0] * len(constraints.pairs))
    if constraints.pin_com:
        kappa.extend([0.0, 0.0])
    return np.array(kappa)


def lagrange_multipliers(
    cfg: Configuration,
    velocity: np.ndarray,
    constraints: ConstraintSet,
    friction: float = 1.0,
    external_force: Optional[np.ndarray] = None,
    contact_tol: float = 1e-6,
) -> np.ndarray:
    """Constraint forces lambda of the continuous-time constrained dynamics.

    Solves G lambda = C (-Gamma v + F) + kappa(v, v), so that the
    acceleration  a = -Gamma v + F - C^T lambda  satisfies C a + kappa = 0
    (the velocity constraints stay differentiated-consistent).
    """
    bundle = model.assemble(cfg, constraints, contact_tol)
    force = np.zeros(N_COORDS) if external_force is None else np.asarray(external_force, dtype=float)
    rhs = bundle.C @ (-friction * velocity + force) + constraint_curvature(cfg, constraints, velocity)
    return np.linalg.solve(bundle.G, rhs)


def constrained_acceleration(
    cfg: Configuration,
    velocity: np.ndarray,
    constraints: ConstraintSet,
    friction: float = 1.0,
    external_force: Optional[np.ndarray] = None,
    contact_tol: float = 1e-6,
) -> np.ndarray:
    """Deterministic acceleration of the constrained dynamics (unit mass).

    a = -Gamma v + F - C^T lambda; the identity C a + kappa(v, v) = 0 is the
    defining property and is covered by the tests.
    """
    force = np.zeros(N_COORDS) if external_force is None else np.asarray(external_force, dtype=float)
    lam = lagrange_multipliers(cfg, velocity, constraints, friction, external_force, contact_tol)
    bundle = model.assemble(cfg, constraints, contact_tol)
    return -friction * velocity + force - bundle.C.T @ lam


@dataclass
class ScaledSystem:
    """A constrained Langevin system after the change of variables y = M^(1/2) x.

    ``friction`` and ``noise`` are full matrices; ``potential`` and
    ``constraint_rows`` are callables in the scaled variable (present only
    when supplied to :func:`mass_scale`).  Scaling with the reciprocal mass
    undoes the transformation exactly.
    """

    mass: np.ndarray
    friction: np.ndarray
    noise: np.ndarray
    potential: Optional[Callable[[np.ndarray], float]] = None
    constraint_rows: Optional[Callable[[np.ndarray], np.ndarray]] = None


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(N_COORDS)
    if arr.ndim == 1:
        if arr.shape != (N_COORDS,):
            raise ValueError(f"{name} diagonal must have length {N_COORDS}")
        return np.diag(arr)
    if arr.shape != (N_COORDS, N_COORDS):
        raise ValueError(f"{name} matrix must be ({N_COORDS}, {N_COORDS})")
    return arr


def mass_scale(
    mass,
    friction,
    noise,
    potential: Optional[Callable[[np.ndarray], float]] = None,
    constraint_rows: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> ScaledSystem:
    """Absorb a (diagonal) mass matrix into the variables: y = M^(1/2) x.

    In the scaled variable the dynamics is the unit-mass system with

        friction'   = M^(-1/2) Gamma M^(-1/2)
        noise'      = M^(-1/2) sigma
        potential'  (y) = U(M^(-1/2) y)
        rows'       (y) = C(M^(-1/2) y) M^(-1/2)

    ``mass`` may be a positive scalar or a positive length-9 diagonal.
    Applying :func:`mass_scale` again with 1/mass restores the original
    system exactly (round-trip covered by the tests).
    """
    mass_diag = np.asarray(mass, dtype=float)
    if mass_diag.ndim == 0:
        mass_diag = np.full(N_COORDS, float(mass_diag))
    if mass_diag.shape != (N_COORDS,) or np.any(mass_diag <= 0.0):
        raise ValueError("mass must be a positive scalar or positive length-9 diagonal")
    inv_sqrt = 1.0 / np.sqrt(mass_diag)
    gamma_mat = _as_matrix(friction, "friction")
    sigma_mat = _as_matrix(noise, "noise")
    gamma_scaled = inv_sqrt[:, None] * gamma_mat * inv_sqrt[None, :]
    sigma_scaled = inv_sqrt[:, None] * sigma_mat

    scaled_potential = None
    if potential is not None:
        def scaled_potential(y, _inv=inv_sqrt, _u=potential):
            return _u(_inv * np.asarray(y, dtype=float))

    scaled_rows = None
    if constraint_rows is not None:
        def scaled_rows(y, _inv=inv_sqrt, _c=constraint_rows):
            return np.asarray(_c(_inv * np.asarray(y, dtype=float))) * _inv[None, :]

    return ScaledSystem(
        mass=mass_diag,
        friction=gamma_scaled,
        noise=sigma_scaled,
        potential=scaled_potential,
        constraint_rows=scaled_rows,
    )


@dataclass
class LangevinResult:
    """Recorded frames and diagnostics of a Langevin run.

    ``omega`` is the folded shape angle in [0, pi); ``omega_acc`` and
    ``phi_acc`` are the continuously tracked (unwrapped) shape and rotation
    angles used for the conserved-quantity diagnostics; ``theta`` has the
    spin angles.  ``max_bond_dev`` and ``max_velocity_residual`` are maxima
    over the recorded frames.
    """

    params: SimParams
    times: np.ndarray
    omega: np.ndarray
    omega_acc: np.ndarray
    phi_acc: np.ndarray
    theta: np.ndarray
    final_q: np.ndarray
    final_p: np.ndarray
    max_bond_dev: float
    max_velocity_residual: float
    backend: str
    n_warmup: int


def run_langevin(
    params: SimParams,
    initial: Optional[PhaseState] = None,
    warmup_fraction: float = 0.01,
    backend: Optional[str] = None,
) -> LangevinResult:
    """Integrate a full Langevin trajectory and record strided frames.

    The first ``warmup_fraction`` of the steps is discarded before frames
    are recorded.  Heavy lifting happens in the selected kernel backend;
    the noise stream is a Philox generator seeded with ``params.seed`` and
    is consumed identically by both backends.
    """
    from . import kernels

    if initial is None:
        initial = default_initial()
    n_warmup = int(params.n_steps * warmup_fraction)
    raw = kernels.langevin_trajectory(
        initial.q.copy(), initial.p.copy(), params, n_warmup, backend=backend
    )
    return LangevinResult(
        params=params,
        times=raw["times"],
        omega=raw["omega"],
        omega_acc=raw["omega_acc"],
        phi_acc=raw["phi_acc"],
        theta=raw["theta"],
        final_q=raw["final_q"],
        final_p=raw["final_p"],
        max_bond_dev=raw["max_bond_dev"],
        max_velocity_residual=raw["max_velocity_residual"],
        backend=raw["backend"],
        n_warmup=n_warmup,
    )
