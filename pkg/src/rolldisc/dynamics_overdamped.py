"""Overdamped dynamics of the disc trimer, in three equivalent forms.

* :func:`step_cartesian_strat` -- the zero-mass limit with isotropic unit
  friction is the Stratonovich equation  dx = P(x) o dW  (projected white
  noise).  Integrated with an Euler-Heun predictor/corrector and finished
  by pulling the position back onto the bond/center manifold.

* :func:`step_cartesian_general` -- the Ito form for general friction:

      dx = [ -GammaP+ grad U + (1/beta) div-term ] dt + sqrtm(2/beta GammaP+) dW,

  where GammaP+ is the pseudoinverse of P Gamma P and the divergence term is
  (1/beta) sum_ij P_ij d_j (GammaP+)_ik, evaluated by central differences
  over the six center coordinates.  For isotropic friction the noise
  amplitude reduces to a projection and the two Cartesian steppers advance
  on exactly the same clock (no time rescaling).

* :func:`step_reduced` -- the same law in shape coordinates
  (omega, phi, th1..3), driven through the closed-form diffusion rows of
  :mod:`rolldisc._shape`; omega reflects at the ends of its domain.

Reference single-step implementations live here; long runs go through the
compiled kernels (:func:`run_cartesian`, :func:`run_reduced`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _shape, model
from .dynamics_full import project_position
from .model import Configuration, ConstraintSet, N_COORDS


def parameterize(omega: float, phi: float = 0.0, spins: Optional[np.ndarray] = None) -> Configuration:
    """Configuration on the constraint manifold at shape (omega, phi).

    Unit bonds and pinned center hold for every (omega, phi); spins default
    to zero.
    """
    spins = np.zeros(3) if spins is None else np.asarray(spins, dtype=float)
    return Configuration.from_parts(_shape.positions(float(omega), float(phi)), spins)


@dataclass
class ReducedState:
    """Shape coordinates: opening half-angle, rotation, three spin angles.

    ``phi`` is kept unwrapped (accumulated), which the conserved-quantity
    diagnostics rely on.
    """

    omega: float
    phi: float
    theta: np.ndarray

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float).reshape(3)

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.omega, self.phi], self.theta])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ReducedState":
        arr = np.asarray(arr, dtype=float)
        return cls(float(arr[0]), float(arr[1]), arr[2:5].copy())


@dataclass
class ReducedCoefficients:
    """Closed-form coefficients of the reduced SDE at a given shape.

    ``rows`` is the 5x9 diffusion matrix B: the reduced increment over dt is
    B @ dW with dW nine-dimensional white noise.  ``var_omega_rate`` and
    ``var_phi_rate`` are the squared row norms |B_omega|^2, |B_phi|^2, i.e.
    the quadratic-variation rates of omega and phi.

    The chain-rule blocks of the coordinate change are exposed as
    ``shape_jacobian`` (dx/d(omega, phi), 9x2, zero in the spin slots),
    ``spin_jacobian`` (dx/dtheta, 9x3), ``full_jacobian`` (their 9x5
    concatenation) and ``shape_metric`` (the 2x2 Gram matrix of the shape
    columns, diag(K^2, L^2)).
    """

    mode: str
    omega: float
    phi: float
    k_sq: float
    l_sq: float
    alpha1: float
    alpha2: float
    rows: np.ndarray
    shape_jacobian: np.ndarray
    spin_jacobian: np.ndarray

    @property
    def full_jacobian(self) -> np.ndarray:
        return np.hstack([self.shape_jacobian, self.spin_jacobian])

    @property
    def shape_metric(self) -> np.ndarray:
        return np.diag([self.k_sq, self.l_sq])

    @property
    def row_omega(self) -> np.ndarray:
        return self.rows[0]

    @property
    def row_phi(self) -> np.ndarray:
        return self.rows[1]

    @property
    def var_omega_rate(self) -> float:
        return float(self.rows[0] @ self.rows[0])

    @property
    def var_phi_rate(self) -> float:
        return float(self.rows[1] @ self.rows[1])


def reduced_coefficients(omega: float, phi: float = 0.0, mode: str = "roll") -> ReducedCoefficients:
    """Build the reduced diffusion rows and verify them against the projection.

    The closed forms are cross-checked on the spot against the matrix route:
    the projection of the shape tangents must align with the admissible unit
    directions with the predicted lengths

        P dx/domega = (K^2 / sqrt(K^2 + 8)) t_omega,
        P dx/dphi   = (L^2 / sqrt(L^2 + 8/3)) t_phi      (rolling mode),

    and the diffusion rows must match the projected coordinate differentials.
    An AssertionError here means the closed-form geometry and the constraint
    algebra disagree — a programming error, not a user error.
    """
    if mode not in ("roll", "slide"):
        raise ValueError(f"mode must be 'roll' or 'slide', got {mode!r}")
    omega = float(omega)
    phi = float(phi)
    cfg = parameterize(omega, phi)
    bundle = model.assemble(cfg, ConstraintSet(rolling=mode == "roll"))
    tangents = _shape.shape_tangents(omega, phi)
    k2 = float(_shape.k_sq(omega))
    l2 = float(_shape.l_sq(omega))
    a1 = float(_shape.alpha1(omega))
    a2 = float(_shape.alpha2(omega))

    if mode == "roll":
        rows = _shape.diffusion_rows_roll(omega, phi)
        expected_w = k2 * a1 * _shape.t_omega(omega, phi)
        expected_p = l2 * a2 * _shape.t_phi(omega, phi)
        if np.max(np.abs(bundle.P @ tangents[:, 0] - expected_w)) > 1e-10:
            raise AssertionError("projected omega-tangent deviates from closed form")
        if np.max(np.abs(bundle.P @ tangents[:, 1] - expected_p)) > 1e-10:
            raise AssertionError("projected phi-tangent deviates from closed form")
        # coordinate differentials: d omega = (dx/domega . dx) / K^2, so the
        # omega row of B is (P dx/domega)^T / K^2 = alpha1 t_omega, etc.
        spin_rows = bundle.P[6:, :]
    else:
        rows = _shape.diffusion_rows_slide(omega, phi)
        if np.max(np.abs(bundle.P @ tangents - tangents)) > 1e-10:
            raise AssertionError("shape tangents must be admissible under sliding")
        spin_rows = bundle.P[6:, :]
    matrix_rows = np.vstack([
        (bundle.P @ tangents[:, 0]) / k2,
        (bundle.P @ tangents[:, 1]) / l2,
        spin_rows,
    ])
    if np.max(np.abs(matrix_rows - rows)) > 1e-10:
        raise AssertionError("closed-form diffusion rows deviate from projection route")
    spin_jac = np.zeros((N_COORDS, 3))
    spin_jac[6:, :] = np.eye(3)
    return ReducedCoefficients(
        mode=mode,
        omega=omega,
        phi=phi,
        k_sq=k2,
        l_sq=l2,
        alpha1=a1,
        alpha2=a2,
        rows=rows,
        shape_jacobian=tangents,
        spin_jacobian=spin_jac,
    )


def _strat_contact_tol(dt: float) -> float:
    """Contact tolerance for rolling rows at Heun predictor points.

    The predictor leaves the manifold by O(|dW|^2) = O(dt), so the rolling
    rows must accept bond lengths that far from one.
    """
    return max(1e-6, 50.0 * dt)


def step_cartesian_strat(
    q: np.ndarray,
    dt: float,
    mode: str = "roll",
    noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """One Euler-Heun step of dx = P(x) o dW, then re-projection.

    ``noise`` is the standard-normal 9-vector; drawn from ``rng`` when not
    supplied.
    """
    if noise is None:
        if rng is None:
            raise ValueError("supply either noise or rng")
        noise = rng.standard_normal(N_COORDS)
    q = np.asarray(q, dtype=float)
    constraints = ConstraintSet(rolling=mode == "roll")
    tol = _strat_contact_tol(dt)
    dw = math.sqrt(dt) * np.asarray(noise, dtype=float)
    p0 = model.assemble(Configuration(q), constraints, tol).P
    v0 = p0 @ dw
    p1 = model.assemble(Configuration(q + v0), constraints, tol).P
    out = q + 0.5 * (v0 + p1 @ dw)
    return project_position(out)


def step_cartesian_general(
    q: np.ndarray,
    dt: float,
    mode: str = "roll",
    friction=1.0,
    beta: float = 2.0,
    noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    fd_step: float = 1e-6,
    grad_potential: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """One Euler step of the general-friction Ito form, then re-projection.

    The drift has the potential term -GammaP+ grad U plus the divergence
    correction (1/beta) sum_ij P_ij d_j (GammaP+)_ik, the latter evaluated
    with central differences of step ``fd_step`` over the six center
    coordinates (the constraint geometry does not depend on the spins).
    The noise amplitude is the symmetric square root of (2/beta) GammaP+.
    """
    if noise is None:
        if rng is None:
            raise ValueError("supply either noise or rng")
        noise = rng.standard_normal(N_COORDS)
    q = np.asarray(q, dtype=float)
    constraints = ConstraintSet(rolling=mode == "roll")
    tol = max(1e-6, 100.0 * fd_step)
    gamma = np.asarray(friction, dtype=float)
    isotropic = gamma.ndim == 0

    def pinv_at(point: np.ndarray) -> np.ndarray:
        bundle = model.assemble(Configuration(point), constraints, tol)
        if isotropic:
            return bundle.P / float(gamma)
        return model.gamma_p_dagger(bundle, gamma)

    base_bundle = model.assemble(Configuration(q), constraints, tol)
    base_pinv = base_bundle.P / float(gamma) if isotropic else model.gamma_p_dagger(base_bundle, gamma)

    # divergence term: for each center coordinate j, d_j(GammaP+) by central
    # differences; contract with P_ij and sum over i and j.
    drift = np.zeros(N_COORDS)
    for j in range(6):
        shift = np.zeros(N_COORDS)
        shift[j] = fd_step
        dpinv = (pinv_at(q + shift) - pinv_at(q - shift)) / (2.0 * fd_step)
        drift += base_bundle.P[:, j] @ dpinv  # sum_i P_ij (d_j GammaP+)_ik over k
    drift /= beta
    if grad_potential is not None:
        drift -= base_pinv @ np.asarray(grad_potential(q), dtype=float)

    if isotropic:
        amp = math.sqrt(2.0 / (beta * float(gamma)))
        kick = amp * (base_bundle.P @ noise) * math.sqrt(dt)
    else:
        diffusion = (2.0 / beta) * base_pinv
        eigvals, eigvecs = np.linalg.eigh(0.5 * (diffusion + diffusion.T))
        eigvals = np.clip(eigvals, 0.0, None)
        sqrtm = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
        kick = (sqrtm @ noise) * math.sqrt(dt)
    return project_position(q + drift * dt + kick)


def step_reduced(
    state: ReducedState,
    dt: float,
    mode: str = "roll",
    noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    domain: Tuple[float, float] = (0.0, math.pi),
) -> ReducedState:
    """One Euler-Heun step of the reduced SDE with reflecting omega walls.

    The drift-free Stratonovich system d(coords) = B(omega, phi) o dW is
    advanced with the same predictor/corrector as the Cartesian stepper;
    afterwards omega is reflected into ``domain``.
    """
    if noise is None:
        if rng is None:
            raise ValueError("supply either noise or rng")
        noise = rng.standard_normal(N_COORDS)
    if mode not in ("roll", "slide"):
        raise ValueError(f"mode must be 'roll' or 'slide', got {mode!r}")
    rows_fn = _shape.diffusion_rows_roll if mode == "roll" else _shape.diffusion_rows_slide
    dw = math.sqrt(dt) * np.asarray(noise, dtype=float)
    s0 = state.as_array()
    b0 = rows_fn(state.omega, state.phi)
    predictor = s0 + b0 @ dw
    b1 = rows_fn(float(predictor[0]), float(predictor[1]))
    s1 = s0 + 0.5 * (b0 + b1) @ dw
    lo, hi = domain
    width = hi - lo
    omega = float(s1[0])
    # reflect into [lo, hi] (at most a couple of bounces for sane dt)
    while omega < lo or omega > hi:
        if omega < lo:
            omega = 2.0 * lo - omega
        else:
            omega = 2.0 * hi - omega
        if width <= 0.0:
            raise ValueError("empty reflection domain")
    return ReducedState(omega, float(s1[1]), s1[2:5])


@dataclass
class OverdampedResult:
    """Frames and diagnostics of a Cartesian overdamped run."""

    engine: str
    mode: str
    dt: float
    times: np.ndarray
    omega: np.ndarray
    omega_acc: np.ndarray
    phi_acc: np.ndarray
    theta: np.ndarray
    final_q: np.ndarray
    max_bond_dev: float
    backend: str
    seed: int


@dataclass
class ReducedResult:
    """Frames of a reduced-coordinate run."""

    mode: str
    dt: float
    times: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    final: ReducedState
    backend: str
    seed: int


def run_cartesian(
    engine: str,
    mode: str,
    dt: float,
    n_steps: int,
    seed: int,
    record_stride: int = 100,
    initial: Optional[np.ndarray] = None,
    beta: float = 2.0,
    gamma: float = 1.0,
    fd_step: float = 1e-6,
    warmup_fraction: float = 0.01,
    backend: Optional[str] = None,
) -> OverdampedResult:
    """Long Cartesian overdamped trajectory through the kernel backends.

    ``engine`` is "strat" (projected Stratonovich noise) or "ito" (general
    form with isotropic friction ``gamma``).  Frames are recorded every
    ``record_stride`` steps after discarding the warm-up fraction.
    """
    from . import kernels

    if engine not in ("strat", "ito"):
        raise ValueError(f"engine must be 'strat' or 'ito', got {engine!r}")
    if initial is None:
        initial = parameterize(math.pi / 2.0).coords
    n_warmup = int(n_steps * warmup_fraction)
    raw = kernels.cartesian_trajectory(
        np.asarray(initial, dtype=float).copy(),
        engine=engine,
        mode=mode,
        dt=dt,
        n_steps=n_steps,
        seed=seed,
        record_stride=record_stride,
        n_warmup=n_warmup,
        beta=beta,
        gamma=gamma,
        fd_step=fd_step,
        backend=backend,
    )
    return OverdampedResult(
        engine=engine,
        mode=mode,
        dt=dt,
        times=raw["times"],
        omega=raw["omega"],
        omega_acc=raw["omega_acc"],
        phi_acc=raw["phi_acc"],
        theta=raw["theta"],
        final_q=raw["final_q"],
        max_bond_dev=raw["max_bond_dev"],
        backend=raw["backend"],
        seed=seed,
    )


def run_reduced(
    mode: str,
    dt: float,
    n_steps: int,
    seed: int,
    record_stride: int = 100,
    initial: Optional[ReducedState] = None,
    domain: Tuple[float, float] = (0.0, math.pi),
    warmup_fraction: float = 0.01,
    backend: Optional[str] = None,
) -> ReducedResult:
    """Long reduced-coordinate trajectory through the kernel backends."""
    from . import kernels

    if initial is None:
        initial = ReducedState(math.pi / 2.0, 0.0, np.zeros(3))
    n_warmup = int(n_steps * warmup_fraction)
    raw = kernels.reduced_trajectory(
        initial.as_array(),
        mode=mode,
        dt=dt,
        n_steps=n_steps,
        seed=seed,
        record_stride=record_stride,
        n_warmup=n_warmup,
        domain=domain,
        backend=backend,
    )
    return ReducedResult(
        mode=mode,
        dt=dt,
        times=raw["times"],
        omega=raw["omega"],
        phi=raw["phi"],
        theta=raw["theta"],
        final=ReducedState.from_array(raw["final"]),
        backend=raw["backend"],
        seed=seed,
    )
