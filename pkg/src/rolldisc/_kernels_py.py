"""Pure-python trajectory kernels.

Backend counterpart of the compiled ``_kernels`` extension: every function
here consumes the identical noise layout and performs the identical update
sequence, so the two backends agree pathwise up to floating-point roundoff.
The dispatcher in :mod:`rolldisc.kernels` slices the Philox noise stream
into chunks and hands each chunk to one of the ``*_chunk`` functions
together with the running state.

Slow by design (hundreds of microseconds per step); selected only when the
extension is missing or via ``ROLLDISC_BACKEND=python``.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
PROJ_TOL = 1e-10
PROJ_MAXITER = 50


def _wrap(x: float) -> float:
    """Principal angle in (-pi, pi]."""
    return -((-x + math.pi) % TWO_PI - math.pi)


def angle_pair(q: np.ndarray) -> tuple:
    """(opening angle a, frame angle b) used by the unwrapped trackers.

    ``a`` is the signed angle from x1-x2 to x3-x2 (equal to twice the shape
    angle); ``b`` is the argument of (z3 - z1)/2 + (3/2) z2, a unit-modulus
    combination equal to phi - omega + pi/2 on the manifold.
    """
    ux, uy = q[0] - q[2], q[1] - q[3]
    vx, vy = q[4] - q[2], q[5] - q[3]
    a = math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
    wr = 0.5 * (q[4] - q[0]) + 1.5 * q[2]
    wi = 0.5 * (q[5] - q[1]) + 1.5 * q[3]
    b = math.atan2(wi, wr)
    return a, b


def init_angle_carry(q: np.ndarray, n_extra: int) -> np.ndarray:
    """Carry vector [a_prev, b_prev, a_acc, b_acc, 0...] for a start state."""
    a, b = angle_pair(q)
    return np.array([a, b, a, b] + [0.0] * n_extra)


def _advance_angles(q: np.ndarray, carry: np.ndarray) -> None:
    a, b = angle_pair(q)
    carry[2] += _wrap(a - carry[0])
    carry[3] += _wrap(b - carry[1])
    carry[0] = a
    carry[1] = b


def _bond_vectors(q: np.ndarray) -> tuple:
    return q[0:2] - q[2:4], q[2:4] - q[4:6]


def _constraint_rows(q: np.ndarray, bonds: bool, rolling: bool) -> np.ndarray:
    """Rows in the fixed order bonds, rolling, center (subset per flags)."""
    u12, u23 = _bond_vectors(q)
    rows = []
    if bonds:
        r = np.zeros(9)
        r[0:2] = u12
        r[2:4] = -u12
        rows.append(r)
        r = np.zeros(9)
        r[2:4] = u23
        r[4:6] = -u23
        rows.append(r)
    if rolling:
        r = np.zeros(9)
        r[0] = -u12[1]
        r[1] = u12[0]
        r[2] = u12[1]
        r[3] = -u12[0]
        r[6] = -0.5
        r[7] = -0.5
        rows.append(r)
        r = np.zeros(9)
        r[2] = -u23[1]
        r[3] = u23[0]
        r[4] = u23[1]
        r[5] = -u23[0]
        r[7] = -0.5
        r[8] = -0.5
        rows.append(r)
    r = np.zeros(9)
    r[0:6:2] = 1.0
    rows.append(r)
    r = np.zeros(9)
    r[1:6:2] = 1.0
    rows.append(r)
    return np.vstack(rows)


def _project_vector(rows: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """vec minus its component in the row space of ``rows``."""
    gram = rows @ rows.T
    return vec - rows.T @ np.linalg.solve(gram, rows @ vec)


def _projection_matrix(q: np.ndarray, rolling: bool) -> np.ndarray:
    rows = _constraint_rows(q, True, rolling)
    gram = rows @ rows.T
    return np.eye(9) - rows.T @ np.linalg.solve(gram, rows)


def _position_residual(q: np.ndarray) -> np.ndarray:
    u12, u23 = _bond_vectors(q)
    return np.array(
        [
            0.5 * (u12 @ u12 - 1.0),
            0.5 * (u23 @ u23 - 1.0),
            q[0] + q[2] + q[4],
            q[1] + q[3] + q[5],
        ]
    )


def _bond_com_rows(q: np.ndarray) -> np.ndarray:
    return _constraint_rows(q, True, False)


def _project_position(q: np.ndarray) -> np.ndarray:
    """Newton pull-back onto the bond/center manifold (see dynamics_full)."""
    base = _bond_com_rows(q)
    mu = np.zeros(4)
    current = q.copy()
    for _ in range(PROJ_MAXITER):
        res = _position_residual(current)
        if np.max(np.abs(res)) < PROJ_TOL:
            return current
        jac = _bond_com_rows(current) @ base.T
        mu += np.linalg.solve(jac, -res)
        current = q + base.T @ mu
    raise RuntimeError(
        f"position projection stalled (residual {np.max(np.abs(_position_residual(current))):.3e})"
    )


def _bond_deviation(q: np.ndarray) -> float:
    u12, u23 = _bond_vectors(q)
    return max(abs(math.hypot(u12[0], u12[1]) - 1.0), abs(math.hypot(u23[0], u23[1]) - 1.0))


def _soft_force(q: np.ndarray, k_bond: float) -> np.ndarray:
    force = np.zeros(9)
    u12, u23 = _bond_vectors(q)
    for (sl_i, sl_j, u) in (((0, 2), (2, 4), u12), ((2, 4), (4, 6), u23)):
        length = math.hypot(u[0], u[1])
        pull = 2.0 * k_bond * (length - 1.0) / length
        force[sl_i[0]: sl_i[1]] -= pull * u
        force[sl_j[0]: sl_j[1]] += pull * u
    return force


def _frame_slot(t: int, n_warmup: int, stride: int) -> int:
    """Frame index for global step count t (1-based), or -1."""
    if t <= n_warmup or (t - n_warmup) % stride:
        return -1
    return (t - n_warmup) // stride - 1


def langevin_chunk(
    q: np.ndarray,
    p: np.ndarray,
    noise: np.ndarray,
    dt: float,
    mass: float,
    gamma: float,
    sigma: float,
    k_bond: float,
    rolling: int,
    hard: int,
    soft_rows: int,
    step_offset: int,
    n_warmup: int,
    stride: int,
    carry: np.ndarray,
    out_omega: np.ndarray,
    out_omega_acc: np.ndarray,
    out_phi_acc: np.ndarray,
    out_theta: np.ndarray,
) -> None:
    """Advance the Langevin state over one noise chunk (in place).

    carry = [a_prev, b_prev, a_acc, b_acc, max_bond_dev, max_vel_residual].
    """
    sqrt_dt = math.sqrt(dt)
    for i in range(noise.shape[0]):
        q += (dt / mass) * p
        if hard:
            q[:] = _project_position(q)
        p *= 1.0 - (gamma / mass) * dt
        if not hard:
            p += dt * _soft_force(q, k_bond)
        p += (sigma * sqrt_dt) * noise[i]
        if hard:
            rows = _constraint_rows(q, True, bool(rolling))
        elif soft_rows == 2:
            rows = _constraint_rows(q, True, bool(rolling))
        elif soft_rows == 1 and rolling:
            rows = _constraint_rows(q, False, True)
        else:
            rows = _constraint_rows(q, False, False)
        p[:] = _project_vector(rows, p)
        _advance_angles(q, carry)
        slot = _frame_slot(step_offset + i + 1, n_warmup, stride)
        if slot >= 0:
            out_omega[slot] = (carry[2] % TWO_PI) * 0.5
            out_omega_acc[slot] = 0.5 * carry[2]
            out_phi_acc[slot] = carry[3] - 0.5 * math.pi + 0.5 * carry[2]
            out_theta[slot, 0] = q[6]
            out_theta[slot, 1] = q[7]
            out_theta[slot, 2] = q[8]
            carry[4] = max(carry[4], _bond_deviation(q))
            resid = float(np.max(np.abs(rows @ p))) / mass
            carry[5] = max(carry[5], resid)


def cartesian_chunk(
    q: np.ndarray,
    noise: np.ndarray,
    dt: float,
    ito: int,
    rolling: int,
    beta: float,
    gamma: float,
    fd_step: float,
    step_offset: int,
    n_warmup: int,
    stride: int,
    carry: np.ndarray,
    out_omega: np.ndarray,
    out_omega_acc: np.ndarray,
    out_phi_acc: np.ndarray,
    out_theta: np.ndarray,
) -> None:
    """Advance an overdamped Cartesian state over one noise chunk (in place).

    carry = [a_prev, b_prev, a_acc, b_acc, max_bond_dev].  ``ito`` selects
    the general-friction Euler form; otherwise Euler-Heun Stratonovich.
    """
    sqrt_dt = math.sqrt(dt)
    roll = bool(rolling)
    for i in range(noise.shape[0]):
        if ito:
            # drift_k = sum_ij P_ij d_j P_ik: with p_j = P e_j and dP symmetric
            # this is sum_j (d_j P) p_j, so only vector projections are needed
            # at the shifted points.
            base = _projection_matrix(q, roll)
            drift = np.zeros(9)
            for j in range(6):
                shift = np.zeros(9)
                shift[j] = fd_step
                rows_p = _constraint_rows(q + shift, True, roll)
                rows_m = _constraint_rows(q - shift, True, roll)
                drift += (
                    _project_vector(rows_p, base[:, j])
                    - _project_vector(rows_m, base[:, j])
                ) / (2.0 * fd_step)
            drift /= beta * gamma
            kick = math.sqrt(2.0 / (beta * gamma)) * sqrt_dt * (base @ noise[i])
            q[:] = _project_position(q + drift * dt + kick)
        else:
            dw = sqrt_dt * noise[i]
            rows = _constraint_rows(q, True, roll)
            v0 = _project_vector(rows, dw)
            rows1 = _constraint_rows(q + v0, True, roll)
            v1 = _project_vector(rows1, dw)
            q[:] = _project_position(q + 0.5 * (v0 + v1))
        _advance_angles(q, carry)
        slot = _frame_slot(step_offset + i + 1, n_warmup, stride)
        if slot >= 0:
            out_omega[slot] = (carry[2] % TWO_PI) * 0.5
            out_omega_acc[slot] = 0.5 * carry[2]
            out_phi_acc[slot] = carry[3] - 0.5 * math.pi + 0.5 * carry[2]
            out_theta[slot, 0] = q[6]
            out_theta[slot, 1] = q[7]
            out_theta[slot, 2] = q[8]
            carry[4] = max(carry[4], _bond_deviation(q))


def _reduced_rows(omega: float, phi: float, rolling: bool) -> np.ndarray:
    """Closed-form 5x9 diffusion rows (mirrors rolldisc._shape)."""
    s, c = math.sin(omega), math.cos(omega)
    sp, cp = math.sin(phi), math.cos(phi)
    b = np.zeros((5, 9))
    if rolling:
        k2 = 2.0 / 3.0 + 4.0 / 3.0 * c * c
        l2 = 2.0 / 3.0 + 4.0 / 3.0 * s * s
        a1 = 1.0 / math.sqrt(k2 + 8.0)
        a2 = 1.0 / math.sqrt(l2 + 8.0 / 3.0)
        dw0 = np.array([-c, s / 3.0, 0.0, -2.0 * s / 3.0, c, s / 3.0])
        x0 = np.array([-s, -c / 3.0, 0.0, 2.0 * c / 3.0, s, -c / 3.0])
        tw = np.empty(9)
        tp = np.empty(9)
        for d in range(3):
            tw[2 * d] = (cp * dw0[2 * d] - sp * dw0[2 * d + 1]) * a1
            tw[2 * d + 1] = (sp * dw0[2 * d] + cp * dw0[2 * d + 1]) * a1
            px = cp * x0[2 * d] - sp * x0[2 * d + 1]
            py = sp * x0[2 * d] + cp * x0[2 * d + 1]
            tp[2 * d] = -py * a2
            tp[2 * d + 1] = px * a2
        spin_w = (-2.0, 0.0, 2.0)
        spin_p = (2.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0)
        spin_r = (1.0, -1.0, 1.0)
        tr = np.zeros(9)
        tr[6:] = spin_r
        tr /= math.sqrt(3.0)
        for d in range(3):
            tw[6 + d] = spin_w[d] * a1
            tp[6 + d] = spin_p[d] * a2
        b[0] = a1 * tw
        b[1] = a2 * tp
        for d in range(3):
            b[2 + d] = (a1 * spin_w[d]) * tw + (a2 * spin_p[d]) * tp + (spin_r[d] / math.sqrt(3.0)) * tr
    else:
        k2 = 2.0 / 3.0 + 4.0 / 3.0 * c * c
        l2 = 2.0 / 3.0 + 4.0 / 3.0 * s * s
        dw0 = np.array([-c, s / 3.0, 0.0, -2.0 * s / 3.0, c, s / 3.0])
        x0 = np.array([-s, -c / 3.0, 0.0, 2.0 * c / 3.0, s, -c / 3.0])
        for d in range(3):
            b[0, 2 * d] = (cp * dw0[2 * d] - sp * dw0[2 * d + 1]) / k2
            b[0, 2 * d + 1] = (sp * dw0[2 * d] + cp * dw0[2 * d + 1]) / k2
            px = cp * x0[2 * d] - sp * x0[2 * d + 1]
            py = sp * x0[2 * d] + cp * x0[2 * d + 1]
            b[1, 2 * d] = -py / l2
            b[1, 2 * d + 1] = px / l2
        for d in range(3):
            b[2 + d, 6 + d] = 1.0
    return b


def reduced_chunk(
    state: np.ndarray,
    noise: np.ndarray,
    dt: float,
    rolling: int,
    lo: float,
    hi: float,
    step_offset: int,
    n_warmup: int,
    stride: int,
    out_omega: np.ndarray,
    out_phi: np.ndarray,
    out_theta: np.ndarray,
) -> None:
    """Advance the reduced state (5,) over one noise chunk (in place)."""
    sqrt_dt = math.sqrt(dt)
    roll = bool(rolling)
    for i in range(noise.shape[0]):
        dw = sqrt_dt * noise[i]
        b0 = _reduced_rows(state[0], state[1], roll)
        pred = state + b0 @ dw
        b1 = _reduced_rows(pred[0], pred[1], roll)
        state += 0.5 * ((b0 + b1) @ dw)
        omega = state[0]
        while omega < lo or omega > hi:
            omega = 2.0 * lo - omega if omega < lo else 2.0 * hi - omega
        state[0] = omega
        slot = _frame_slot(step_offset + i + 1, n_warmup, stride)
        if slot >= 0:
            out_omega[slot] = state[0]
            out_phi[slot] = state[1]
            out_theta[slot, 0] = state[2]
            out_theta[slot, 1] = state[3]
            out_theta[slot, 2] = state[4]
