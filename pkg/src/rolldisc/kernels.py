"""Kernel backend dispatch and trajectory drivers.

Two interchangeable backends implement the chunked step loops:

* ``rolldisc._kernels``     -- Cython extension (default when importable),
* ``rolldisc._kernels_py``  -- pure python/numpy mirror.

Selection happens at import time; set ``ROLLDISC_BACKEND=python`` or
``=compiled`` to force one (forcing an unavailable backend raises).  Both
backends consume the same Philox noise stream in the same order: the
drivers below draw standard normals in fixed-size chunks and pass them in,
so trajectories are reproducible bit-for-bit given (seed, backend) and
agree between backends to floating-point roundoff.

``ROLLDISC_THREADS`` caps how many independent trajectories the runner may
dispatch in parallel (surfaced via :func:`thread_count`); the step loops
themselves are strictly sequential, a trajectory being a serial recursion.
"""
from __future__ import annotations

import math
import os
from typing import Optional

import numpy as np

from . import _kernels_py

try:  # pragma: no cover - exercised implicitly by backend tests
    from . import _kernels  # type: ignore[attr-defined]

    _COMPILED = _kernels
except ImportError:  # pragma: no cover
    _COMPILED = None

CHUNK_STEPS = 4096

_FORCED = os.environ.get("ROLLDISC_BACKEND")
if _FORCED not in (None, "", "compiled", "python"):
    raise RuntimeError(
        f"ROLLDISC_BACKEND must be 'compiled' or 'python', got {_FORCED!r}"
    )
if _FORCED == "compiled" and _COMPILED is None:
    raise RuntimeError("ROLLDISC_BACKEND=compiled but the extension is not importable")


def thread_count() -> int:
    """Cap on parallel trajectories: ROLLDISC_THREADS, default machine parallelism.

    A single trajectory always runs on one core; the cap governs how many
    independent seeds the command-line runner may dispatch concurrently.
    """
    raw = os.environ.get("ROLLDISC_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise RuntimeError(f"ROLLDISC_THREADS must be an integer, got {raw!r}") from exc
    return max(1, value)


def active_backend() -> str:
    """Name of the backend used by default: 'compiled' or 'python'."""
    if _FORCED == "python":
        return "python"
    return "compiled" if _COMPILED is not None else "python"


def _module(backend: Optional[str]):
    name = backend or active_backend()
    if name == "python":
        return _kernels_py, "python"
    if name == "compiled":
        if _COMPILED is None:
            raise RuntimeError("compiled backend requested but not importable")
        return _COMPILED, "compiled"
    raise ValueError(f"unknown backend {name!r}")


def _frame_times(n_steps: int, n_warmup: int, stride: int, dt: float):
    n_frames = max(0, (n_steps - n_warmup) // stride)
    ks = np.arange(1, n_frames + 1)
    return n_frames, (n_warmup + ks * stride) * dt


def langevin_trajectory(
    q: np.ndarray,
    p: np.ndarray,
    params,
    n_warmup: int,
    backend: Optional[str] = None,
) -> dict:
    """Drive the Langevin kernel over the full run (see dynamics_full)."""
    mod, name = _module(backend)
    n_steps = params.n_steps
    stride = params.record_stride
    n_frames, times = _frame_times(n_steps, n_warmup, stride, params.dt)
    out_omega = np.empty(n_frames)
    out_omega_acc = np.empty(n_frames)
    out_phi_acc = np.empty(n_frames)
    out_theta = np.empty((n_frames, 3))
    carry = _kernels_py.init_angle_carry(q, 2)
    soft_rows = {"com": 0, "rolling_com": 1, "full": 2}[params.soft_projection]
    rng = np.random.Generator(np.random.Philox(params.seed))
    done = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        noise = rng.standard_normal((todo, 9))
        mod.langevin_chunk(
            q, p, noise,
            params.dt, params.mass, params.gamma, params.sigma, params.k_bond,
            int(params.constraint_mode == "roll"),
            int(params.bond_mode == "hard"),
            soft_rows,
            done, n_warmup, stride,
            carry, out_omega, out_omega_acc, out_phi_acc, out_theta,
        )
        done += todo
    return {
        "times": times,
        "omega": out_omega,
        "omega_acc": out_omega_acc,
        "phi_acc": out_phi_acc,
        "theta": out_theta,
        "final_q": q,
        "final_p": p,
        "max_bond_dev": float(carry[4]),
        "max_velocity_residual": float(carry[5]),
        "backend": name,
    }


def cartesian_trajectory(
    q: np.ndarray,
    engine: str,
    mode: str,
    dt: float,
    n_steps: int,
    seed: int,
    record_stride: int,
    n_warmup: int,
    beta: float = 2.0,
    gamma: float = 1.0,
    fd_step: float = 1e-6,
    backend: Optional[str] = None,
) -> dict:
    """Drive the overdamped Cartesian kernel (engine 'strat' or 'ito')."""
    mod, name = _module(backend)
    n_frames, times = _frame_times(n_steps, n_warmup, record_stride, dt)
    out_omega = np.empty(n_frames)
    out_omega_acc = np.empty(n_frames)
    out_phi_acc = np.empty(n_frames)
    out_theta = np.empty((n_frames, 3))
    carry = _kernels_py.init_angle_carry(q, 1)
    rng = np.random.Generator(np.random.Philox(seed))
    done = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        noise = rng.standard_normal((todo, 9))
        mod.cartesian_chunk(
            q, noise, dt,
            int(engine == "ito"), int(mode == "roll"),
            beta, gamma, fd_step,
            done, n_warmup, record_stride,
            carry, out_omega, out_omega_acc, out_phi_acc, out_theta,
        )
        done += todo
    return {
        "times": times,
        "omega": out_omega,
        "omega_acc": out_omega_acc,
        "phi_acc": out_phi_acc,
        "theta": out_theta,
        "final_q": q,
        "max_bond_dev": float(carry[4]),
        "backend": name,
    }


def reduced_trajectory(
    state: np.ndarray,
    mode: str,
    dt: float,
    n_steps: int,
    seed: int,
    record_stride: int,
    n_warmup: int,
    domain=(0.0, math.pi),
    backend: Optional[str] = None,
) -> dict:
    """Drive the reduced-coordinate kernel."""
    mod, name = _module(backend)
    n_frames, times = _frame_times(n_steps, n_warmup, record_stride, dt)
    out_omega = np.empty(n_frames)
    out_phi = np.empty(n_frames)
    out_theta = np.empty((n_frames, 3))
    rng = np.random.Generator(np.random.Philox(seed))
    state = np.asarray(state, dtype=float).copy()
    done = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        noise = rng.standard_normal((todo, 9))
        mod.reduced_chunk(
            state, noise, dt,
            int(mode == "roll"), float(domain[0]), float(domain[1]),
            done, n_warmup, record_stride,
            out_omega, out_phi, out_theta,
        )
        done += todo
    return {
        "times": times,
        "omega": out_omega,
        "phi": out_phi,
        "theta": out_theta,
        "final": state,
        "backend": name,
    }
