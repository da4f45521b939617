"""Throughput comparison of the compiled and pure-python stepping kernels.

Runs each engine (underdamped Langevin, Cartesian Stratonovich, Cartesian
general/Ito, reduced shape coordinates) with both backends and reports
steps per second plus the compiled/python speedup.  The python backend is
25-80x slower, so it gets proportionally fewer steps; pass ``--scale`` to
grow or shrink every run by a common factor.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --scale 4 --backends compiled
"""
from __future__ import annotations

import argparse
import math
import time

from rolldisc import kernels
from rolldisc.dynamics_full import SimParams, default_initial
from rolldisc.dynamics_overdamped import ReducedState, parameterize

# Per-engine baseline step counts, sized so each compiled timing takes a
# fraction of a second and each python timing a few seconds at most.
BASE_STEPS = {
    "langevin": {"compiled": 400_000, "python": 8_000},
    "strat": {"compiled": 300_000, "python": 6_000},
    "ito": {"compiled": 100_000, "python": 2_000},
    "reduced": {"compiled": 800_000, "python": 16_000},
}


def _run(engine: str, backend: str, n_steps: int) -> float:
    """One timed trajectory; returns elapsed wall seconds."""
    stride = max(1, n_steps // 100)
    if engine == "langevin":
        params = SimParams(dt=1e-4, n_steps=n_steps, seed=3, record_stride=stride)
        initial = default_initial()
        started = time.perf_counter()
        kernels.langevin_trajectory(
            initial.q.copy(), initial.p.copy(), params, n_warmup=0, backend=backend
        )
        return time.perf_counter() - started
    if engine in ("strat", "ito"):
        q0 = parameterize(math.pi / 2.0).coords
        started = time.perf_counter()
        kernels.cartesian_trajectory(
            q0.copy(), engine=engine, mode="roll", dt=2e-3, n_steps=n_steps,
            seed=3, record_stride=stride, n_warmup=0, backend=backend,
        )
        return time.perf_counter() - started
    if engine == "reduced":
        state = ReducedState(math.pi / 2.0, 0.0, [0.0, 0.0, 0.0])
        started = time.perf_counter()
        kernels.reduced_trajectory(
            state.as_array(), mode="roll", dt=1e-3, n_steps=n_steps,
            seed=3, record_stride=stride, n_warmup=0, backend=backend,
        )
        return time.perf_counter() - started
    raise ValueError(f"unknown engine {engine!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scale", type=float, default=1.0,
                        help="multiply every step count by this factor")
    parser.add_argument("--backends", nargs="+", default=None,
                        choices=("compiled", "python"),
                        help="subset of backends to time (default: all available)")
    args = parser.parse_args(argv)

    backends = args.backends
    if backends is None:
        backends = ["python"]
        if kernels.active_backend() == "compiled":
            backends.insert(0, "compiled")
    print(f"default backend: {kernels.active_backend()}")
    print(f"{'engine':<10} {'backend':<9} {'steps':>9} {'seconds':>8} {'steps/s':>12}")

    for engine in ("langevin", "strat", "ito", "reduced"):
        rates = {}
        for backend in backends:
            n_steps = max(1000, int(BASE_STEPS[engine][backend] * args.scale))
            try:
                elapsed = _run(engine, backend, n_steps)
            except RuntimeError as exc:  # requested backend not importable
                print(f"{engine:<10} {backend:<9} {exc}")
                continue
            rates[backend] = n_steps / elapsed
            print(f"{engine:<10} {backend:<9} {n_steps:>9} {elapsed:>8.2f} "
                  f"{rates[backend]:>12.0f}")
        if "compiled" in rates and "python" in rates:
            print(f"{engine:<10} speedup   {rates['compiled'] / rates['python']:>30.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
