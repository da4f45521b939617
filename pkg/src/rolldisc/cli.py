"""Command-line experiment runner and report emitter.

Subcommands
-----------

``simulate``
    Run one engine (``langevin``, ``overdamped`` or ``reduced``) from a seed
    and write ``trajectory.csv``, ``histogram.csv``, ``report.json`` and
    optionally ``density.svg`` into the output directory.  Multiple seeds
    may be dispatched in parallel (capped by ``ROLLDISC_THREADS``), each
    writing into its own subdirectory.

``verify``
    Run the named invariant suite (or ``all``) on fixed grids, print one
    line per check, write ``report.json``, and exit 0 iff every check holds.

``density-table``
    Tabulate the four normalized equilibrium shape densities on a grid.

``tail-sweep``
    Quadrature tail probabilities of the opening angle for every density
    kind, domain and angle interpretation, with match flags against the
    reference values 0.48/0.45.

Options may also be supplied through a flat ``key = value`` config file
(``--config FILE``); keys are the long option names and explicit flags
override the file.  All artifacts are written deterministically: identical
inputs produce byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import multiprocessing
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analytics, kernels, stats
from .model import ConstraintSet, assemble
from .dynamics_full import SimParams, run_langevin
from .dynamics_overdamped import parameterize, run_cartesian, run_reduced

SCHEMA_VERSION = 1

# Reference tail values the sweep is compared against (see tail-sweep):
# rolling clusters open past 2.2 with probability ~0.48, sliding ~0.45.
REFERENCE_TAIL_ROLL = 0.48
REFERENCE_TAIL_SLIDE = 0.45
REFERENCE_TAIL_TOL = 0.01

_OUTPUT_KINDS = ("trajectory", "histogram", "report", "svg")


class CliError(Exception):
    """Invalid invocation or configuration; exits with status 2."""


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    """Full-precision decimal text (17 significant digits)."""
    return format(float(value), ".17g")


def _jsonify(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(_jsonify(payload), indent=2, sort_keys=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text + "\n")


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# config file
# ---------------------------------------------------------------------------

def _load_config(path: str) -> List[Tuple[str, str]]:
    """Parse a flat ``key = value`` file into ordered (key, value) pairs."""
    pairs: List[Tuple[str, str]] = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, value = text.split("=", 1)
        key = key.strip().replace("_", "-")
        value = value.strip()
        if not key or not value:
            raise CliError(f"{path}:{lineno}: empty key or value")
        pairs.append((key, value))
    return pairs


def _expand_config(argv: List[str]) -> List[str]:
    """Splice config-file options (as flags) right after the subcommand.

    Explicit command-line flags come later in the argument list and
    therefore override the file values.
    """
    args = list(argv)
    path: Optional[str] = None
    for i, token in enumerate(args):
        if token == "--config":
            if i + 1 >= len(args):
                raise CliError("--config requires a file path")
            path = args[i + 1]
            del args[i:i + 2]
            break
        if token.startswith("--config="):
            path = token.split("=", 1)[1]
            del args[i]
            break
    if path is None:
        return args
    if not args or args[0].startswith("-"):
        raise CliError("--config requires a subcommand")
    flags: List[str] = []
    for key, value in _load_config(path):
        flags.extend(["--" + key, value])
    return [args[0]] + flags + args[1:]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _parse_seeds(args) -> List[int]:
    if args.seeds:
        try:
            seeds = [int(tok) for tok in args.seeds.replace(",", " ").split()]
        except ValueError as exc:
            raise CliError(f"--seeds must be a comma-separated integer list: {exc}") from exc
        if not seeds:
            raise CliError("--seeds is empty")
        if len(set(seeds)) != len(seeds):
            raise CliError("--seeds contains duplicates")
        return seeds
    return [args.seed]


def _resolve_steps(args) -> Tuple[int, float]:
    if args.steps is None and args.tmax is None:
        raise CliError("one of --steps or --tmax is required")
    if args.steps is not None and args.tmax is not None:
        raise CliError("--steps and --tmax are mutually exclusive")
    if args.steps is not None:
        n_steps = int(args.steps)
    else:
        n_steps = int(round(args.tmax / args.dt))
    if n_steps < 1:
        raise CliError("the run must contain at least one step")
    return n_steps, n_steps * args.dt


def _build_spec(args) -> dict:
    """Validate simulate options into a plain picklable experiment spec."""
    if args.dt is None or args.dt <= 0.0:
        raise CliError("--dt must be a positive number")
    if args.engine == "reduced" and args.bonds == "soft":
        raise CliError("engine=reduced forbids soft bonds "
                       "(reduced coordinates presuppose hard bonds)")
    if args.engine == "overdamped" and args.bonds == "soft":
        raise CliError("the overdamped Cartesian engine is projection-based "
                       "and supports hard bonds only")
    if args.bins < 2:
        raise CliError("--bins must be at least 2")
    outputs = []
    for token in args.outputs.replace(",", " ").split():
        if token == "all":
            outputs = list(_OUTPUT_KINDS)
            break
        if token not in _OUTPUT_KINDS:
            raise CliError(f"unknown output kind {token!r}; "
                           f"choose from {', '.join(_OUTPUT_KINDS)} or 'all'")
        if token not in outputs:
            outputs.append(token)
    if "report" not in outputs:
        outputs.append("report")
    n_steps, t_total = _resolve_steps(args)
    density_kind = f"{args.mode}_{'vibr' if args.bonds == 'soft' else 'hard'}"
    spec = {
        "engine": args.engine,
        "constraint_mode": args.mode,
        "bond_mode": args.bonds,
        "dt": float(args.dt),
        "n_steps": n_steps,
        "t_total": t_total,
        "record_stride": int(args.record_stride),
        "warmup_fraction": float(args.warmup_fraction),
        "bins": int(args.bins),
        "outputs": outputs,
        "density_kind": density_kind,
        "tail_threshold": float(args.tail_threshold),
        "backend": args.backend,
    }
    if args.bonds == "soft":
        spec["spring_k"] = float(args.spring_k)
    if args.engine == "langevin":
        spec.update(mass=float(args.mass), gamma=float(args.gamma), sigma=float(args.sigma))
    elif args.engine == "overdamped":
        spec.update(scheme=args.scheme, beta=float(args.beta), gamma=float(args.gamma))
    else:
        spec.update(beta=2.0)
    return spec


def _run_engine(spec: dict, seed: int):
    """Dispatch to the requested engine; returns
    (times, omega, (q1, q2), phi, theta, checks, diagnostics, backend)."""
    engine = spec["engine"]
    if engine == "langevin":
        params = SimParams(
            dt=spec["dt"],
            n_steps=spec["n_steps"],
            mass=spec["mass"],
            gamma=spec["gamma"],
            sigma=spec["sigma"],
            seed=seed,
            constraint_mode=spec["constraint_mode"],
            bond_mode=spec["bond_mode"],
            k_bond=spec.get("spring_k", 1e4),
            record_stride=spec["record_stride"],
        )
        res = run_langevin(params, warmup_fraction=spec["warmup_fraction"],
                           backend=spec["backend"])
        q1, q2 = analytics.conserved_quantities(res.omega_acc, res.phi_acc, res.theta)
        bond_bound = params.contact_tol_effective if spec["bond_mode"] == "soft" else 1e-6
        checks = [
            _check("bond_deviation", res.max_bond_dev, bond_bound),
            _check("velocity_residual", res.max_velocity_residual, 1e-9),
        ]
        diagnostics = {
            "max_bond_deviation": res.max_bond_dev,
            "max_velocity_residual": res.max_velocity_residual,
            "n_warmup_steps": res.n_warmup,
        }
        return res.times, res.omega, (q1, q2), res.phi_acc, res.theta, checks, diagnostics, res.backend
    if engine == "overdamped":
        res = run_cartesian(
            spec["scheme"],
            spec["constraint_mode"],
            dt=spec["dt"],
            n_steps=spec["n_steps"],
            seed=seed,
            record_stride=spec["record_stride"],
            beta=spec["beta"],
            gamma=spec["gamma"],
            warmup_fraction=spec["warmup_fraction"],
            backend=spec["backend"],
        )
        q1, q2 = analytics.conserved_quantities(res.omega_acc, res.phi_acc, res.theta)
        checks = [_check("bond_deviation", res.max_bond_dev, 1e-6)]
        diagnostics = {"max_bond_deviation": res.max_bond_dev}
        return res.times, res.omega, (q1, q2), res.phi_acc, res.theta, checks, diagnostics, res.backend
    if engine == "reduced":
        res = run_reduced(
            spec["constraint_mode"],
            dt=spec["dt"],
            n_steps=spec["n_steps"],
            seed=seed,
            record_stride=spec["record_stride"],
            warmup_fraction=spec["warmup_fraction"],
            backend=spec["backend"],
        )
        q1, q2 = analytics.conserved_quantities(res.omega, res.phi, res.theta)
        excess = max(0.0, float(np.max(res.omega)) - math.pi, -float(np.min(res.omega)))
        checks = [_check("omega_in_domain", excess, 0.0, strict=False)]
        diagnostics = {}
        return res.times, res.omega, (q1, q2), res.phi, res.theta, checks, diagnostics, res.backend
    raise CliError(f"unknown engine {engine!r}")


def _check(name: str, value: float, bound: float, strict: bool = True) -> dict:
    passed = value < bound if strict else value <= bound
    return {"name": name, "value": float(value), "bound": float(bound),
            "passed": bool(passed)}


def _simulate_one(spec: dict, seed: int, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    times, omega, (q1, q2), phi, theta, checks, diagnostics, backend = _run_engine(spec, seed)

    if "trajectory" in spec["outputs"]:
        rows = zip(times, omega, phi, theta[:, 0], theta[:, 1], theta[:, 2], q1, q2)
        _write_csv(os.path.join(out_dir, "trajectory.csv"),
                   ["t", "omega", "phi", "theta1", "theta2", "theta3", "Q1", "Q2"],
                   rows)

    model = analytics.DensityModel(spec["density_kind"])
    threshold = spec["tail_threshold"]
    hist = stats.make_histogram(omega, model, bins=spec["bins"],
                                tail_thresholds=(threshold,))
    if "histogram" in spec["outputs"]:
        _write_csv(os.path.join(out_dir, "histogram.csv"),
                   ["bin_center", "empirical_density", "model_density"],
                   zip(hist.centers, hist.empirical_density, hist.model_density))
    if "svg" in spec["outputs"]:
        _write_density_svg(os.path.join(out_dir, "density.svg"), hist, model)

    ks = stats.ks_distance(omega, model)
    results = {
        "n_frames": int(omega.size),
        "ks": {
            "statistic": float(ks.statistic),
            "p_value": float(ks.p_value),
            "n_samples": int(ks.n_samples),
            "model": spec["density_kind"],
        },
        "tails": {
            "empirical": {repr(threshold): hist.tail_estimates[threshold]},
            "model": {repr(threshold): analytics.tail_probability(
                spec["density_kind"], threshold, "full", "omega")},
        },
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "diagnostics": diagnostics,
    }
    if spec["constraint_mode"] == "roll":
        results["conserved"] = {
            "q1_drift": float(np.max(np.abs(q1 - q1[0]))),
            "q2_drift": float(np.max(np.abs(q2 - q2[0]))),
        }
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "spec": {k: v for k, v in spec.items() if k != "backend"},
        "seed": seed,
        "rng": {
            "bit_generator": "Philox",
            "seed": seed,
            "numpy_version": np.__version__,
        },
        "backend": backend,
        "results": results,
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    return {
        "seed": seed,
        "out_dir": out_dir,
        "ks": float(ks.statistic),
        "passed": results["passed"],
        "backend": backend,
    }


def _simulate_worker(payload) -> dict:
    spec, seed, out_dir = payload
    return _simulate_one(spec, seed, out_dir)


def _cmd_simulate(args) -> int:
    spec = _build_spec(args)
    seeds = _parse_seeds(args)
    jobs = []
    for seed in seeds:
        sub = args.out if len(seeds) == 1 else os.path.join(args.out, f"seed-{seed}")
        jobs.append((spec, seed, sub))
    cap = kernels.thread_count()
    if len(jobs) > 1 and cap > 1:
        workers = min(cap, len(jobs))
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            summaries = pool.map(_simulate_worker, jobs)
    else:
        summaries = [_simulate_worker(job) for job in jobs]
    ok = True
    for summary in summaries:
        ok = ok and summary["passed"]
        status = "ok" if summary["passed"] else "CHECK-FAILED"
        print(f"seed={summary['seed']} engine={spec['engine']} "
              f"mode={spec['constraint_mode']} bonds={spec['bond_mode']} "
              f"KS={summary['ks']:.4f} backend={summary['backend']} "
              f"[{status}] -> {summary['out_dir']}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# density.svg (self-contained, no external renderer)
# ---------------------------------------------------------------------------

def _write_density_svg(path: str, hist: stats.HistogramReport,
                       model: analytics.DensityModel) -> None:
    width, height = 720.0, 480.0
    left, right, top, bottom = 70.0, 20.0, 42.0, 58.0
    plot_w, plot_h = width - left - right, height - top - bottom
    lo, hi = model.domain
    grid = np.linspace(lo, hi, 401)
    curve = np.asarray(model.pdf(grid))
    y_max = 1.08 * max(float(curve.max()), float(hist.empirical_density.max()), 1e-12)

    def sx(x: float) -> float:
        return left + (x - lo) / (hi - lo) * plot_w

    def sy(y: float) -> float:
        return top + plot_h - min(y, y_max) / y_max * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">{hist.kind} shape density '
        f'(n={hist.n_samples}, KS={hist.ks_statistic:.4f})</text>',
    ]
    points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(grid, curve))
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f5c99" '
                 f'stroke-width="1.8"/>')
    for x, y in zip(hist.centers, hist.empirical_density):
        parts.append(f'<circle cx="{sx(float(x)):.2f}" cy="{sy(float(y)):.2f}" '
                     f'r="3.2" fill="none" stroke="#c03a2b" stroke-width="1.4"/>')
    axis = (f'<path d="M {left:.1f} {top:.1f} L {left:.1f} {top + plot_h:.1f} '
            f'L {left + plot_w:.1f} {top + plot_h:.1f}" fill="none" '
            f'stroke="black" stroke-width="1"/>')
    parts.append(axis)
    for frac, label in ((0.0, "0"), (0.25, "π/4"), (0.5, "π/2"),
                        (0.75, "3π/4"), (1.0, "π")):
        x = sx(lo + frac * (hi - lo))
        y0 = top + plot_h
        parts.append(f'<line x1="{x:.2f}" y1="{y0:.1f}" x2="{x:.2f}" '
                     f'y2="{y0 + 6:.1f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 22:.1f}" font-family="sans-serif" '
                     f'font-size="13" text-anchor="middle">{label}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = frac * y_max
        y = sy(yv)
        parts.append(f'<line x1="{left - 6:.1f}" y1="{y:.2f}" x2="{left:.1f}" '
                     f'y2="{y:.2f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{left - 10:.1f}" y="{y + 4:.2f}" '
                     f'font-family="sans-serif" font-size="13" '
                     f'text-anchor="end">{yv:.2f}</text>')
    parts.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 14:.1f}" '
                 f'font-family="sans-serif" font-size="14" '
                 f'text-anchor="middle">shape angle ω</text>')
    parts.append(f'<text x="20" y="{top + plot_h / 2:.1f}" font-family="sans-serif" '
                 f'font-size="14" text-anchor="middle" '
                 f'transform="rotate(-90 20 {top + plot_h / 2:.1f})">'
                 f'probability density</text>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _suite_projections() -> List[dict]:
    omegas = np.linspace(0.05, math.pi - 0.05, 50)
    checks = []
    for rolling, label, trace in ((True, "roll", 3.0), (False, "slide", 5.0)):
        constraints = ConstraintSet(rolling=rolling)
        worst_idem = worst_sym = worst_ann = worst_tr = 0.0
        for k, w in enumerate(omegas):
            cfg = parameterize(float(w), 0.37 * k)
            bundle = assemble(cfg, constraints)
            p = bundle.P
            worst_idem = max(worst_idem, float(np.max(np.abs(p @ p - p))))
            worst_sym = max(worst_sym, float(np.max(np.abs(p - p.T))))
            worst_ann = max(worst_ann, float(np.max(np.abs(bundle.C @ p))))
            worst_tr = max(worst_tr, abs(float(np.trace(p)) - trace))
        checks.append(_check(f"idempotent_{label}", worst_idem, 1e-12))
        checks.append(_check(f"symmetric_{label}", worst_sym, 1e-12))
        checks.append(_check(f"annihilates_rows_{label}", worst_ann, 1e-12))
        checks.append(_check(f"trace_{label}", worst_tr, 1e-12))
    return checks


def _suite_fokker_planck() -> List[dict]:
    grid = np.linspace(1e-3, math.pi - 1e-3, 1000)
    scale = float(np.max(analytics.density_unnormalized("roll_hard", grid)))
    resid = np.asarray(analytics.fp_residual("roll_hard", grid))
    flux = np.asarray(analytics.fp_flux("roll_hard", grid))
    const = np.asarray(analytics.fp_residual(lambda w: 1.0, grid))
    return [
        _check("stationary_residual_rel", float(np.max(np.abs(resid))) / scale, 1e-10),
        _check("stationary_flux_rel", float(np.max(np.abs(flux))) / scale, 1e-10),
        {"name": "constant_density_detected",
         "value": float(np.max(np.abs(const))),
         "bound": 1e-3,
         "passed": bool(np.max(np.abs(const)) > 1e-3)},
    ]


def _suite_geometry() -> List[dict]:
    products = analytics.GeometryTables().orthogonality_products()
    worst_mis = 0.0
    for w in np.linspace(0.15, math.pi - 0.15, 20):
        for p in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
            report = analytics.tangent_map_check(float(w), float(p))
            worst_mis = max(worst_mis, report.max_misalignment)
    worst_overlap = 0.0
    for w in np.linspace(0.05, math.pi - 0.05, 50):
        k_sq = 2.0 / 3.0 + 4.0 / 3.0 * math.cos(w) ** 2
        l_sq = 2.0 / 3.0 + 4.0 / 3.0 * math.sin(w) ** 2
        expected = 1.0 / math.sqrt((k_sq + 8.0) * (l_sq + 8.0 / 3.0))
        worst_overlap = max(
            worst_overlap, abs(analytics.subspace_overlap(float(w), "roll") - expected))
    return [
        _check("normal_tangent_products", float(np.max(np.abs(products))), 0.0,
               strict=False),
        _check("tangent_map_alignment", worst_mis, 1e-10),
        _check("subspace_overlap_form", worst_overlap, 1e-10),
    ]


def _suite_covariance() -> List[dict]:
    rng = np.random.Generator(np.random.Philox(2024))
    constraints = ConstraintSet(rolling=True)
    worst = 0.0
    for w in (0.7, math.pi / 2.0, 2.2):
        bundle = assemble(parameterize(w), constraints)
        cov = stats.velocity_covariance_oracle(bundle.P, 1.0, 1_000_000, rng)
        worst = max(worst, float(np.max(np.abs(cov - bundle.P))))
    return [_check("velocity_covariance_dev", worst, 5e-3)]


def _suite_densities() -> List[dict]:
    checks = []
    dev_roll = max(
        abs(analytics.density_unnormalized("roll_hard", 0.0) - math.sqrt(75.0)),
        abs(analytics.density_unnormalized("roll_hard", math.pi / 2.0) - math.sqrt(91.0)),
    )
    checks.append(_check("roll_hard_endpoints", dev_roll, 1e-12))
    checks.append(_check("fixman_quarter_pi",
                         abs(analytics.fixman_factor(math.pi / 4.0) - 0.5), 1e-10))
    grid = np.linspace(0.0, math.pi, 20001)
    worst_norm = 0.0
    for kind in analytics.DENSITY_KINDS:
        model = analytics.DensityModel(kind)
        worst_norm = max(worst_norm,
                         abs(float(np.trapezoid(model.pdf(grid), grid)) - 1.0))
    checks.append(_check("pdf_normalization", worst_norm, 1e-6))
    model = analytics.DensityModel("roll_hard")
    worst_ppf = max(abs(model.cdf(model.ppf(float(q))) - q)
                    for q in np.linspace(0.001, 0.999, 21))
    checks.append(_check("cdf_ppf_roundtrip", worst_ppf, 1e-9))
    flat = analytics.DensityModel("slide_vibr")
    dev_flat = float(np.max(np.abs(flat.pdf(grid) - 1.0 / math.pi)))
    checks.append(_check("slide_vibr_uniform", dev_flat, 1e-12))
    return checks


_SUITES = {
    "projections": _suite_projections,
    "fokker_planck": _suite_fokker_planck,
    "geometry": _suite_geometry,
    "covariance": _suite_covariance,
    "densities": _suite_densities,
}


def _cmd_verify(args) -> int:
    names = list(_SUITES) if args.suite == "all" else [args.suite]
    suites = {}
    all_passed = True
    for name in names:
        checks = _SUITES[name]()
        passed = all(c["passed"] for c in checks)
        all_passed = all_passed and passed
        suites[name] = {"passed": passed, "checks": checks}
        for c in checks:
            flag = "PASS" if c["passed"] else "FAIL"
            print(f"[{flag}] {name}.{c['name']}: value={c['value']:.3e} "
                  f"bound={c['bound']:.3e}")
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "suite": args.suite,
        "suites": suites,
        "passed": all_passed,
    }
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "report.json"), report)
    print(("all checks passed" if all_passed else "some checks FAILED")
          + f" -> {os.path.join(args.out, 'report.json')}")
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# density-table / tail-sweep
# ---------------------------------------------------------------------------

def _cmd_density_table(args) -> int:
    if args.points < 2:
        raise CliError("--points must be at least 2")
    domain = analytics.FULL_DOMAIN if args.domain == "full" else analytics.NO_OVERLAP_DOMAIN
    grid = np.linspace(domain[0], domain[1], args.points)
    columns = [grid]
    for kind in ("slide_hard", "roll_hard", "slide_vibr", "roll_vibr"):
        columns.append(np.asarray(analytics.DensityModel(kind, domain).pdf(grid)))
    rows = zip(*columns)
    header = ["omega", "slide_hard", "roll_hard", "slide_vibr", "roll_vibr"]
    if args.out == "-":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    else:
        parent = os.path.dirname(args.out)
        if parent:
            os.makedirs(parent, exist_ok=True)
        _write_csv(args.out, header, rows)
        print(f"wrote {args.points} rows -> {args.out}")
    return 0


def _cmd_tail_sweep(args) -> int:
    rows = analytics.tail_sweep(args.threshold)
    for row in rows:
        row["matches_reference_slide"] = bool(
            abs(row["probability"] - REFERENCE_TAIL_SLIDE) <= REFERENCE_TAIL_TOL)
        row["matches_reference_roll"] = bool(
            abs(row["probability"] - REFERENCE_TAIL_ROLL) <= REFERENCE_TAIL_TOL)
    pairs = []
    by_key = {(r["kind"], r["domain"], r["angle_variable"]): r for r in rows}
    for treatment in ("hard", "vibr"):
        for domain in ("full", "no_overlap"):
            for variable in ("omega", "two_omega", "internal"):
                slide = by_key[(f"slide_{treatment}", domain, variable)]
                roll = by_key[(f"roll_{treatment}", domain, variable)]
                if (slide["matches_reference_slide"]
                        and roll["matches_reference_roll"]):
                    pairs.append({
                        "treatment": treatment,
                        "domain": domain,
                        "angle_variable": variable,
                        "slide_probability": slide["probability"],
                        "roll_probability": roll["probability"],
                    })
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "tail_sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "domain", "angle_variable", "threshold",
                         "probability", "matches_reference_slide",
                         "matches_reference_roll"])
        for row in rows:
            writer.writerow([
                row["kind"], row["domain"], row["angle_variable"],
                _fmt(row["threshold"]), _fmt(row["probability"]),
                str(row["matches_reference_slide"]).lower(),
                str(row["matches_reference_roll"]).lower(),
            ])
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "tail-sweep",
        "threshold": float(args.threshold),
        "reference": {"slide": REFERENCE_TAIL_SLIDE, "roll": REFERENCE_TAIL_ROLL,
                      "tolerance": REFERENCE_TAIL_TOL},
        "rows": rows,
        "matching_pairs": pairs,
        "any_pair_matches": bool(pairs),
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    for row in rows:
        print(f"{row['kind']:<11} {row['domain']:<10} {row['angle_variable']:<9} "
              f"P(angle > {args.threshold:g}) = {row['probability']:.4f}")
    if pairs:
        for pair in pairs:
            print(f"match: {pair['treatment']} densities, domain={pair['domain']}, "
                  f"angle={pair['angle_variable']} -> "
                  f"{pair['slide_probability']:.4f}/{pair['roll_probability']:.4f} "
                  f"vs reference {REFERENCE_TAIL_SLIDE:.2f}/{REFERENCE_TAIL_ROLL:.2f}")
    else:
        print(f"no (slide, roll) pair matches "
              f"{REFERENCE_TAIL_SLIDE:.2f}/{REFERENCE_TAIL_ROLL:.2f} "
              f"within ±{REFERENCE_TAIL_TOL:.2f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rolldisc",
        description="Constrained stochastic dynamics of a trimer of rolling "
                    "or sliding discs: simulations, verification suites and "
                    "density tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a trajectory and write artifacts")
    sim.add_argument("--engine", choices=("langevin", "overdamped", "reduced"),
                     required=True)
    sim.add_argument("--mode", choices=("slide", "roll"), required=True,
                     help="constraint mode")
    sim.add_argument("--bonds", choices=("hard", "soft"), default="hard")
    sim.add_argument("--spring-k", type=float, default=1e4,
                     help="bond spring constant for --bonds soft")
    sim.add_argument("--scheme", choices=("strat", "ito"), default="strat",
                     help="overdamped Cartesian discretization")
    sim.add_argument("--dt", type=float, required=True, help="time step")
    sim.add_argument("--tmax", type=float, default=None,
                     help="total simulated time (alternative to --steps)")
    sim.add_argument("--steps", type=int, default=None, help="number of steps")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--seeds", type=str, default=None,
                     help="comma-separated seed list; runs one experiment per "
                          "seed (parallel up to ROLLDISC_THREADS), each in "
                          "OUT/seed-<n>/")
    sim.add_argument("--mass", type=float, default=0.1,
                     help="disc mass (langevin)")
    sim.add_argument("--gamma", type=float, default=1.0, help="friction")
    sim.add_argument("--sigma", type=float, default=1.0,
                     help="noise amplitude (langevin)")
    sim.add_argument("--beta", type=float, default=2.0,
                     help="inverse temperature (overdamped)")
    sim.add_argument("--record-stride", type=int, default=100)
    sim.add_argument("--warmup-fraction", type=float, default=0.01)
    sim.add_argument("--bins", type=int, default=60, help="histogram bins")
    sim.add_argument("--tail-threshold", type=float, default=2.2)
    sim.add_argument("--outputs", type=str,
                     default="trajectory,histogram,report",
                     help="comma list from: trajectory, histogram, report, "
                          "svg, all")
    sim.add_argument("--backend", choices=("compiled", "python"), default=None)
    sim.add_argument("--out", type=str, default="out", help="output directory")
    sim.add_argument("--config", type=str, default=None,
                     help="flat key = value config file; flags override it")
    sim.set_defaults(func=_cmd_simulate)

    ver = sub.add_parser("verify", help="run invariant suites on fixed grids")
    ver.add_argument("--suite",
                     choices=tuple(_SUITES) + ("all",), default="all")
    ver.add_argument("--out", type=str, default="out")
    ver.add_argument("--config", type=str, default=None)
    ver.set_defaults(func=_cmd_verify)

    tab = sub.add_parser("density-table",
                         help="tabulate the normalized shape densities")
    tab.add_argument("--points", type=int, default=1001)
    tab.add_argument("--domain", choices=("full", "no_overlap"), default="full")
    tab.add_argument("--out", type=str, default="-",
                     help="CSV file path, or - for stdout")
    tab.add_argument("--config", type=str, default=None)
    tab.set_defaults(func=_cmd_density_table)

    tail = sub.add_parser("tail-sweep",
                          help="tail probabilities for every density kind, "
                               "domain and angle interpretation")
    tail.add_argument("--threshold", type=float, default=2.2)
    tail.add_argument("--out", type=str, default="out")
    tail.add_argument("--config", type=str, default=None)
    tail.set_defaults(func=_cmd_tail_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": {"type": "usage", "message": str(exc)}}),
              file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
