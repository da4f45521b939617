"""Tests for the overdamped Cartesian and reduced-coordinate steppers."""
from __future__ import annotations

import math

import numpy as np
import pytest

from rolldisc import dynamics_overdamped as od
from rolldisc import model


def _k_sq(omega: float) -> float:
    return (2.0 / 3.0) * (1.0 + 2.0 * math.cos(omega) ** 2)


def _l_sq(omega: float) -> float:
    return (2.0 / 3.0) * (1.0 + 2.0 * math.sin(omega) ** 2)


def test_parameterize_spins_argument():
    spins = np.array([0.4, -1.1, 2.2])
    cfg = od.parameterize(1.2, 0.3, spins=spins)
    np.testing.assert_array_equal(cfg.coords[6:], spins)
    np.testing.assert_array_equal(od.parameterize(1.2, 0.3).coords[6:], np.zeros(3))


def test_reduced_state_array_round_trip():
    state = od.ReducedState(1.1, -0.4, np.array([0.1, 0.2, 0.3]))
    arr = state.as_array()
    np.testing.assert_array_equal(arr, [1.1, -0.4, 0.1, 0.2, 0.3])
    back = od.ReducedState.from_array(arr)
    assert back.omega == state.omega
    assert back.phi == state.phi
    np.testing.assert_array_equal(back.theta, state.theta)


def test_reduced_coefficients_roll_closed_forms():
    for omega in (0.5, 1.1, math.pi / 2.0, 2.3, 2.9):
        coeff = od.reduced_coefficients(omega, 0.37, mode="roll")
        assert coeff.k_sq == pytest.approx(_k_sq(omega), abs=1e-12)
        assert coeff.l_sq == pytest.approx(_l_sq(omega), abs=1e-12)
        assert coeff.alpha1 == pytest.approx(1.0 / math.sqrt(coeff.k_sq + 8.0), abs=1e-14)
        assert coeff.alpha2 == pytest.approx(1.0 / math.sqrt(coeff.l_sq + 8.0 / 3.0), abs=1e-14)
        # quadratic-variation rates of the two shape coordinates
        assert coeff.var_omega_rate == pytest.approx(coeff.alpha1**2, rel=1e-12)
        assert coeff.var_phi_rate == pytest.approx(coeff.alpha2**2, rel=1e-12)
        # the omega and phi diffusion rows are orthogonal unit-scaled tangents
        assert coeff.rows.shape == (5, 9)
        assert abs(coeff.row_omega @ coeff.row_phi) < 1e-14
        # chain-rule blocks
        metric = coeff.shape_jacobian.T @ coeff.shape_jacobian
        np.testing.assert_allclose(metric, np.diag([coeff.k_sq, coeff.l_sq]), atol=1e-12)
        np.testing.assert_allclose(coeff.shape_metric, metric, atol=1e-12)
        np.testing.assert_array_equal(coeff.shape_jacobian[6:], np.zeros((3, 2)))
        np.testing.assert_array_equal(coeff.spin_jacobian[:6], np.zeros((6, 3)))
        np.testing.assert_array_equal(coeff.spin_jacobian[6:], np.eye(3))
        jac = coeff.full_jacobian
        gram = jac.T @ jac
        expected = np.zeros((5, 5))
        expected[0, 0] = coeff.k_sq
        expected[1, 1] = coeff.l_sq
        expected[2:, 2:] = np.eye(3)
        np.testing.assert_allclose(gram, expected, atol=1e-12)


def test_reduced_coefficients_rows_match_projection():
    # Independent route: project the coordinate differentials with the
    # assembled orthogonal projector and divide by the squared tangent norms.
    for mode in ("roll", "slide"):
        for omega in (0.8, 1.7):
            coeff = od.reduced_coefficients(omega, 0.21, mode=mode)
            cfg = od.parameterize(omega, 0.21)
            bundle = model.assemble(cfg, model.ConstraintSet(rolling=mode == "roll"))
            np.testing.assert_allclose(
                coeff.row_omega, (bundle.P @ coeff.shape_jacobian[:, 0]) / coeff.k_sq, atol=1e-12
            )
            np.testing.assert_allclose(
                coeff.row_phi, (bundle.P @ coeff.shape_jacobian[:, 1]) / coeff.l_sq, atol=1e-12
            )
            np.testing.assert_allclose(coeff.rows[2:], bundle.P[6:, :], atol=1e-12)


def test_reduced_coefficients_slide_rates_and_spins():
    for omega in (0.9, 2.0):
        coeff = od.reduced_coefficients(omega, 0.0, mode="slide")
        # Sliding: shape tangents are fully admissible, so the omega rate is
        # 1/K^2 (row = tangent / K^2 with |tangent| = K), and spins diffuse
        # freely (identity spin block).
        assert coeff.var_omega_rate == pytest.approx(1.0 / coeff.k_sq, rel=1e-12)
        assert coeff.var_phi_rate == pytest.approx(1.0 / coeff.l_sq, rel=1e-12)
        np.testing.assert_allclose(coeff.rows[2:, 6:], np.eye(3), atol=1e-12)
        np.testing.assert_allclose(coeff.rows[2:, :6], np.zeros((3, 6)), atol=1e-12)
    with pytest.raises(ValueError):
        od.reduced_coefficients(1.0, mode="drift")


def test_step_reduced_single_step_variance():
    """Sampled quadratic variation of one Euler-Heun step matches alpha^2 dt."""
    rng = np.random.default_rng(2024)
    dt = 1e-4
    n_trials = 10_000
    start = od.ReducedState(math.pi / 2.0, 0.0, np.zeros(3))
    d_omega = np.empty(n_trials)
    d_phi = np.empty(n_trials)
    for k in range(n_trials):
        out = od.step_reduced(start, dt, mode="roll", rng=rng)
        d_omega[k] = out.omega - start.omega
        d_phi[k] = out.phi - start.phi
    coeff = od.reduced_coefficients(math.pi / 2.0, mode="roll")
    assert np.var(d_omega) == pytest.approx(coeff.var_omega_rate * dt, rel=0.05)
    assert np.var(d_phi) == pytest.approx(coeff.var_phi_rate * dt, rel=0.05)
    # the drift vanishes at the symmetric shape
    assert abs(np.mean(d_omega)) < 1.5e-4


def test_step_reduced_slide_spins_are_plain_brownian():
    noise = np.random.default_rng(8).standard_normal(9)
    dt = 4e-3
    start = od.ReducedState(1.3, 0.2, np.array([0.5, -0.5, 0.0]))
    out = od.step_reduced(start, dt, mode="slide", noise=noise)
    np.testing.assert_allclose(out.theta - start.theta, math.sqrt(dt) * noise[6:], atol=1e-14)
    with pytest.raises(ValueError):
        od.step_reduced(start, dt, mode="spin", noise=noise)
    with pytest.raises(ValueError):
        od.step_reduced(start, dt, mode="slide")


def test_step_reduced_reflects_at_walls():
    # A strong inward-pointing kick near the lower wall must bounce back
    # into the domain rather than leave it.
    coeff = od.reduced_coefficients(0.05, mode="roll")
    noise = -10.0 * coeff.row_omega / np.linalg.norm(coeff.row_omega)
    out = od.step_reduced(od.ReducedState(0.05, 0.0, np.zeros(3)), 1e-2, mode="roll", noise=noise)
    assert 0.0 <= out.omega <= math.pi
    assert out.omega > 0.1
    # custom reflecting domain (upper wall)
    coeff = od.reduced_coefficients(0.95, mode="roll")
    noise = 10.0 * coeff.row_omega / np.linalg.norm(coeff.row_omega)
    out = od.step_reduced(
        od.ReducedState(0.95, 0.0, np.zeros(3)), 1e-2, mode="roll", noise=noise, domain=(0.5, 1.0)
    )
    assert 0.5 <= out.omega <= 1.0


def test_step_cartesian_strat_stays_on_manifold():
    rng = np.random.default_rng(3)
    q = od.parameterize(1.2, 0.1).coords
    constraints = model.ConstraintSet(rolling=True)
    for _ in range(30):
        q = od.step_cartesian_strat(q, 1e-3, mode="roll", rng=rng)
    residuals = model.position_residuals(model.Configuration(q), constraints)
    assert max(abs(val) for val in residuals.values()) < 1e-9
    with pytest.raises(ValueError):
        od.step_cartesian_strat(q, 1e-3, mode="roll")


def test_step_cartesian_general_noise_amplitude():
    """At vanishing dt the step reduces to its noise kick, whose amplitude
    must be sqrt(2/(beta gamma)) P (isotropic) or the symmetric square root
    of (2/beta) Gamma_P^+ (matrix friction)."""
    q = od.parameterize(1.3, 0.2).coords
    noise = np.random.default_rng(5).standard_normal(9)
    dt = 1e-10
    beta, gamma = 2.0, 1.5
    bundle = model.assemble(model.Configuration(q), model.ConstraintSet(rolling=True))

    out = od.step_cartesian_general(q, dt, mode="roll", friction=gamma, beta=beta, noise=noise)
    kick = math.sqrt(2.0 / (beta * gamma)) * math.sqrt(dt) * (bundle.P @ noise)
    np.testing.assert_allclose(out - q, kick, atol=1e-8)

    gamma_diag = np.linspace(0.5, 2.5, 9)
    out = od.step_cartesian_general(q, dt, mode="roll", friction=gamma_diag, beta=beta, noise=noise)
    diffusion = (2.0 / beta) * model.gamma_p_dagger(bundle, gamma_diag)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (diffusion + diffusion.T))
    sqrtm = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    np.testing.assert_allclose(out - q, math.sqrt(dt) * sqrtm @ noise, atol=1e-8)

    with pytest.raises(ValueError):
        od.step_cartesian_general(q, dt, mode="roll")


def test_step_cartesian_general_potential_term():
    q = od.parameterize(1.1, -0.3).coords
    noise = np.random.default_rng(6).standard_normal(9)
    dt = 1e-6
    gamma = 1.4

    def grad_potential(point):
        grad = np.zeros(9)
        grad[:6] = point[:6]
        return grad

    free = od.step_cartesian_general(q, dt, mode="roll", friction=gamma, noise=noise)
    tilted = od.step_cartesian_general(
        q, dt, mode="roll", friction=gamma, noise=noise, grad_potential=grad_potential
    )
    bundle = model.assemble(model.Configuration(q), model.ConstraintSet(rolling=True))
    expected = -dt * (bundle.P @ grad_potential(q)) / gamma
    np.testing.assert_allclose(tilted - free, expected, rtol=2e-2, atol=1e-9)


def test_run_cartesian_strat_smoke_and_determinism():
    result = od.run_cartesian("strat", "roll", dt=5e-3, n_steps=4000, seed=7, record_stride=10)
    n_frames = len(result.times)
    assert n_frames > 300
    assert result.omega.shape == (n_frames,)
    assert result.theta.shape == (n_frames, 3)
    assert np.all((result.omega >= 0.0) & (result.omega < math.pi))
    assert result.max_bond_dev < 1e-8
    assert np.allclose(np.diff(result.times), 5e-3 * 10)
    again = od.run_cartesian("strat", "roll", dt=5e-3, n_steps=4000, seed=7, record_stride=10)
    np.testing.assert_array_equal(result.omega, again.omega)
    np.testing.assert_array_equal(result.final_q, again.final_q)
    with pytest.raises(ValueError):
        od.run_cartesian("milstein", "roll", dt=5e-3, n_steps=10, seed=0)


def test_run_cartesian_ito_smoke():
    result = od.run_cartesian("ito", "roll", dt=5e-3, n_steps=400, seed=9, record_stride=10)
    assert result.max_bond_dev < 1e-8
    assert np.isfinite(result.omega).all()
    assert result.engine == "ito"


def test_run_reduced_smoke_and_domain():
    result = od.run_reduced("roll", dt=1e-3, n_steps=20_000, seed=11, record_stride=20)
    assert np.all((result.omega >= 0.0) & (result.omega <= math.pi))
    assert result.theta.shape == (len(result.times), 3)
    assert isinstance(result.final, od.ReducedState)
    again = od.run_reduced("roll", dt=1e-3, n_steps=20_000, seed=11, record_stride=20)
    np.testing.assert_array_equal(result.omega, again.omega)

    lo, hi = math.pi / 6.0, 5.0 * math.pi / 6.0
    restricted = od.run_reduced("roll", dt=1e-3, n_steps=20_000, seed=12, record_stride=20, domain=(lo, hi))
    assert np.all((restricted.omega >= lo) & (restricted.omega <= hi))


def test_run_reduced_conserves_invariants_away_from_walls():
    """Between reflections the rolling leaf structure is exact: the two
    holonomic invariants move only through floating-point roundoff."""
    initial = od.ReducedState(math.pi / 2.0, 0.0, np.zeros(3))
    result = od.run_reduced(
        "roll", dt=1e-5, n_steps=20_000, seed=13, record_stride=10,
        initial=initial, warmup_fraction=0.0,
    )
    # stays well inside (0, pi): no reflections happened
    assert result.omega.min() > 0.5
    assert result.omega.max() < math.pi - 0.5
    q1 = -4.0 * result.omega - result.theta[:, 0] + result.theta[:, 2]
    q2 = -4.0 * result.phi + result.theta[:, 0] + 2.0 * result.theta[:, 1] + result.theta[:, 2]
    q1_0 = -4.0 * initial.omega
    assert np.max(np.abs(q1 - q1_0)) < 1e-9
    assert np.max(np.abs(q2)) < 1e-9
