"""Constraint rows, projection matrices and their algebraic identities."""
from __future__ import annotations

import math

import numpy as np
import pytest

from rolldisc.model import (
    ConstraintSet,
    Configuration,
    ContactError,
    NumericalRankError,
    assemble,
    bond_row,
    com_rows,
    constraint_matrix,
    gamma_p_dagger,
    position_residuals,
    rolling_row,
)
from rolldisc.dynamics_overdamped import parameterize

ROLL = ConstraintSet(rolling=True)
SLIDE = ConstraintSet(rolling=False)


def _chain_configuration(omega: float, phi: float = 0.0) -> Configuration:
    """Unit-bond chain at opening angle omega, rotated by phi, COM at origin."""
    return parameterize(omega, phi)


def _straight_line_config() -> Configuration:
    """Discs at (0,0), (1,0), (2,0) with zero spins (COM not at origin)."""
    positions = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    return Configuration.from_parts(positions, np.zeros(3))


def test_bond_row_hand_value():
    cfg = _straight_line_config()
    row = bond_row(cfg, (1, 2))
    expected = np.array([-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(row, expected)


def test_bond_row_annihilates_rigid_motion():
    # Translations and the rotation about the COM preserve bond lengths.
    cfg = _chain_configuration(1.1, 0.3)
    translation_x = np.array([1.0, 0, 1, 0, 1, 0, 0, 0, 0])
    translation_y = np.array([0.0, 1, 0, 1, 0, 1, 0, 0, 0])
    rotation = np.zeros(9)
    for k, (x, y) in enumerate(cfg.positions):
        rotation[2 * k: 2 * k + 2] = (-y, x)
    for pair in ((1, 2), (2, 3)):
        row = bond_row(cfg, pair)
        assert abs(row @ translation_x) < 1e-15
        assert abs(row @ translation_y) < 1e-15
        assert abs(row @ rotation) < 1e-12


def test_rolling_row_hand_value():
    cfg = _straight_line_config()
    row = rolling_row(cfg, (1, 2))
    expected = np.array([0.0, -1.0, 0.0, 1.0, 0.0, 0.0, -0.5, -0.5, 0.0])
    np.testing.assert_array_equal(row, expected)


def test_rolling_row_gear_motion_is_admissible():
    # Two discs rolling against each other: centers fixed, surfaces slip-free
    # when the spins advance with opposite surface velocities cancelling.
    cfg = _straight_line_config()
    row = rolling_row(cfg, (1, 2))
    gear = np.zeros(9)
    gear[6] = 1.0
    gear[7] = -1.0
    assert abs(row @ gear) < 1e-15
    # Disc 1 orbiting disc 2 while both spin at the matched rate: the
    # tangential center speed perp.v_1 = 1 equals the mean surface speed
    # (dth_1 + dth_2)/2 with dth_i = 1.
    orbit = np.zeros(9)
    orbit[0:2] = (0.0, -1.0)
    orbit[6] = 1.0
    orbit[7] = 1.0
    assert abs(row @ orbit) < 1e-15


def test_rolling_row_requires_contact():
    positions = np.array([[0.0, 0.0], [1.5, 0.0], [2.5, 0.0]])
    cfg = Configuration.from_parts(positions, np.zeros(3))
    with pytest.raises(ContactError):
        rolling_row(cfg, (1, 2))
    # A looser tolerance accepts the same geometry.
    row = rolling_row(cfg, (1, 2), contact_tol=0.6)
    assert row[7] == -0.5


def test_com_rows_fixed():
    rows = com_rows()
    expected = np.array([
        [1.0, 0, 1, 0, 1, 0, 0, 0, 0],
        [0.0, 1, 0, 1, 0, 1, 0, 0, 0],
    ])
    np.testing.assert_array_equal(rows, expected)


def test_constraint_matrix_row_order_and_shape():
    cfg = _chain_configuration(math.pi / 2)
    mat_roll = constraint_matrix(cfg, ROLL)
    mat_slide = constraint_matrix(cfg, SLIDE)
    assert mat_roll.shape == (6, 9)
    assert mat_slide.shape == (4, 9)
    # Rows: bond12, bond23, roll12, roll23, com_x, com_y.
    np.testing.assert_array_equal(mat_roll[0], bond_row(cfg, (1, 2)))
    np.testing.assert_array_equal(mat_roll[1], bond_row(cfg, (2, 3)))
    np.testing.assert_array_equal(mat_roll[2], rolling_row(cfg, (1, 2)))
    np.testing.assert_array_equal(mat_roll[3], rolling_row(cfg, (2, 3)))
    np.testing.assert_array_equal(mat_roll[4:], com_rows())
    np.testing.assert_array_equal(mat_slide[:2], mat_roll[:2])
    np.testing.assert_array_equal(mat_slide[2:], com_rows())


def test_projection_identities_on_grid():
    for k, omega in enumerate(np.linspace(0.05, math.pi - 0.05, 25)):
        cfg = _chain_configuration(float(omega), 0.41 * k)
        for constraints, trace in ((ROLL, 3.0), (SLIDE, 5.0)):
            bundle = assemble(cfg, constraints)
            p = bundle.P
            assert np.max(np.abs(p @ p - p)) < 1e-12
            assert np.max(np.abs(p - p.T)) < 1e-12
            assert np.max(np.abs(bundle.C @ p)) < 1e-12
            assert abs(np.trace(p) - trace) < 1e-12
            np.testing.assert_allclose(bundle.G, bundle.C @ bundle.C.T,
                                       rtol=0, atol=1e-14)


def test_projection_fixes_admissible_velocity():
    # A velocity satisfying all constraint rows is untouched by P.
    cfg = _chain_configuration(1.3)
    bundle = assemble(cfg, ROLL)
    rng = np.random.default_rng(7)
    v = rng.standard_normal(9)
    admissible = bundle.P @ v
    np.testing.assert_allclose(bundle.P @ admissible, admissible,
                               rtol=0, atol=1e-13)
    assert np.max(np.abs(bundle.C @ admissible)) < 1e-13


def test_assemble_rejects_dependent_rows():
    cfg = _chain_configuration(1.0)
    duplicated = ConstraintSet(rolling=False, pairs=((1, 2), (1, 2)))
    with pytest.raises(NumericalRankError):
        assemble(cfg, duplicated)


def test_gamma_p_dagger_isotropic_is_projection_over_gamma():
    cfg = _chain_configuration(0.9, 1.7)
    for constraints in (ROLL, SLIDE):
        bundle = assemble(cfg, constraints)
        for gamma in (1.0, 2.5):
            pinv = gamma_p_dagger(bundle, gamma)
            np.testing.assert_allclose(pinv, bundle.P / gamma,
                                       rtol=0, atol=1e-12)


def test_gamma_p_dagger_matrix_friction_pseudoinverse():
    cfg = _chain_configuration(2.0, 0.6)
    bundle = assemble(cfg, ROLL)
    rng = np.random.default_rng(3)
    sqrt_g = rng.standard_normal((9, 9)) * 0.2 + np.eye(9)
    friction = sqrt_g @ sqrt_g.T
    pinv = gamma_p_dagger(bundle, friction)
    projected = bundle.P @ friction @ bundle.P
    # Moore-Penrose identities restricted to the projected operator.
    np.testing.assert_allclose(projected @ pinv @ projected, projected,
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(pinv @ projected @ pinv, pinv,
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(pinv, pinv.T, rtol=0, atol=1e-12)
    # Range of the pseudoinverse lies inside the admissible subspace.
    np.testing.assert_allclose(bundle.P @ pinv, pinv, rtol=0, atol=1e-10)


def test_gamma_p_dagger_diagonal_matches_full_matrix():
    cfg = _chain_configuration(1.4)
    bundle_a = assemble(cfg, ROLL)
    bundle_b = assemble(cfg, ROLL)
    diag = np.linspace(0.5, 2.1, 9)
    np.testing.assert_allclose(
        gamma_p_dagger(bundle_a, diag),
        gamma_p_dagger(bundle_b, np.diag(diag)),
        rtol=0, atol=1e-13,
    )


def test_position_residuals_reports_bonds_and_com():
    cfg = _chain_configuration(1.2, 0.4)
    res = position_residuals(cfg, ROLL)
    assert abs(res["bond_12"]) < 1e-12
    assert abs(res["bond_23"]) < 1e-12
    assert abs(res["com_x"]) < 1e-12
    assert abs(res["com_y"]) < 1e-12
    shifted = Configuration.from_parts(cfg.positions + [0.25, 0.0], cfg.spins)
    res2 = position_residuals(shifted, ROLL)
    assert abs(res2["com_x"] - 0.25) < 1e-12
    stretched = Configuration.from_parts(
        cfg.positions * np.array([1.1, 1.1]), cfg.spins)
    res3 = position_residuals(stretched, ROLL)
    assert res3["bond_12"] > 0.05


def test_parameterize_geometry():
    # The chain has unit bonds, centered COM, and opening angle omega between
    # the two bond directions.
    for omega in (0.3, 1.0, math.pi / 2, 2.6):
        for phi in (0.0, 0.8, 4.1):
            cfg = parameterize(omega, phi)
            res = position_residuals(cfg, ROLL)
            assert abs(res["bond_12"]) < 1e-12
            assert abs(res["bond_23"]) < 1e-12
            assert abs(res["com_x"]) < 1e-12
            assert abs(res["com_y"]) < 1e-12
            u = cfg.bond_vector((1, 2))
            v = cfg.bond_vector((3, 2))
            angle = math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])
            assert abs(abs(angle) - 2.0 * min(omega, math.pi - omega)) < 1e-12
