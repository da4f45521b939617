"""Closed-form geometry of the centered disc trimer.

Three unit-spaced disc centers with the center of mass pinned at the origin
form a one-parameter family of shapes (an isosceles hinge) plus a rigid
rotation.  This module holds the scalar parameterization used everywhere:

* ``omega``  -- half the opening angle at the middle disc, in (0, pi).
  ``omega = pi/2`` is the straight (collinear) shape.
* ``phi``    -- rigid rotation of the whole shape about the origin.
* ``theta``  -- the three spin angles (carried separately; the shape map
  below leaves them untouched).

The reference shape (``phi = 0``) places the middle disc on the y-axis::

    x1 = (-sin w, -cos w / 3)   x2 = (0, 2 cos w / 3)   x3 = (sin w, -cos w / 3)

which has unit bond lengths and zero mean by construction.  Everything else
in the file (tangent norms, horizontal basis, diffusion rows) is a direct
derivative of this map; each formula is cross-checked against finite
differences in the test suite.
"""
from __future__ import annotations

import math

import numpy as np

# Spin-space parts of the constraint-compatible tangent directions for the
# rolling trimer (derived from the two rolling conditions; see t_omega/t_phi).
SPIN_OMEGA = np.array([-2.0, 0.0, 2.0])
SPIN_PHI = np.array([2.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0])
SPIN_R = np.array([1.0, -1.0, 1.0])

# Squared norms of those spin parts: |SPIN_OMEGA|^2 = 8, |SPIN_PHI|^2 = 8/3.
SPIN_OMEGA_SQ = 8.0
SPIN_PHI_SQ = 8.0 / 3.0


def base_positions(omega: float) -> np.ndarray:
    """Center positions (6,) of the reference shape at rotation phi = 0."""
    s, c = math.sin(omega), math.cos(omega)
    return np.array([-s, -c / 3.0, 0.0, 2.0 * c / 3.0, s, -c / 3.0])


def base_positions_domega(omega: float) -> np.ndarray:
    """d/d omega of :func:`base_positions`."""
    s, c = math.sin(omega), math.cos(omega)
    return np.array([-c, s / 3.0, 0.0, -2.0 * s / 3.0, c, s / 3.0])


def rotate6(xy: np.ndarray, phi: float) -> np.ndarray:
    """Rotate three stacked 2-vectors by phi."""
    c, s = math.cos(phi), math.sin(phi)
    out = np.empty(6)
    out[0::2] = c * xy[0::2] - s * xy[1::2]
    out[1::2] = s * xy[0::2] + c * xy[1::2]
    return out


def quarter_turn6(xy: np.ndarray) -> np.ndarray:
    """Apply the 90-degree rotation (x, y) -> (-y, x) to three stacked 2-vectors."""
    out = np.empty(6)
    out[0::2] = -xy[1::2]
    out[1::2] = xy[0::2]
    return out


def positions(omega: float, phi: float) -> np.ndarray:
    """Disc centers (6,) for the given shape and rigid rotation."""
    return rotate6(base_positions(omega), phi)


def dpositions_domega(omega: float, phi: float) -> np.ndarray:
    """Partial derivative of the centers with respect to omega (norm K)."""
    return rotate6(base_positions_domega(omega), phi)


def dpositions_dphi(omega: float, phi: float) -> np.ndarray:
    """Partial derivative of the centers with respect to phi (norm L)."""
    return quarter_turn6(positions(omega, phi))


def k_sq(omega):
    """Squared norm of d(centers)/d omega: K^2 = 2/3 + (4/3) cos^2 omega."""
    c = np.cos(omega)
    return 2.0 / 3.0 + 4.0 / 3.0 * c * c


def l_sq(omega):
    """Squared norm of d(centers)/d phi: L^2 = 2/3 + (4/3) sin^2 omega."""
    s = np.sin(omega)
    return 2.0 / 3.0 + 4.0 / 3.0 * s * s


def k_sq_prime(omega):
    """d/d omega of k_sq."""
    return -4.0 / 3.0 * np.sin(2.0 * omega)


def l_sq_prime(omega):
    """d/d omega of l_sq."""
    return 4.0 / 3.0 * np.sin(2.0 * omega)


def alpha1(omega):
    """Shape-noise gain of the rolling trimer: 1 / sqrt(K^2 + 8)."""
    return 1.0 / np.sqrt(k_sq(omega) + SPIN_OMEGA_SQ)


def alpha2(omega):
    """Rotation-noise gain of the rolling trimer: 1 / sqrt(L^2 + 8/3)."""
    return 1.0 / np.sqrt(l_sq(omega) + SPIN_PHI_SQ)


def alpha1_prime(omega):
    """d/d omega of alpha1 (chain rule through K^2)."""
    a = alpha1(omega)
    return -0.5 * a * a * a * k_sq_prime(omega)


def alpha2_prime(omega):
    """d/d omega of alpha2 (chain rule through L^2)."""
    a = alpha2(omega)
    return -0.5 * a * a * a * l_sq_prime(omega)


def t_omega(omega: float, phi: float) -> np.ndarray:
    """Unit tangent (9,) along the shape (hinge) direction, rolling constraints.

    Position part follows d(centers)/d omega; the spins co-move as
    (-2, 0, 2) so the two rolling conditions stay satisfied.
    """
    vec = np.concatenate([dpositions_domega(omega, phi), SPIN_OMEGA])
    return vec * alpha1(omega)


def t_phi(omega: float, phi: float) -> np.ndarray:
    """Unit tangent (9,) along the rigid-rotation direction, rolling constraints."""
    vec = np.concatenate([dpositions_dphi(omega, phi), SPIN_PHI])
    return vec * alpha2(omega)


def t_spin() -> np.ndarray:
    """Unit tangent (9,) along the free alternating-spin direction."""
    vec = np.concatenate([np.zeros(6), SPIN_R])
    return vec / math.sqrt(3.0)


def horizontal_basis(omega: float, phi: float) -> np.ndarray:
    """Orthonormal basis (9, 3) of the velocity space allowed by rolling.

    Columns are t_omega, t_phi, t_spin; mutual orthogonality holds for every
    (omega, phi) and is asserted in the tests.  The rolling projection equals
    E @ E.T on the constraint manifold.
    """
    return np.column_stack([t_omega(omega, phi), t_phi(omega, phi), t_spin()])


def shape_tangents(omega: float, phi: float) -> np.ndarray:
    """Columns (9, 2): full-space partials of the shape map wrt (omega, phi).

    Spin components are zero: moving along omega or phi at frozen theta.
    """
    cols = np.zeros((9, 2))
    cols[:6, 0] = dpositions_domega(omega, phi)
    cols[:6, 1] = dpositions_dphi(omega, phi)
    return cols


def diffusion_rows_roll(omega: float, phi: float) -> np.ndarray:
    """Reduced diffusion matrix B (5, 9) for the rolling trimer.

    Row order (omega, phi, theta1, theta2, theta3): white noise eta in R^9
    drives the reduced coordinates as  d(coord) = B @ eta * sqrt(dt).
    The omega and phi rows are alpha1 * t_omega and alpha2 * t_phi; the spin
    rows are the projections of the spin axes onto the horizontal space.
    """
    tw = t_omega(omega, phi)
    tp = t_phi(omega, phi)
    tr = t_spin()
    a1 = alpha1(omega)
    a2 = alpha2(omega)
    b = np.empty((5, 9))
    b[0] = a1 * tw
    b[1] = a2 * tp
    # P e_theta_i = (t.e_theta_i) t summed over the basis; spin components of
    # the unit tangents are alpha1*SPIN_OMEGA, alpha2*SPIN_PHI, SPIN_R/sqrt(3).
    for i in range(3):
        b[2 + i] = (
            (a1 * SPIN_OMEGA[i]) * tw
            + (a2 * SPIN_PHI[i]) * tp
            + (SPIN_R[i] / math.sqrt(3.0)) * tr
        )
    return b


def diffusion_rows_slide(omega: float, phi: float) -> np.ndarray:
    """Reduced diffusion matrix B (5, 9) for the sliding trimer.

    Without rolling coupling the spins take noise directly and the shape
    coordinates contract the position noise with the (non-unit) shape
    tangents: d omega = K^-2 (dx/d omega . eta_pos), likewise for phi.
    """
    b = np.zeros((5, 9))
    b[0, :6] = dpositions_domega(omega, phi) / k_sq(omega)
    b[1, :6] = dpositions_dphi(omega, phi) / l_sq(omega)
    for i in range(3):
        b[2 + i, 6 + i] = 1.0
    return b
