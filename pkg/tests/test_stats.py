"""Angle extraction, KS machinery and Monte Carlo helpers."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats

from rolldisc.analytics import DensityModel
from rolldisc.dynamics_overdamped import parameterize
from rolldisc.model import ConstraintSet, assemble
from rolldisc.stats import (
    autocorrelation,
    extract_omega,
    extract_phi,
    extract_reduced,
    integrated_autocorr_time,
    kolmogorov_sf,
    ks_distance,
    ks_two_sample_threshold,
    make_histogram,
    two_sample_ks,
    velocity_covariance_oracle,
    wrap_angle,
)


def test_wrap_angle_principal_interval():
    assert abs(wrap_angle(3 * math.pi) - math.pi) < 1e-12
    assert abs(wrap_angle(-math.pi) - math.pi) < 1e-12
    assert abs(wrap_angle(0.3) - 0.3) < 1e-15
    assert abs(wrap_angle(2 * math.pi + 0.3) - 0.3) < 1e-12
    values = wrap_angle(np.linspace(-20.0, 20.0, 101))
    assert np.all(values > -math.pi - 1e-12)
    assert np.all(values <= math.pi + 1e-12)


def test_extract_omega_inverts_parameterize():
    for omega in np.linspace(0.01, math.pi - 0.01, 23):
        for phi in (0.0, 1.0, -2.5):
            cfg = parameterize(float(omega), phi)
            assert abs(extract_omega(cfg) - omega) < 1e-12
            assert abs(extract_omega(cfg.coords) - omega) < 1e-12


def test_extract_omega_vectorized():
    omegas = np.linspace(0.2, 2.8, 9)
    block = np.stack([parameterize(float(w), 0.7).coords for w in omegas])
    np.testing.assert_allclose(extract_omega(block), omegas, atol=1e-12)


def test_extract_omega_rejects_coincident_centers():
    coords = np.zeros(9)  # all three discs at the origin
    with pytest.raises(ValueError):
        extract_omega(coords)


def test_extract_phi_inverts_parameterize():
    for omega in (0.4, 1.2, math.pi / 2, 2.7):
        for phi in (-3.0, -0.5, 0.0, 1.4, 3.0):
            cfg = parameterize(omega, phi)
            got = extract_phi(cfg)
            assert abs(wrap_angle(got - phi)) < 1e-12


def test_extract_phi_rotation_invariance_of_omega():
    # Rotating the whole cluster changes phi, not omega.
    base = parameterize(1.1, 0.0)
    angle = 0.77
    rot = np.array([[math.cos(angle), -math.sin(angle)],
                    [math.sin(angle), math.cos(angle)]])
    rotated = base.coords.copy()
    rotated[:6] = (base.positions @ rot.T).ravel()
    assert abs(extract_omega(rotated) - 1.1) < 1e-12
    assert abs(wrap_angle(extract_phi(rotated) - angle)) < 1e-12


def test_extract_reduced_bundles_components():
    cfg = parameterize(0.9, 0.3, spins=np.array([0.1, -0.2, 0.4]))
    omega, phi, theta = extract_reduced(cfg)
    assert abs(omega - 0.9) < 1e-12
    assert abs(phi - 0.3) < 1e-12
    np.testing.assert_allclose(theta, [0.1, -0.2, 0.4])


def test_kolmogorov_sf_against_scipy():
    for x in (0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.0, 3.0):
        assert abs(kolmogorov_sf(x) - scipy.stats.kstwobign.sf(x)) < 1e-10
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(50.0) == 0.0


def test_ks_distance_single_sample():
    model = DensityModel("slide_vibr")  # uniform on [0, pi]
    report = ks_distance(np.array([math.pi / 4]), model)
    assert abs(report.statistic - 0.75) < 1e-12
    report = ks_distance(np.array([math.pi / 2]), model)
    assert abs(report.statistic - 0.5) < 1e-12
    assert report.n_samples == 1


def test_ks_distance_against_scipy():
    model = DensityModel("roll_hard")
    rng = np.random.default_rng(11)
    samples = model.sample(500, rng)
    mine = ks_distance(samples, model)
    ref = scipy.stats.kstest(samples, model.cdf)
    assert abs(mine.statistic - ref.statistic) < 1e-12
    asymp = scipy.stats.kstest(samples, model.cdf, mode="asymp")
    assert abs(mine.p_value - asymp.pvalue) < 1e-6


def test_ks_distance_invariant_under_monotone_reparameterization():
    model = DensityModel("roll_vibr")
    rng = np.random.default_rng(5)
    samples = model.sample(400, rng)
    direct = ks_distance(samples, model)
    transformed = ks_distance(np.asarray(model.cdf(samples)),
                              lambda u: np.clip(u, 0.0, 1.0))
    assert abs(direct.statistic - transformed.statistic) < 1e-12


def test_two_sample_ks_against_scipy():
    rng = np.random.default_rng(17)
    a = rng.standard_normal(300)
    b = rng.standard_normal(450) * 1.1
    mine = two_sample_ks(a, b)
    ref = scipy.stats.ks_2samp(a, b)
    assert abs(mine.statistic - ref.statistic) < 1e-12
    # The p-value is the plain Kolmogorov limit (scipy adds a small-sample
    # continuity correction in asymptotic mode, so only the scale must agree).
    plain = kolmogorov_sf(mine.statistic * math.sqrt(300 * 450 / 750))
    assert abs(mine.p_value - plain) < 1e-12
    asymp = scipy.stats.ks_2samp(a, b, method="asymp")
    assert abs(mine.p_value - asymp.pvalue) < 0.01


def test_two_sample_threshold_formula():
    c = math.sqrt(-0.5 * math.log(0.005))
    assert abs(ks_two_sample_threshold(0.01, 100, 100) - c * math.sqrt(0.02)) < 1e-15
    assert abs(ks_two_sample_threshold(0.01, 100_000, 100_000)
               - c * math.sqrt(2e-5)) < 1e-15
    # The 1% critical constant itself.
    assert abs(c - 1.6276236307187293) < 1e-12


def test_two_sample_threshold_calibration():
    # Under the null, rejection at the alpha threshold should be rare.
    rng = np.random.default_rng(23)
    rejections = 0
    trials = 200
    for _ in range(trials):
        a = rng.standard_normal(200)
        b = rng.standard_normal(200)
        rep = two_sample_ks(a, b)
        if rep.statistic > rep.threshold(0.05):
            rejections += 1
    assert rejections <= 0.12 * trials


def test_make_histogram_normalization_and_model_column():
    model = DensityModel("slide_hard")
    rng = np.random.default_rng(31)
    samples = model.sample(5000, rng)
    hist = make_histogram(samples, model, bins=40)
    widths = np.diff(hist.edges)
    assert abs(float(np.sum(hist.empirical_density * widths)) - 1.0) < 1e-12
    np.testing.assert_allclose(hist.model_density, model.pdf(hist.centers),
                               rtol=1e-12)
    assert hist.n_samples == 5000
    assert hist.kind == "slide_hard"


def test_make_histogram_tail_estimates():
    model = DensityModel("slide_vibr")
    samples = np.array([0.5, 1.0, 2.5, 3.0])
    hist = make_histogram(samples, model, bins=10, tail_thresholds=(2.2, 2.9))
    assert hist.tail_estimates[2.2] == 0.5
    assert hist.tail_estimates[2.9] == 0.25


def test_velocity_covariance_identity_projection():
    rng = np.random.default_rng(41)
    cov = velocity_covariance_oracle(np.eye(9), 2.0, 200_000, rng)
    np.testing.assert_allclose(cov, np.eye(9) / 2.0, rtol=0, atol=6e-3)


def test_velocity_covariance_constrained_projection():
    bundle = assemble(parameterize(1.3), ConstraintSet(rolling=True))
    rng = np.random.default_rng(43)
    cov = velocity_covariance_oracle(bundle.P, 1.0, 400_000, rng)
    assert np.max(np.abs(cov - bundle.P)) < 8e-3
    # Covariance lives inside the admissible subspace.
    np.testing.assert_allclose(bundle.P @ cov, cov, rtol=0, atol=1e-10)


def test_autocorrelation_white_noise():
    rng = np.random.default_rng(53)
    series = rng.standard_normal(20_000)
    rho = autocorrelation(series, 3)
    assert abs(rho[0] - 1.0) < 1e-12
    assert np.max(np.abs(rho[1:])) < 0.03
    assert integrated_autocorr_time(series) < 1.2


def test_autocorrelation_ar1_known_time():
    # AR(1) with coefficient a has rho(k) = a^k and tau_int = (1+a)/(1-a).
    a = 0.6
    rng = np.random.default_rng(59)
    noise = rng.standard_normal(200_000)
    series = np.empty_like(noise)
    series[0] = noise[0]
    for i in range(1, noise.size):
        series[i] = a * series[i - 1] + noise[i]
    rho = autocorrelation(series, 5)
    np.testing.assert_allclose(rho[1:], a ** np.arange(1, 6), atol=0.02)
    tau = integrated_autocorr_time(series)
    assert abs(tau - 4.0) < 0.6
