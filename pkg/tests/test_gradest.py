import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rftaxis.errors import DegenerateFit, DistanceTooSmall, ZeroNoise
from rftaxis.field import PathLossParams, analytic_gradient, free_space, path_loss_derivatives
from rftaxis.gradest import (EstimatorConfig, estimate, estimate_central_difference,
                             estimate_line_fit, line_fit_variance, monte_carlo_central_difference,
                             ols_slope, predicted_bias_bound, predicted_variance, snr, snr_report)
from rftaxis.sensing import MoveOutcome, NoiseSpec, make_sensor

LN10 = math.log(10)


class LinearProbe:
    """Exact affine field c . x + b with perfect motion."""

    def __init__(self, c, b=0.0):
        self.c = np.asarray(c, dtype=float)
        self.b = b
        self.dim = len(self.c)
        self.points = []

    def measure_many(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        self.points.extend(pts)
        return pts @ self.c + self.b

    def move(self, start, target):
        return MoveOutcome(np.asarray(target, float), np.asarray(target, float).copy())


@pytest.mark.parametrize("c", [[2.5, 0.0], [-1.0, 3.0, 0.25], [4.0]])
def test_exact_on_affine_fields(c):
    x = np.arange(len(c), dtype=float) + 1.0
    assert np.array_equal(estimate_central_difference(LinearProbe(c, 7.0), x, 0.5).g_hat, c)
    np.testing.assert_allclose(estimate_line_fit(LinearProbe(c, 7.0), x, 0.5, 11).g_hat, c,
                               rtol=1e-12, atol=1e-12)


def test_probe_order_and_counts():
    probe = LinearProbe([1.0, 2.0])
    est = estimate_central_difference(probe, [0.0, 0.0], 1.0)
    np.testing.assert_array_equal(est.probes, [[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert est.n_measurements == 4
    lf = estimate_line_fit(LinearProbe([1.0, 2.0]), [0.0, 0.0], 1.0, 5)
    assert lf.n_measurements == 10
    np.testing.assert_allclose(lf.probes[:5, 0], [1, 0.5, 0, -0.5, -1])
    np.testing.assert_array_equal(lf.end_position, [0.0, 0.0])


def test_line_fit_n2_equals_central_difference():
    model = free_space((0.0, 0.0), 3.0)
    spec = NoiseSpec(2.0, "vectorial", 0.02)
    for seed in range(20):
        cd = estimate_central_difference(make_sensor(model, spec, seed), [8.0, 3.0], 0.7)
        lf = estimate_line_fit(make_sensor(model, spec, seed), [8.0, 3.0], 0.7, 2)
        assert np.array_equal(cd.g_hat, lf.g_hat)
        assert np.array_equal(cd.probes, lf.probes)


def test_ols_slope_rejects_coincident_offsets():
    with pytest.raises(DegenerateFit):
        ols_slope(np.zeros(3), np.arange(3.0))
    with pytest.raises(DegenerateFit):
        estimate_line_fit(LinearProbe([1.0]), [0.0], 1.0, 1)


def test_estimator_config_and_dispatch():
    with pytest.raises(ValueError):
        EstimatorConfig("spsa")
    with pytest.raises(ValueError):
        EstimatorConfig("central_difference", h=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig("line_fit", 1.0, 1)
    est = estimate(EstimatorConfig("line_fit", 1.0, 7), LinearProbe([3.0, -1.0]), [0.0, 0.0], h=0.2)
    assert est.h_used == 0.2 and est.kind == "line_fit" and est.n_measurements == 14


def test_probe_inside_floor_raises():
    s = make_sensor(free_space((0.0, 0.0), 3.0))
    with pytest.raises(DistanceTooSmall):
        estimate_central_difference(s, [1.0, 0.0], 0.8)


def test_noiseless_central_difference_within_remainder_bound():
    s = make_sensor(free_space((0.0, 0.0), 3.0))
    g = estimate_central_difference(s, [10.0, 0.0], 0.1).g_hat
    third = abs(path_loss_derivatives(s.field.path_loss, 9.9)[2])
    assert abs(g[0] - (-30 / (LN10 * 10))) <= 0.1**2 / 6 * third


def test_predicted_variance_values():
    assert predicted_variance(2.0, 0.5) == 8.0
    assert predicted_variance(0.0, 0.5) == 0.0
    assert predicted_variance(1.0, 1.0) == 0.5
    with pytest.raises(ValueError):
        predicted_variance(1.0, 0.0)


def test_line_fit_variance_reduces_to_central_for_two_points():
    assert line_fit_variance(2.0, 0.5, 2) == pytest.approx(predicted_variance(2.0, 0.5))
    assert line_fit_variance(2.0, 0.5, 21) < predicted_variance(2.0, 0.5)


def test_bias_bound_value():
    params = PathLossParams(3.0, 1.0, np.zeros(2))
    # third derivative -2c/x^3 with c = 30/ln10, evaluated at 9
    expected = 2 / 12 * (60 / (LN10 * 9**3))
    assert predicted_bias_bound(params, [10.0, 0.0], 1.0) == pytest.approx(expected, rel=1e-12)
    assert predicted_bias_bound(params, [10.0, 0.0], 1.0) == pytest.approx(0.0059574, abs=1e-7)
    assert predicted_bias_bound(params, [10.0, 0.0], 1e-6) < 1e-13
    with pytest.raises(DistanceTooSmall):
        predicted_bias_bound(params, [1.0, 0.0], 0.9)


def test_empirical_bias_below_bound():
    rng = np.random.default_rng(10)
    params = PathLossParams(3.0, 1.0, np.zeros(2))
    s = make_sensor(free_space((0.0, 0.0), 3.0))
    for _ in range(100):
        d = rng.uniform(2.0, 30.0)
        h = rng.uniform(0.01, min(1.5, d - 0.6))
        g = estimate_central_difference(s, [d, 0.0], h).g_hat[0]
        assert abs(g - analytic_gradient(s.field, [d, 0.0])[0]) <= predicted_bias_bound(params, [d, 0.0], h)


def test_snr_values():
    e = snr(-1.30288, 2.0, 1.0)
    assert e.small_h == pytest.approx(-0.651, abs=1e-3)
    assert e.full == pytest.approx(-0.921, abs=1e-3)
    assert e.regime == "small_h_valid"
    assert snr(-1.30288, 2.0, 2.0).small_h == pytest.approx(2 * e.small_h)
    with pytest.raises(ZeroNoise):
        snr(1.0, 0.0, 1.0)


def test_snr_far_field_bias_share_small():
    params = PathLossParams(3.0, 1.0, np.zeros(2))
    d1, _, d3 = path_loss_derivatives(params, 100.0)
    # third-derivative difference across the probe interval is bounded by 2|f'''(d-h)|
    delta3 = 2 * abs(path_loss_derivatives(params, 99.0)[2])
    e = snr(d1, 2.0, 1.0, delta3)
    assert abs(e.full - math.sqrt(2) * 1.0 / 2.0 * d1) < 0.01 * abs(e.full)
    assert e.regime == "small_h_valid"
    near = snr(path_loss_derivatives(params, 1.5)[0], 2.0, 1.0,
               2 * abs(path_loss_derivatives(params, 0.6)[2]))
    assert near.regime == "bias_dominated"
    report = snr_report([d1, 0.0], 2.0, 1.0)
    assert report.small_h.shape == (2,)


@pytest.mark.parametrize("sigma, h", [(2.0, 0.5)])
def test_variance_law_example(sigma, h):
    s = make_sensor(free_space((0.0, 0.0), 3.0), NoiseSpec(sigma, "none"), seed=11)
    g = monte_carlo_central_difference(s, [10.0, 0.0], h, 100_000)
    np.testing.assert_allclose(g.var(axis=0, ddof=1), 8.0, rtol=0.05)


def test_batched_monte_carlo_matches_loop():
    model = free_space((0.0, 0.0), 3.0)
    a = make_sensor(model, NoiseSpec(1.0, "none"), seed=12)
    b = make_sensor(model, NoiseSpec(1.0, "none"), seed=12)
    batched = monte_carlo_central_difference(a, [6.0, 2.0], 0.5, 50)
    looped = np.array([estimate_central_difference(b, [6.0, 2.0], 0.5).g_hat for _ in range(50)])
    np.testing.assert_allclose(batched, looped, rtol=0, atol=1e-12)


def test_unbiased_under_motor_noise():
    model = free_space((0.0, 0.0), 3.0)
    s = make_sensor(model, NoiseSpec(0.0, "vectorial", 0.02), seed=13)
    x = np.array([10.0, 0.0])
    # affine field keeps curvature bias out; motor noise is the only error source
    probe = LinearProbe([-1.3, 0.4])
    probe.move = s.move
    g = np.array([estimate_central_difference(probe, x, 1.0).g_hat for _ in range(100_000)])
    se = g.std(axis=0, ddof=1) / math.sqrt(len(g))
    assert np.all(np.abs(g.mean(axis=0) - probe.c) <= 3 * se)


def test_unbiased_under_motor_noise_on_path_loss():
    model = free_space((0.0, 0.0), 3.0)
    s = make_sensor(model, NoiseSpec(0.0, "vectorial", 0.02), seed=14)
    x = np.array([10.0, 0.0])
    g = np.array([estimate_central_difference(s, x, 1.0).g_hat for _ in range(20_000)])
    se = g.std(axis=0, ddof=1) / math.sqrt(len(g))
    bound = predicted_bias_bound(model.path_loss, x, 1.02)
    assert np.all(np.abs(g.mean(axis=0) - analytic_gradient(model, x)) <= 3 * se + bound)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=3), st.floats(0.05, 2.0), st.integers(2, 30))
def test_line_fit_recovers_any_affine_slope(c, h, n):
    x = np.ones(len(c))
    np.testing.assert_allclose(estimate_line_fit(LinearProbe(c), x, h, n).g_hat, c, atol=1e-9)
