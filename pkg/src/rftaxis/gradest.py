"""Gradient estimation from noisy field samples.

Estimators talk to a *probe*: any object with ``dim``, ``measure_many(points)``
and ``move(start, target)``. :class:`~rftaxis.sensing.Sensor` and the
objectives in :mod:`rftaxis.objectives` both qualify.

For every axis ``i`` the robot walks ``center -> +h e_i -> -h e_i -> center``.
Each leg is a separate noisy move. The central difference estimator measures
at the two turning points; the line fit estimator measures at ``n`` equally
spaced points along the middle leg and takes the least squares slope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import DegenerateFit, DistanceTooSmall, ZeroNoise
from .field import PathLossParams, source_distance, path_loss_derivatives, DEFAULT_EPSILON_FLOOR

KINDS = ("central_difference", "line_fit")


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str = "central_difference"
    h: float = 1.0
    samples_per_axis: int = 2

    def __post_init__(self):
        if self.kind not in ESTIMATORS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.kind == "line_fit" and self.samples_per_axis < 2:
            raise ValueError("line_fit needs samples_per_axis >= 2")


@dataclass
class GradientEstimate:
    g_hat: np.ndarray
    h_used: float
    n_measurements: int
    kind: str
    probes: np.ndarray = field(repr=False, default=None)
    measurements: np.ndarray = field(repr=False, default=None)
    end_position: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SnrEntry:
    full: float
    small_h: float
    regime: str


@dataclass(frozen=True)
class SnrReport:
    entries: tuple

    @property
    def full(self) -> np.ndarray:
        return np.array([e.full for e in self.entries])

    @property
    def small_h(self) -> np.ndarray:
        return np.array([e.small_h for e in self.entries])


def _sweep_axis(probe, center: np.ndarray, axis: int, h: float, n: int):
    """Walk across one axis and measure ``n`` points on the middle leg.

    Returns the sample positions, the measurements and where the robot ends up.
    """
    step = np.zeros_like(center)
    step[axis] = h
    plus = probe.move(center, center + step).achieved
    minus = probe.move(plus, plus - 2.0 * step).achieved
    if n == 2:
        pts = np.stack([plus, minus])
    else:
        t = np.linspace(0.0, 1.0, n)[:, None]
        pts = plus + t * (minus - plus)
    values = probe.measure_many(pts)
    back = probe.move(minus, center).achieved
    return pts, values, back


def _sweep(probe, x, h: float, n: int):
    x = np.asarray(x, dtype=float)
    dim = x.shape[0]
    pos = x
    all_pts, all_vals = [], []
    for i in range(dim):
        pts, vals, pos = _sweep_axis(probe, pos, i, h, n)
        all_pts.append(pts)
        all_vals.append(vals)
    return all_pts, all_vals, pos


def ols_slope(offsets: np.ndarray, values: np.ndarray) -> float:
    if len(offsets) == 2:
        # two-point least squares is exactly the difference quotient
        return float((values[0] - values[1]) / (offsets[0] - offsets[1]))
    dt = offsets - offsets.mean()
    ss = float(dt @ dt)
    if ss == 0.0:
        raise DegenerateFit("all probe offsets coincide")
    return float(dt @ (values - values.mean()) / ss)


def estimate_central_difference(probe, x, h: float) -> GradientEstimate:
    """``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every axis, probes in order +e1, -e1, +e2, ..."""
    if not h > 0:
        raise ValueError("h must be positive")
    pts, vals, end = _sweep(probe, x, h, 2)
    g = np.array([(v[0] - v[1]) / (2.0 * h) for v in vals])
    return GradientEstimate(g, h, 2 * len(g), "central_difference",
                            np.concatenate(pts), np.concatenate(vals), end)


def estimate_line_fit(probe, x, h: float, n: int) -> GradientEstimate:
    """Least squares slope of ``n`` samples taken while crossing ``[x - h e_i, x + h e_i]``.

    Slopes are fitted against the commanded offsets; the robot cannot observe
    where motor noise actually put each sample.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if n < 2:
        raise DegenerateFit("line fit needs at least two samples per axis")
    pts, vals, end = _sweep(probe, x, h, n)
    offsets = np.linspace(h, -h, n)
    g = np.array([ols_slope(offsets, v) for v in vals])
    return GradientEstimate(g, h, n * len(g), "line_fit",
                            np.concatenate(pts), np.concatenate(vals), end)


def _line_fit_from_config(probe, x, h, config):
    return estimate_line_fit(probe, x, h, config.samples_per_axis)


def _central_from_config(probe, x, h, config):
    return estimate_central_difference(probe, x, h)


# kind -> callable(probe, x, h, config); new estimator families register here
ESTIMATORS: Dict[str, Callable] = {
    "central_difference": _central_from_config,
    "line_fit": _line_fit_from_config,
}


def estimate(config: EstimatorConfig, probe, x, h: Optional[float] = None) -> GradientEstimate:
    return ESTIMATORS[config.kind](probe, x, config.h if h is None else h, config)


def predicted_variance(sigma: float, h: float) -> float:
    """Variance of one central-difference component under i.i.d. noise of std ``sigma``."""
    if not h > 0:
        raise ValueError("h must be positive")
    return sigma**2 / (2.0 * h**2)


def line_fit_variance(sigma: float, h: float, n: int) -> float:
    offsets = np.linspace(h, -h, n)
    dt = offsets - offsets.mean()
    return sigma**2 / float(dt @ dt)


def predicted_bias_bound(params: PathLossParams, x, h: float,
                         epsilon_floor: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Upper bound on the central difference bias along the radial direction.

    Uses the largest third derivative magnitude on ``[d - h, d + h]``, which
    for the log-distance law sits at ``d - h``.
    """
    d = source_distance(params, np.asarray(x, dtype=float))
    if d - h < epsilon_floor:
        raise DistanceTooSmall(f"probe interval reaches {d - h:g} m, below {epsilon_floor:g} m")
    third = abs(path_loss_derivatives(params, d - h, epsilon_floor)[2])
    return h**2 / 12.0 * 2.0 * third


def snr(gradient_component: float, sigma: float, h: float,
        third_derivative_term: float = 0.0) -> SnrEntry:
    """Signed SNR of one gradient component, full expansion and small-h form."""
    if sigma == 0:
        raise ZeroNoise("SNR is undefined without measurement noise")
    if not (sigma > 0 and h > 0):
        raise ValueError("sigma and h must be positive")
    lead = math.sqrt(2.0) * h / sigma * gradient_component
    tail = math.sqrt(2.0) * h**3 / (12.0 * sigma) * third_derivative_term
    regime = "bias_dominated" if abs(tail) > 0.1 * abs(lead) else "small_h_valid"
    return SnrEntry(lead + tail, h / sigma * gradient_component, regime)


def snr_report(gradient, sigma: float, h: float, third_terms=None) -> SnrReport:
    gradient = np.atleast_1d(np.asarray(gradient, dtype=float))
    if third_terms is None:
        third_terms = np.zeros_like(gradient)
    return SnrReport(tuple(snr(g, sigma, h, t) for g, t in zip(gradient, third_terms)))


def monte_carlo_central_difference(sensor, x, h: float, repeats: int) -> np.ndarray:
    """``repeats`` central difference estimates at a fixed point, shape ``(repeats, p)``.

    Batched version of calling :func:`estimate_central_difference` repeatedly;
    draws the same noise in the same order, which requires motor noise off.
    """
    if sensor.noise.motor_active:
        return np.array([estimate_central_difference(sensor, x, h).g_hat for _ in range(repeats)])
    x = np.asarray(x, dtype=float)
    p = x.shape[0]
    probes = []
    for i in range(p):
        step = np.zeros(p)
        step[i] = h
        plus = x + step
        probes.extend([plus, plus - 2.0 * step])
    probes = np.array(probes)
    values = sensor.measure_many(np.tile(probes, (repeats, 1))).reshape(repeats, p, 2)
    return (values[:, :, 0] - values[:, :, 1]) / (2.0 * h)
