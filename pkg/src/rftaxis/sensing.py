"""What the robot observes and where it actually ends up.

Measurements are the true field plus i.i.d. Gaussian noise. Movements carry
motor noise whose scale grows linearly with the commanded distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .field import FieldModel, eval_field

MOTOR_MODES = ("none", "longitudinal", "vectorial")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_meas: float = 0.0
    motor_mode: str = "vectorial"
    sigma_motor: float = 0.0

    def __post_init__(self):
        if self.sigma_meas < 0 or self.sigma_motor < 0:
            raise ValueError("noise scales must be >= 0")
        if self.motor_mode not in MOTOR_MODES:
            raise ValueError(f"motor_mode must be one of {MOTOR_MODES}")

    @property
    def motor_active(self) -> bool:
        return self.motor_mode != "none" and self.sigma_motor > 0


@dataclass(frozen=True)
class MoveOutcome:
    commanded: np.ndarray
    achieved: np.ndarray


class Sensor:
    """A field observed through one noise stream.

    The sensor owns its generator; the sequence of outputs is fixed by the
    seed and the order of calls.
    """

    def __init__(self, field: FieldModel, noise: NoiseSpec, rng=None):
        self.field = field
        self.noise = noise
        if rng is None or isinstance(rng, (int, np.random.SeedSequence)):
            rng = np.random.default_rng(rng)
        self.rng: np.random.Generator = rng

    @property
    def dim(self) -> int:
        return self.field.dim

    def measure(self, x) -> float:
        value = eval_field(self.field, x)
        if self.noise.sigma_meas > 0:
            value += self.noise.sigma_meas * self.rng.standard_normal()
        return float(value)

    def measure_many(self, points) -> np.ndarray:
        """Measure at each row of ``points``; noise is drawn in row order."""
        values = eval_field(self.field, np.asarray(points, dtype=float).reshape(-1, self.dim))
        if self.noise.sigma_meas > 0:
            values = values + self.noise.sigma_meas * self.rng.standard_normal(values.shape[0])
        return values

    def move(self, start, target) -> MoveOutcome:
        start = np.asarray(start, dtype=float)
        target = np.asarray(target, dtype=float)
        noise = self.noise
        if not noise.motor_active:
            return MoveOutcome(target, target.copy())
        delta = target - start
        length = math.sqrt(float(delta @ delta))
        if length == 0.0:
            return MoveOutcome(target, target.copy())
        scale = noise.sigma_motor * length
        if noise.motor_mode == "longitudinal":
            err = scale * self.rng.standard_normal()
            achieved = start + delta * ((length + err) / length)
        else:
            achieved = target + scale * self.rng.standard_normal(target.shape[0])
        return MoveOutcome(target, achieved)


def measure(sensor: Sensor, x) -> float:
    return sensor.measure(x)


def move(sensor: Sensor, start, target) -> MoveOutcome:
    return sensor.move(start, target)


def make_sensor(field: FieldModel, noise: Optional[NoiseSpec] = None, seed=None) -> Sensor:
    return Sensor(field, noise or NoiseSpec(), np.random.default_rng(seed))
