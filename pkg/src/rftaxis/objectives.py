"""Scalar objectives built from signal strength measurements.

The optimizer minimizes, so source seeking uses the negated signal. Bridging
two nodes uses ``|m1 - m2| - |m1 + m2|``, which equals ``-2 * min(m1, m2)``
when both measurements are non-negative. Field values in dB are negative, so
the bridge objective shifts every measurement by ``offset_db`` first.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .field import FieldModel, eval_field, source_distance

SEEK = "seek_source"
BRIDGE = "bridge_two"
DEFAULT_BRIDGE_OFFSET_DB = 120.0


def bridge_value(m1, m2):
    return np.abs(m1 - m2) - np.abs(m1 + m2)


class Objective:
    """Measurement-only objective over one (seek) or two (bridge) sensors.

    Robot motion uses the first sensor's motor noise stream. Each evaluation
    draws one fresh measurement per sensor.
    """

    def __init__(self, kind: str, sensors: Sequence, offset_db: float = DEFAULT_BRIDGE_OFFSET_DB):
        sensors = tuple(sensors)
        if kind == SEEK and len(sensors) != 1:
            raise ValueError("seek objective takes exactly one sensor")
        if kind == BRIDGE:
            if len(sensors) != 2:
                raise ValueError("bridge objective takes exactly two sensors")
            if sensors[0].dim != sensors[1].dim:
                raise ValueError("bridge sensors must share the coordinate frame")
        if kind not in (SEEK, BRIDGE):
            raise ValueError(f"unknown objective kind {kind!r}")
        self.kind = kind
        self.sensors = sensors
        self.offset_db = offset_db

    @property
    def dim(self) -> int:
        return self.sensors[0].dim

    @property
    def motion(self):
        return self.sensors[0]

    def move(self, start, target):
        return self.motion.move(start, target)

    def measure_many(self, points) -> np.ndarray:
        if self.kind == SEEK:
            return -self.sensors[0].measure_many(points)
        m1 = self.sensors[0].measure_many(points) + self.offset_db
        m2 = self.sensors[1].measure_many(points) + self.offset_db
        return bridge_value(m1, m2)

    def measure(self, x) -> float:
        return float(self.measure_many(np.asarray(x, dtype=float)[None, :])[0])

    def true_value(self, x):
        """Noise-free objective; for analysis only, never used by the optimizer."""
        return noiseless_objective(self.kind, [s.field for s in self.sensors], x, self.offset_db)


def eval_objective(obj: Objective, x) -> float:
    return obj.measure(x)


def noiseless_objective(kind: str, fields: Sequence[FieldModel], x,
                        offset_db: float = DEFAULT_BRIDGE_OFFSET_DB):
    if kind == SEEK:
        return -eval_field(fields[0], x)
    return bridge_value(eval_field(fields[0], x) + offset_db, eval_field(fields[1], x) + offset_db)


def bridge_optimum_oracle(field1: FieldModel, field2: FieldModel, bbox, resolution: float,
                          offset_db: float = DEFAULT_BRIDGE_OFFSET_DB) -> np.ndarray:
    """Brute-force grid argmin of the noise-free bridge objective.

    ``bbox`` is ``[(lo, hi), ...]`` per axis. Grid points that fall inside
    either source's exclusion radius are skipped.
    """
    axes = [np.arange(lo, hi + 0.5 * resolution, resolution) for lo, hi in bbox]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.ones(len(pts), dtype=bool)
    for f in (field1, field2):
        keep &= source_distance(f.path_loss, pts) >= f.epsilon_floor
    pts = pts[keep]
    values = noiseless_objective(BRIDGE, (field1, field2), pts, offset_db)
    best = np.flatnonzero(values == values.min())
    # ties (symmetric layouts): take the one nearest the box centre for a stable answer
    centre = np.array([(lo + hi) / 2.0 for lo, hi in bbox])
    cand = pts[best]
    return cand[np.argmin(np.linalg.norm(cand - centre, axis=1))].copy()
