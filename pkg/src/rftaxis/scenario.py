"""Scenario configuration and single runs.

A scenario is a YAML file. Physical quantities carry their unit in the key
name (``_m`` for metres, ``_db`` for decibels). Example::

    name: seek_free_space
    dimension: 2
    objective: seek            # seek | bridge
    seed: 1234
    max_iter: 500
    start_m: [20.0, 0.0]       # or start_box_m: [[lo, hi], [lo, hi]]
    nodes:
      - source_m: [0.0, 0.0]
        gamma_pl: 3.0
        d0_m: 1.0
        height_m: 2.0
        epsilon_floor_m: 0.5
        walls:
          - vertices_m: [[3, -5], [3, 5]]
            attenuation_db: 6.0
        fading: {wavelength_m: 0.125, amplitude_db: 6.0, num_waves: 32, seed: 7}
    noise: {sigma_meas_db: 2.0, motor_mode: vectorial, sigma_motor: 0.02}
    estimator: {kind: line_fit, samples_per_axis: 11}
    schedule: {a: auto, first_step_m: 1.0, A: 10, alpha: 1, h0_m: 1.0, gamma_s: 1/6}
    stop: {h_min_m: 0.0, min_step_m: 0.0}

Run ``i`` of a scenario draws all randomness from
``numpy.random.SeedSequence(seed, spawn_key=(i, j))`` where ``j`` indexes
the node sensors; ``j = 1000`` is reserved for sampling the start position.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .field import (DEFAULT_EPSILON_FLOOR, FadingParams, FieldModel, PathLossParams, Wall,
                    as_position)
from .gradest import ESTIMATORS, EstimatorConfig
from .objectives import (BRIDGE, DEFAULT_BRIDGE_OFFSET_DB, SEEK, Objective,
                         bridge_optimum_oracle, noiseless_objective)
from .sa import GainSchedule, RunRecord, StopRules, gain_for_first_step, run_fdsa
from .sensing import MOTOR_MODES, NoiseSpec, Sensor

START_STREAM = 1000
OBJECTIVE_NAMES = {"seek": SEEK, "bridge": BRIDGE}


def _num(value, where: str) -> float:
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{where}: cannot read {value!r} as a number") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _vec(value, dim: int, where: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != dim:
        raise ConfigError(f"{where}: expected a list of {dim} numbers")
    return np.array([_num(v, where) for v in value])


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return sec


@dataclass
class Scenario:
    name: str
    dim: int
    objective_kind: str
    fields: tuple
    noise: NoiseSpec
    estimator: EstimatorConfig
    schedule: GainSchedule
    max_iter: int
    seed: int
    start: Optional[np.ndarray] = None
    start_box: Optional[np.ndarray] = None
    stop_rules: StopRules = field(default_factory=StopRules)
    offset_db: float = DEFAULT_BRIDGE_OFFSET_DB
    optimum_bbox: Optional[list] = None
    optimum_resolution: float = 0.05
    ensemble: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @cached_property
    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @cached_property
    def optimum(self) -> np.ndarray:
        """Known optimum: the source for seeking, a grid oracle for bridging."""
        if self.objective_kind == SEEK:
            return self.fields[0].source.copy()
        smooth = [FieldModel(f.path_loss, f.walls, None, f.epsilon_floor) for f in self.fields]
        bbox = self.optimum_bbox or _default_bbox(smooth)
        return bridge_optimum_oracle(smooth[0], smooth[1], bbox, self.optimum_resolution,
                                     self.offset_db)

    def with_overrides(self, **changes) -> "Scenario":
        new = copy.copy(self)
        for key, value in changes.items():
            setattr(new, key, value)
        new.__dict__.pop("hash", None)
        new.__dict__.pop("optimum", None)
        new.raw = dict(self.raw, _overrides={k: _plain(v) for k, v in changes.items()})
        return new


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if hasattr(v, "__dataclass_fields__"):
        return {k: _plain(getattr(v, k)) for k in v.__dataclass_fields__}
    return v


def _default_bbox(fields):
    pts = np.array([f.source for f in fields])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = max(float(np.max(hi - lo)), 1.0)
    return [(float(a - pad), float(b + pad)) for a, b in zip(lo, hi)]


def _parse_node(node: dict, dim: int, where: str) -> FieldModel:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    source = _vec(node.get("source_m"), dim, f"{where}.source_m")
    try:
        pl = PathLossParams(_num(node.get("gamma_pl", 3.0), f"{where}.gamma_pl"),
                            _num(node.get("d0_m", 1.0), f"{where}.d0_m"),
                            source,
                            _num(node.get("height_m", 0.0), f"{where}.height_m"))
        walls = []
        for j, w in enumerate(node.get("walls") or []):
            verts = np.array(w.get("vertices_m"), dtype=float)
            if verts.ndim != 2 or verts.shape[1] != dim:
                raise ConfigError(f"{where}.walls[{j}].vertices_m: expected points of dimension {dim}")
            walls.append(Wall(verts, _num(w.get("attenuation_db", 0.0), f"{where}.walls[{j}].attenuation_db")))
        fading = None
        fd = node.get("fading")
        if fd:
            fading = FadingParams(_num(fd.get("wavelength_m", 0.125), f"{where}.fading.wavelength_m"),
                                  _num(fd.get("amplitude_db", 6.0), f"{where}.fading.amplitude_db"),
                                  int(fd.get("num_waves", 32)), int(fd.get("seed", 0)), dim)
        floor = _num(node.get("epsilon_floor_m", DEFAULT_EPSILON_FLOOR), f"{where}.epsilon_floor_m")
        return FieldModel(pl, walls, fading, floor)
    except ConfigError:
        raise
    except (ValueError, TypeError, AttributeError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("scenario: expected a mapping at top level")
    dim = raw.get("dimension")
    if dim not in (1, 2, 3):
        raise ConfigError("dimension: must be 1, 2 or 3")
    obj_name = raw.get("objective", "seek")
    if obj_name not in OBJECTIVE_NAMES:
        raise ConfigError(f"objective: must be one of {sorted(OBJECTIVE_NAMES)}")
    kind = OBJECTIVE_NAMES[obj_name]
    nodes = raw.get("nodes") or []
    need = 1 if kind == SEEK else 2
    if len(nodes) != need:
        raise ConfigError(f"nodes: objective {obj_name!r} needs exactly {need} node(s)")
    fields = tuple(_parse_node(n, dim, f"nodes[{i}]") for i, n in enumerate(nodes))

    nz = _section(raw, "noise")
    mode = nz.get("motor_mode", "none")
    if mode not in MOTOR_MODES:
        raise ConfigError(f"noise.motor_mode: must be one of {MOTOR_MODES}")
    try:
        noise = NoiseSpec(_num(nz.get("sigma_meas_db", 0.0), "noise.sigma_meas_db"), mode,
                          _num(nz.get("sigma_motor", 0.0), "noise.sigma_motor"))
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from exc

    sch = _section(raw, "schedule")
    h0 = _num(sch.get("h0_m", 1.0), "schedule.h0_m")
    est = _section(raw, "estimator")
    kind_est = est.get("kind", "line_fit")
    if kind_est not in ESTIMATORS:
        raise ConfigError(f"estimator.kind: must be one of {sorted(ESTIMATORS)}")
    try:
        estimator = EstimatorConfig(kind_est, h0, int(est.get("samples_per_axis", 2)))
    except ValueError as exc:
        raise ConfigError(f"estimator: {exc}") from exc

    start = start_box = None
    if "start_m" in raw:
        start = _vec(raw["start_m"], dim, "start_m")
    elif "start_box_m" in raw:
        box = raw["start_box_m"]
        if not isinstance(box, list) or len(box) != dim:
            raise ConfigError(f"start_box_m: expected {dim} [lo, hi] pairs")
        start_box = np.array([_vec(b, 2, "start_box_m") for b in box])
    else:
        raise ConfigError("start_m: missing (or give start_box_m)")

    A = _num(sch.get("A", 0.0), "schedule.A")
    alpha = _num(sch.get("alpha", 1.0), "schedule.alpha")
    gamma_s = _num(sch.get("gamma_s", "1/6"), "schedule.gamma_s")
    a_raw = sch.get("a", "auto")
    bridge = _section(raw, "bridge")
    offset = _num(bridge.get("offset_db", DEFAULT_BRIDGE_OFFSET_DB), "bridge.offset_db")
    if a_raw == "auto":
        ref = start if start is not None else start_box.mean(axis=1)
        gnorm = _true_gradient_norm(kind, fields, ref, offset)
        if not gnorm > 0:
            raise ConfigError("schedule.a: cannot pick 'auto' gain, objective is flat at the start")
        a = gain_for_first_step(gnorm, A, alpha, _num(sch.get("first_step_m", 1.0), "schedule.first_step_m"))
    else:
        a = _num(a_raw, "schedule.a")
    try:
        schedule = GainSchedule(a, A, alpha, h0, gamma_s)
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc

    st = _section(raw, "stop")
    stop = StopRules(_num(st.get("h_min_m", 0.0), "stop.h_min_m"),
                     _num(st.get("min_step_m", 0.0), "stop.min_step_m"))
    max_iter = raw.get("max_iter", 500)
    if not isinstance(max_iter, int) or max_iter < 0:
        raise ConfigError("max_iter: must be a non-negative integer")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a non-negative integer")
    opt = _section(raw, "optimum")
    bbox = opt.get("bbox_m")
    if bbox is not None:
        bbox = [tuple(_vec(b, 2, "optimum.bbox_m")) for b in bbox]
    return Scenario(
        name=str(raw.get("name", "scenario")), dim=dim, objective_kind=kind, fields=fields,
        noise=noise, estimator=estimator, schedule=schedule, max_iter=max_iter, seed=seed,
        start=start, start_box=start_box, stop_rules=stop, offset_db=offset,
        optimum_bbox=bbox, optimum_resolution=_num(opt.get("resolution_m", 0.05), "optimum.resolution_m"),
        ensemble=_section(raw, "ensemble"), raw=raw,
    )


def _true_gradient_norm(kind, fields, x, offset, h=1e-4):
    smooth = [FieldModel(f.path_loss, f.walls, None, f.epsilon_floor) for f in fields]
    g = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        g.append((noiseless_objective(kind, smooth, x + e, offset)
                  - noiseless_objective(kind, smooth, x - e, offset)) / (2 * h))
    return float(np.linalg.norm(g))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    return scenario_from_dict(raw)


def run_seed_sequence(master_seed: int, run_index: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(run_index, stream))


def run_seed(master_seed: int, run_index: int) -> int:
    """Compact integer identifying a run's randomness (for records and logs)."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(run_index,)).generate_state(1)[0])


def build_objective(scenario: Scenario, run_index: int = 0) -> Objective:
    sensors = [Sensor(f, scenario.noise,
                      np.random.default_rng(run_seed_sequence(scenario.seed, run_index, j)))
               for j, f in enumerate(scenario.fields)]
    return Objective(scenario.objective_kind, sensors, scenario.offset_db)


def start_position(scenario: Scenario, run_index: int = 0) -> np.ndarray:
    if scenario.start is not None:
        return scenario.start.copy()
    rng = np.random.default_rng(run_seed_sequence(scenario.seed, run_index, START_STREAM))
    lo, hi = scenario.start_box[:, 0], scenario.start_box[:, 1]
    return lo + (hi - lo) * rng.random(scenario.dim)


def run_single(scenario: Scenario, run_index: int = 0, keep_probes: bool = True) -> RunRecord:
    objective = build_objective(scenario, run_index)
    record = run_fdsa(start_position(scenario, run_index), scenario.schedule, scenario.estimator,
                      objective, scenario.max_iter, scenario.stop_rules, scenario.optimum,
                      keep_probes=keep_probes)
    record.seed = run_seed(scenario.seed, run_index)
    record.scenario_hash = scenario.hash
    record.extra["run_index"] = run_index
    if scenario.objective_kind == BRIDGE:
        record.extra["offset_db"] = scenario.offset_db
    return record


def describe(scenario: Scenario) -> dict[str, Any]:
    s = scenario.schedule
    return {"name": scenario.name, "hash": scenario.hash, "objective": scenario.objective_kind,
            "estimator": scenario.estimator.kind, "a": s.a, "A": s.A, "alpha": s.alpha,
            "h0": s.h0, "gamma_s": s.gamma_s, "max_iter": scenario.max_iter, "seed": scenario.seed}
