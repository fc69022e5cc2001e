"""Monte Carlo ensembles of independent runs and their statistics."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence

import numpy as np

from .errors import InsufficientEnsemble
from .objectives import BRIDGE
from .sa import RunRecord, fit_rate
from .scenario import Scenario, run_single

logger = logging.getLogger(__name__)


@dataclass
class EnsembleSummary:
    n_runs: int
    n_failed: int
    success_threshold: float
    success_fraction: float
    final_median: float
    curve: List[dict]
    rate_exponent: Optional[float] = None
    rate_stderr: Optional[float] = None
    rate_window: Optional[tuple] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "success_threshold": self.success_threshold,
            "success_fraction": self.success_fraction,
            "final_median": self.final_median,
            "rate_exponent": self.rate_exponent,
            "rate_stderr": self.rate_stderr,
            "rate_window": list(self.rate_window) if self.rate_window else None,
            "curve": self.curve,
        }
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSummary":
        known = {"n_runs", "n_failed", "success_threshold", "success_fraction", "final_median",
                 "rate_exponent", "rate_stderr", "rate_window", "curve"}
        window = d.get("rate_window")
        return cls(d["n_runs"], d["n_failed"], d["success_threshold"], d["success_fraction"],
                   d["final_median"], d["curve"], d.get("rate_exponent"), d.get("rate_stderr"),
                   tuple(window) if window else None,
                   {k: v for k, v in d.items() if k not in known})


def _run_one(scenario: Scenario, run_index: int) -> RunRecord:
    return run_single(scenario, run_index, keep_probes=False)


def run_records(scenario: Scenario, n_runs: int, workers: int = 1) -> List[RunRecord]:
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    job = partial(_run_one, scenario)
    if workers <= 1:
        return [job(i) for i in range(n_runs)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, n_runs // (4 * workers))
        return list(pool.map(job, range(n_runs), chunksize=chunk))


def distance_curve(records: Sequence[RunRecord]) -> List[dict]:
    usable = [r for r in records if not r.failed]
    if not usable:
        return []
    longest = max(r.iterations for r in usable)
    curve = []
    for k in range(longest + 1):
        d = np.array([r.dist[k] for r in usable if r.iterations >= k])
        q10, med, q90 = np.quantile(d, [0.1, 0.5, 0.9])
        curve.append({"k": k, "n": int(len(d)), "rms": math.sqrt(float(np.mean(d * d))),
                      "median": float(med), "q10": float(q10), "q90": float(q90)})
    return curve


def summarize(records: Sequence[RunRecord], success_threshold: float = 2.0,
              rate_k_min: Optional[int] = None, rate_k_max: Optional[int] = None,
              fields=None, objective_kind: Optional[str] = None) -> EnsembleSummary:
    if not records:
        raise InsufficientEnsemble("empty ensemble")
    finals = np.array([r.dist[-1] for r in records])
    failed = np.array([r.failed for r in records])
    ok = ~failed
    success = float(np.mean(ok & (finals < success_threshold)))
    final_median = float(np.median(finals[ok])) if ok.any() else float("nan")
    summary = EnsembleSummary(len(records), int(failed.sum()), success_threshold, success,
                              final_median, distance_curve(records))
    if rate_k_min is not None:
        try:
            fit = fit_rate(records, rate_k_min, rate_k_max)
            summary.rate_exponent, summary.rate_stderr = fit.exponent, fit.stderr
            summary.rate_window = (rate_k_min, rate_k_max)
        except InsufficientEnsemble as exc:
            logger.info("rate fit skipped: %s", exc)
    if objective_kind == BRIDGE and fields is not None:
        summary.extra["two_stage_fraction"] = two_stage_fraction(records, fields[0].source,
                                                                 fields[1].source)
    return summary


def run_ensemble(scenario: Scenario, n_runs: Optional[int] = None, workers: int = 1):
    """Run ``n_runs`` seeded runs and summarize them.

    Run ``i`` always uses the same random streams, so the result does not
    depend on ``workers``.
    """
    cfg = scenario.ensemble
    n_runs = int(cfg.get("runs", 100)) if n_runs is None else n_runs
    records = run_records(scenario, n_runs, workers)
    summary = summarize(records, float(cfg.get("success_threshold_m", 2.0)),
                        cfg.get("rate_k_min"), cfg.get("rate_k_max"),
                        scenario.fields, scenario.objective_kind)
    summary.extra["scenario_hash"] = scenario.hash
    summary.extra["seed"] = scenario.seed
    return records, summary


def settle_index(values: np.ndarray, threshold: float) -> Optional[int]:
    """First index from which ``values`` stays below ``threshold`` to the end."""
    above = np.flatnonzero(values >= threshold)
    if len(above) == 0:
        return 0
    last = int(above[-1])
    return None if last == len(values) - 1 else last + 1


def bridge_track_distances(record: RunRecord, node1, node2):
    """Cross-track (to the perpendicular bisector) and along-track (to the midpoint) distances."""
    node1 = np.asarray(node1, dtype=float)
    node2 = np.asarray(node2, dtype=float)
    mid = 0.5 * (node1 + node2)
    axis = (node2 - node1) / np.linalg.norm(node2 - node1)
    rel = record.x - mid
    cross = np.abs(rel @ axis)
    along = np.linalg.norm(rel - np.outer(rel @ axis, axis), axis=1)
    return cross, along


def two_stage(record: RunRecord, node1, node2, threshold: float = 1.0) -> bool:
    """Does the run settle onto the bisector strictly before it settles at the midpoint?"""
    cross, along = bridge_track_distances(record, node1, node2)
    kc = settle_index(cross, threshold)
    ka = settle_index(along, threshold)
    if kc is None or ka is None:
        return False
    return kc < ka


def two_stage_fraction(records: Sequence[RunRecord], node1, node2, threshold: float = 1.0) -> float:
    usable = [r for r in records if not r.failed]
    if not usable:
        return float("nan")
    return float(np.mean([two_stage(r, node1, node2, threshold) for r in usable]))
