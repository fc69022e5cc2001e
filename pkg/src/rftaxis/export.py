"""CSV / JSON writers.

Numbers are written with 12 significant digits. Files are written to a
temporary sibling and renamed, so a failed export never leaves a partial file.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientEnsemble
from .field import FieldModel, eval_field, eval_smooth
from .sa import RunRecord

FLOAT_FMT = ".12g"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), FLOAT_FMT)


def _atomic_write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def trajectory_csv(record: RunRecord) -> str:
    p = record.x.shape[1]
    header = ["k", "ak", "hk"] + [f"x{i + 1}" for i in range(p)] + [f"gx{i + 1}" for i in range(p)] + ["dist"]
    rows = (
        [record.k[j], record.a[j], record.h[j], *record.x[j], *record.g[j], record.dist[j]]
        for j in range(len(record.k))
    )
    return _csv(header, rows)


def write_trajectory(record: RunRecord, path) -> Path:
    return _atomic_write(path, trajectory_csv(record))


def summary_json(summary) -> str:
    return json.dumps(_jsonable(summary.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary(summary, path) -> Path:
    if summary is None or summary.n_runs == 0:
        raise InsufficientEnsemble("empty ensemble; nothing to export")
    return _atomic_write(path, summary_json(summary))


def read_summary(path):
    from .ensemble import EnsembleSummary

    return EnsembleSummary.from_dict(json.loads(Path(path).read_text()))


def write_finals(records: Sequence[RunRecord], path) -> Path:
    if not records:
        raise InsufficientEnsemble("empty ensemble; nothing to export")
    p = records[0].x.shape[1]
    header = ["run", "seed", "termination", "iterations"] + [f"x{i + 1}" for i in range(p)] + ["dist"]
    lines = [",".join(header)]
    for r in records:
        vals = [fmt(r.extra.get("run_index", -1)), str(r.seed), r.termination, str(r.iterations)]
        vals += [fmt(v) for v in r.x[-1]] + [fmt(r.dist[-1])]
        lines.append(",".join(vals))
    return _atomic_write(path, "\n".join(lines) + "\n")


def write_curve(summary, path) -> Path:
    if not summary.curve:
        raise InsufficientEnsemble("no successful runs; no curve to export")
    rows = ([c["k"], c["n"], c["rms"], c["median"], c["q10"], c["q90"]] for c in summary.curve)
    return _atomic_write(path, _csv(["k", "n", "rms", "median", "q10", "q90"], rows))


def field_raster(model: FieldModel, bbox, resolution: float, smooth: bool = False):
    """Grid points and field values; points inside the exclusion radius are dropped."""
    axes = [np.arange(lo, hi + 0.5 * resolution, resolution) for lo, hi in bbox]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    diff = pts - model.source
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff) + model.path_loss.height**2)
    pts = pts[dist >= model.epsilon_floor]
    values = (eval_smooth if smooth else eval_field)(model, pts)
    return pts, values


def write_field(model: FieldModel, bbox, resolution: float, path, smooth: bool = False) -> Path:
    pts, values = field_raster(model, bbox, resolution, smooth)
    names = ["x", "y", "z"][: pts.shape[1]]
    return _atomic_write(path, _csv(names + ["f_db"], (list(p) + [v] for p, v in zip(pts, values))))
