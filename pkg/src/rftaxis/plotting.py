"""Figures written next to the CSV/JSON reports.

Only the non-interactive Agg backend is used; every function saves a PNG
and closes its figure.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated renders byte-identical
_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_trajectory(record, fields, path, title: str = ""):
    """Robot path over the plane with the sources marked (2-D scenarios)."""
    fig, ax = plt.subplots(figsize=(6, 5))
    x = record.x
    if x.shape[1] == 1:
        ax.plot(record.k, x[:, 0], lw=0.8, color="k")
        ax.set_xlabel("iteration k")
        ax.set_ylabel("x [m]")
    else:
        ax.plot(x[:, 0], x[:, 1], lw=0.8, color="k", label="iterates")
        ax.plot(x[0, 0], x[0, 1], "o", color="tab:blue", label="start")
        for f in fields:
            ax.plot(f.source[0], f.source[1], "x", color="tab:red", ms=10, mew=2)
            for w in f.walls:
                ax.plot(w.vertices[:, 0], w.vertices[:, 1], color="0.4", lw=2)
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(loc="best", fontsize=8)
    ax.set_title(title or f"termination: {record.termination}")
    return _finish(fig, path)


def plot_distance(record, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    k = np.maximum(record.k, 1)
    ax.loglog(k, record.dist, lw=0.8)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("distance to optimum [m]")
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def plot_ensemble(summary, path):
    """RMS / median / 10-90% band of the distance with the fitted rate line."""
    curve = summary.curve
    k = np.array([c["k"] for c in curve], dtype=float)
    keep = k >= 1
    k = k[keep]
    rms = np.array([c["rms"] for c in curve])[keep]
    med = np.array([c["median"] for c in curve])[keep]
    lo = np.array([c["q10"] for c in curve])[keep]
    hi = np.array([c["q90"] for c in curve])[keep]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(k, lo, hi, color="tab:blue", alpha=0.2, lw=0, label="10-90 %")
    ax.loglog(k, med, color="tab:blue", lw=1, label="median")
    ax.loglog(k, rms, color="k", lw=1, label="RMS")
    if summary.rate_exponent is not None and summary.rate_window:
        k0 = summary.rate_window[0]
        k1 = summary.rate_window[1] or k[-1]
        kk = np.array([k0, k1], dtype=float)
        ref = rms[np.searchsorted(k, k0)]
        ax.loglog(kk, ref * (kk / k0) ** summary.rate_exponent, "--", color="tab:red",
                  label=f"fit k^{summary.rate_exponent:.3f}")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("distance to optimum [m]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_field(points, values, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    if points.shape[1] == 1:
        ax.plot(points[:, 0], values, lw=0.8)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("f [dB]")
    else:
        sc = ax.scatter(points[:, 0], points[:, 1], c=values, s=4, marker="s", cmap="viridis")
        fig.colorbar(sc, ax=ax, label="f [dB]")
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
    return _finish(fig, path)


def plot_gradcheck(rows, path):
    """Predicted against empirical estimator variance, one marker per (sigma, h)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    pred = np.array([r["predicted_var"] for r in rows])
    emp = np.array([r["empirical_var"] for r in rows])
    ax.loglog(pred, emp, "o")
    lim = [pred.min() * 0.8, pred.max() * 1.25]
    ax.loglog(lim, lim, "k--", lw=0.8)
    ax.set_xlabel("predicted variance [dB^2/m^2]")
    ax.set_ylabel("empirical variance [dB^2/m^2]")
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)
