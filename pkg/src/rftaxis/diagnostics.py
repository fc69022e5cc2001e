"""Monte Carlo checks of the gradient estimator against its error model."""
from __future__ import annotations

import numpy as np

from .field import FieldModel, analytic_gradient
from .gradest import (estimate_central_difference, monte_carlo_central_difference,
                      predicted_bias_bound, predicted_variance)
from .sensing import NoiseSpec, Sensor

VARIANCE_RTOL = 0.05


def gradcheck(field: FieldModel, point, sigmas=(1.0, 2.0), hs=(0.25, 0.5, 1.0),
              repeats: int = 100_000, seed: int = 0) -> list[dict]:
    """Variance and bias of central differences for each ``(sigma, h)``.

    Runs on the pure path-loss part of ``field`` (no walls, fading or
    antenna height) with motor noise off. ``empirical_var`` is the component
    furthest from the prediction.
    """
    pure = FieldModel(type(field.path_loss)(field.path_loss.gamma_pl, field.path_loss.d0,
                                            field.path_loss.source),
                      epsilon_floor=field.epsilon_floor)
    point = np.asarray(point, dtype=float)
    rows = []
    for j, sigma in enumerate(sigmas):
        for m, h in enumerate(hs):
            sensor = Sensor(pure, NoiseSpec(sigma, "none", 0.0),
                            np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j, m))))
            est = monte_carlo_central_difference(sensor, point, h, repeats)
            var = est.var(axis=0, ddof=1)
            pred = predicted_variance(sigma, h)
            worst = var[np.argmax(np.abs(var - pred))] if pred > 0 else var.max()
            clean = Sensor(pure, NoiseSpec(0.0, "none", 0.0))
            g = estimate_central_difference(clean, point, h).g_hat
            bias = float(np.max(np.abs(g - analytic_gradient(pure, point))))
            bound = predicted_bias_bound(pure.path_loss, point, h, pure.epsilon_floor)
            rows.append({"sigma": sigma, "h": h, "predicted_var": pred,
                         "empirical_var": float(worst), "bias_bound": bound,
                         "empirical_bias": bias})
    return rows


def gradcheck_passes(rows) -> bool:
    for r in rows:
        if r["predicted_var"] > 0 and abs(r["empirical_var"] / r["predicted_var"] - 1) > VARIANCE_RTOL:
            return False
        if r["empirical_bias"] > r["bias_bound"]:
            return False
    return True
