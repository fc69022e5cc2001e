"""Gradient-based taxis over simulated wireless signal strength fields."""
from importlib import resources

from .errors import (ConfigError, DegenerateFit, DistanceTooSmall, InsufficientEnsemble,
                     NotSmoothlyDifferentiable, ProbeOutOfDomain, ZeroNoise)
from .field import (FadingParams, FieldModel, PathLossParams, Wall, analytic_gradient,
                    eval_fading, eval_field, eval_path_loss, eval_shadowing, free_space,
                    path_loss_derivatives)
from .gradest import (EstimatorConfig, GradientEstimate, estimate, estimate_central_difference,
                      estimate_line_fit, predicted_bias_bound, predicted_variance, snr)
from .objectives import Objective, bridge_optimum_oracle, eval_objective
from .sa import GainSchedule, RunRecord, check_schedule, fdsa_step, fit_rate, gains, run_fdsa
from .sensing import NoiseSpec, Sensor

__version__ = "0.1.0"


def scenario_path(name: str):
    """Path of a scenario file shipped with the package, e.g. ``"seek_free_space"``."""
    return resources.files(__name__) / "scenarios" / f"{name}.yaml"
