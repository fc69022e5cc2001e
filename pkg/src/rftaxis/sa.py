"""Finite difference stochastic approximation (FDSA).

The iterate is the robot's position. Each iteration estimates the objective
gradient with probe width ``h_k`` and moves by ``-a_k * g_hat``:

    a_k = a / (k + 1 + A)**alpha
    h_k = h0 / (k + 1)**gamma_s
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .field import source_distance
from .errors import DistanceTooSmall, InsufficientEnsemble, ProbeOutOfDomain
from .gradest import EstimatorConfig, estimate

logger = logging.getLogger(__name__)

# exponents within this distance of a p-series boundary count as on it
_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class GainSchedule:
    a: float = 1.0
    A: float = 0.0
    alpha: float = 1.0
    h0: float = 1.0
    gamma_s: float = 1.0 / 6.0

    def __post_init__(self):
        for name in ("a", "A", "alpha", "h0", "gamma_s"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.A < 0:
            raise ValueError("A must be >= 0")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if self.alpha < 0 or self.gamma_s < 0:
            raise ValueError("alpha and gamma_s must be >= 0")


def gains(schedule: GainSchedule, k: int):
    if k < 0:
        raise ValueError("k must be >= 0")
    return (schedule.a / (k + 1 + schedule.A) ** schedule.alpha,
            schedule.h0 / (k + 1) ** schedule.gamma_s)


def gain_for_first_step(grad_norm: float, A: float, alpha: float, step: float = 1.0) -> float:
    """Choose ``a`` so the first update moves about ``step`` metres."""
    return step * (1.0 + A) ** alpha / grad_norm


@dataclass(frozen=True)
class ScheduleVerdict:
    positivity: bool
    a_to_zero: bool
    h_to_zero: bool
    sum_a_diverges: bool
    sum_ah_converges: bool
    sum_a2_over_h2_converges: bool
    beta_positive: bool
    normality_secondary: bool
    beta: float
    predicted_rate_exponent: float

    CONVERGENCE_FIELDS = ("positivity", "a_to_zero", "h_to_zero", "sum_a_diverges",
                          "sum_ah_converges", "sum_a2_over_h2_converges")

    @property
    def valid(self) -> bool:
        return all(getattr(self, f) for f in self.CONVERGENCE_FIELDS)

    @property
    def asymptotically_normal(self) -> bool:
        return self.valid and self.beta_positive and self.normality_secondary

    def failures(self) -> List[str]:
        names = self.CONVERGENCE_FIELDS + ("beta_positive", "normality_secondary")
        return [n for n in names if not getattr(self, n)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["valid"] = self.valid
        d["asymptotically_normal"] = self.asymptotically_normal
        return d


def _series_converges(p: float) -> bool:
    # sum 1/k**p converges iff p > 1; p == 1 is the harmonic series
    return p > 1.0 + _BOUNDARY_TOL


def check_schedule(schedule: GainSchedule) -> ScheduleVerdict:
    """Evaluate the convergence and asymptotic normality conditions.

    For power-law gains each series condition is a p-series test on the
    combined exponent.
    """
    alpha, gamma = schedule.alpha, schedule.gamma_s
    beta = alpha - 2.0 * gamma
    return ScheduleVerdict(
        positivity=schedule.a > 0 and schedule.h0 > 0,
        a_to_zero=alpha > 0,
        h_to_zero=gamma > 0,
        sum_a_diverges=not _series_converges(alpha),
        sum_ah_converges=_series_converges(alpha + gamma),
        sum_a2_over_h2_converges=_series_converges(2.0 * alpha - 2.0 * gamma),
        beta_positive=beta > _BOUNDARY_TOL,
        normality_secondary=3.0 * gamma - alpha / 2.0 >= -_BOUNDARY_TOL,
        beta=beta,
        predicted_rate_exponent=-beta / 2.0,
    )


def partial_sum_evidence(schedule: GainSchedule, n_terms: int = 10**6) -> dict:
    """Numerical look at the three series.

    For each series returns ``(S(n_terms**0.5), S(n_terms))``; a series is
    judged divergent when the later terms add more than half of the early sum.
    """
    k = np.arange(n_terms, dtype=float)
    a_k = schedule.a / (k + 1.0 + schedule.A) ** schedule.alpha
    h_k = schedule.h0 / (k + 1.0) ** schedule.gamma_s
    cut = int(round(math.sqrt(n_terms)))
    out = {}
    for name, terms in (("sum_a", a_k), ("sum_ah", a_k * h_k), ("sum_a2_over_h2", (a_k / h_k) ** 2)):
        early = float(np.sum(terms[:cut]))
        total = float(np.sum(terms))
        out[name] = {"early": early, "total": total,
                     "diverges": (total - early) > 0.5 * abs(early)}
    return out


@dataclass
class RunState:
    k: int
    x_hat: np.ndarray


@dataclass
class StopRules:
    h_min: float = 0.0
    min_step: float = 0.0


@dataclass
class RunRecord:
    """Trajectory of one run; row ``k`` holds the iterate and what was done there.

    The gradient and commanded target of the last row are NaN because no
    step was taken from it.
    """

    k: np.ndarray
    a: np.ndarray
    h: np.ndarray
    x: np.ndarray
    g: np.ndarray
    commanded: np.ndarray
    dist: np.ndarray
    termination: str
    verdict: ScheduleVerdict
    probes: Optional[list] = None
    measurements: Optional[list] = None
    seed: Optional[int] = None
    scenario_hash: Optional[str] = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.k) - 1

    @property
    def failed(self) -> bool:
        return self.termination == "failure"

    @property
    def final_position(self) -> np.ndarray:
        return self.x[-1]


def fdsa_step(state: RunState, schedule: GainSchedule, estimator: EstimatorConfig, objective):
    """One iteration: probe, estimate, move. Returns ``(new_state, estimate, commanded)``."""
    a_k, h_k = gains(schedule, state.k)
    try:
        est = estimate(estimator, objective, state.x_hat, h_k)
    except DistanceTooSmall as exc:
        raise ProbeOutOfDomain(f"probe at k={state.k} left the field domain: {exc}") from exc
    here = est.end_position
    commanded = here - a_k * est.g_hat
    achieved = objective.move(here, commanded).achieved
    for sensor in getattr(objective, "sensors", ()):
        f = sensor.field
        if source_distance(f.path_loss, achieved) < f.epsilon_floor:
            raise ProbeOutOfDomain(f"step at k={state.k} ended inside the exclusion radius")
    return RunState(state.k + 1, achieved), est, commanded


def run_fdsa(start, schedule: GainSchedule, estimator: EstimatorConfig, objective,
             max_iter: int, stop_rules: Optional[StopRules] = None,
             optimum: Optional[Sequence[float]] = None, keep_probes: bool = True) -> RunRecord:
    verdict = check_schedule(schedule)
    if not verdict.valid:
        warnings.warn(f"gain schedule violates convergence conditions: {verdict.failures()}",
                      RuntimeWarning, stacklevel=2)
    stop_rules = stop_rules or StopRules()
    state = RunState(0, np.asarray(start, dtype=float).copy())
    p = state.x_hat.shape[0]
    xs, gs, cmds, a_list, h_list = [state.x_hat], [], [], [], []
    probes, meas = ([], []) if keep_probes else (None, None)
    termination, message = "max_iter", ""
    while True:
        a_k, h_k = gains(schedule, state.k)
        a_list.append(a_k)
        h_list.append(h_k)
        if state.k >= max_iter:
            break
        if h_k < stop_rules.h_min:
            termination = "stop_rule"
            break
        try:
            new_state, est, commanded = fdsa_step(state, schedule, estimator, objective)
        except ProbeOutOfDomain as exc:
            termination, message = "failure", str(exc)
            logger.info("run failed: %s", exc)
            break
        gs.append(est.g_hat)
        cmds.append(commanded)
        if keep_probes:
            probes.append(est.probes)
            meas.append(est.measurements)
        xs.append(new_state.x_hat)
        moved = float(np.linalg.norm(new_state.x_hat - state.x_hat))
        state = new_state
        if stop_rules.min_step > 0 and moved < stop_rules.min_step:
            a_k, h_k = gains(schedule, state.k)
            a_list.append(a_k)
            h_list.append(h_k)
            termination = "stop_rule"
            break
    nan_row = np.full((1, p), np.nan)
    x = np.array(xs)
    g = np.vstack([np.array(gs).reshape(-1, p), nan_row])
    cmd = np.vstack([np.array(cmds).reshape(-1, p), nan_row])
    if optimum is not None:
        dist = np.linalg.norm(x - np.asarray(optimum, dtype=float), axis=1)
    else:
        dist = np.full(len(x), np.nan)
    return RunRecord(np.arange(len(x)), np.array(a_list), np.array(h_list), x, g, cmd, dist,
                     termination, verdict, probes, meas, message=message)


@dataclass(frozen=True)
class RateFit:
    exponent: float
    stderr: float
    intercept: float
    n_records: int


def rms_curve(records: Sequence[RunRecord], k_min: int = 0, k_max: Optional[int] = None):
    """Per-k RMS distance over the records that reached each k."""
    usable = [r for r in records if not r.failed]
    if not usable:
        raise InsufficientEnsemble("no successful records")
    longest = max(r.iterations for r in usable)
    k_max = longest if k_max is None else min(k_max, longest)
    ks = np.arange(k_min, k_max + 1)
    rms = np.empty(len(ks))
    for j, k in enumerate(ks):
        d = np.array([r.dist[k] for r in usable if r.iterations >= k])
        rms[j] = math.sqrt(float(np.mean(d * d)))
    return ks, rms


def fit_rate(records: Sequence[RunRecord], k_min: int, k_max: Optional[int] = None,
             min_records: int = 30) -> RateFit:
    """Slope of log RMS distance against log k over ``[k_min, k_max]``."""
    usable = [r for r in records if not r.failed]
    if len(usable) < min_records:
        raise InsufficientEnsemble(f"need >= {min_records} successful records, got {len(usable)}")
    if k_min < 1:
        raise ValueError("k_min must be >= 1 for a log-log fit")
    ks, rms = rms_curve(usable, k_min, k_max)
    if len(ks) < 3:
        raise InsufficientEnsemble("fit window holds fewer than three iterations")
    res = stats.linregress(np.log(ks), np.log(rms))
    return RateFit(float(res.slope), float(res.stderr), float(res.intercept), len(usable))
