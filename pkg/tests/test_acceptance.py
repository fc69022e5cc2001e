"""End-to-end acceptance checks, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from rftaxis import scenario_path
from rftaxis.ensemble import run_ensemble
from rftaxis.field import FieldModel, analytic_gradient, free_space
from rftaxis.gradest import (estimate_central_difference, estimate_line_fit,
                             monte_carlo_central_difference, predicted_variance)
from rftaxis.objectives import bridge_optimum_oracle
from rftaxis.sa import GainSchedule, check_schedule, partial_sum_evidence
from rftaxis.scenario import load_scenario
from rftaxis.sensing import NoiseSpec, Sensor, make_sensor

pytestmark = pytest.mark.slow


def _scenario(name):
    return load_scenario(scenario_path(name))


def angular_error(estimate, truth):
    cos = estimate @ truth / (np.linalg.norm(estimate) * np.linalg.norm(truth))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.mark.criterion(1, "gradient variance law sigma^2/(2h^2) within 5%")
def test_variance_law(record_property):
    model = free_space((0.0, 0.0), 3.0)
    x = np.array([5.0, 0.0])
    worst = 0.0
    with Clock() as clock:
        for j, sigma in enumerate((1.0, 2.0)):
            for m, h in enumerate((0.25, 0.5, 1.0)):
                sensor = Sensor(model, NoiseSpec(sigma, "none"),
                                np.random.default_rng(np.random.SeedSequence(101, spawn_key=(j, m))))
                g = monte_carlo_central_difference(sensor, x, h, 100_000)
                rel = np.abs(g.var(axis=0, ddof=1) / predicted_variance(sigma, h) - 1)
                worst = max(worst, float(rel.max()))
    record_property("max_rel_err", f"{worst:.4f}")
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert worst <= 0.05
    assert clock.elapsed < 30


@pytest.mark.criterion(2, "central difference bias is O(h^2), slope 2.0 +- 0.2")
def test_bias_order(record_property):
    with Clock() as clock:
        model = free_space((0.0, 0.0), 3.0)
        sensor = make_sensor(model)
        x = np.array([5.0, 0.0])
        hs = np.array([0.2, 0.4, 0.8, 1.6])
        truth = analytic_gradient(model, x)
        bias = [np.linalg.norm(estimate_central_difference(sensor, x, h).g_hat - truth) for h in hs]
        slope = stats.linregress(np.log(hs), np.log(bias)).slope
    record_property("slope", f"{slope:.4f}")
    assert abs(slope - 2.0) <= 0.2
    assert clock.elapsed < 10


@pytest.mark.criterion(3, "FDSA seek: median final distance < 2 m over 200 runs")
def test_fdsa_convergence(record_property):
    sc = _scenario("seek_free_space")
    assert sc.max_iter == 500 and sc.estimator.kind == "line_fit"
    assert sc.noise == NoiseSpec(2.0, "vectorial", 0.02)
    assert np.linalg.norm(sc.start - sc.optimum) == 20.0
    with Clock() as clock:
        records, summary = run_ensemble(sc, 200)
    record_property("median_m", f"{summary.final_median:.3f}")
    record_property("failed", summary.n_failed)
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert summary.final_median < 2.0
    assert clock.elapsed < 120


@pytest.mark.criterion(4, "rate exponent -1/3 +- 0.15, gamma_s=0.3 strictly shallower")
def test_asymptotic_rate(record_property):
    base, slow = _scenario("seek_rate"), _scenario("seek_rate_gamma03")
    assert base.max_iter == slow.max_iter == 2000
    assert (base.schedule.alpha, slow.schedule.alpha) == (1.0, 1.0)
    assert base.schedule.gamma_s == pytest.approx(1 / 6) and slow.schedule.gamma_s == 0.3
    with Clock() as clock:
        _, s_base = run_ensemble(base, 200)
        _, s_slow = run_ensemble(slow, 200)
    assert s_base.rate_window == (200, 2000)
    record_property("exponent", f"{s_base.rate_exponent:.4f}+-{s_base.rate_stderr:.4f}")
    record_property("exponent_gamma03", f"{s_slow.rate_exponent:.4f}+-{s_slow.rate_stderr:.4f}")
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert abs(s_base.rate_exponent + 1 / 3) <= 0.15
    assert s_slow.rate_exponent > s_base.rate_exponent
    assert clock.elapsed < 600


@pytest.mark.criterion(5, "line fit mitigates fading; central differences at h=0.05 fail")
def test_fading_mitigation(record_property):
    lf_sc = _scenario("seek_fading_line_fit")
    cd_sc = _scenario("seek_fading_central")
    fading = lf_sc.fields[0].fading
    assert (fading.amplitude_db, fading.wavelength) == (6.0, 0.125)
    with Clock() as clock:
        field = lf_sc.fields[0]
        smooth = FieldModel(field.path_loss, epsilon_floor=field.epsilon_floor)
        sensor = make_sensor(field)
        rng = np.random.default_rng(lf_sc.seed)
        n = 1000
        r = rng.uniform(5.0, 15.0, n)
        theta = rng.uniform(0.0, 2 * np.pi, n)
        points = field.source + np.c_[r * np.cos(theta), r * np.sin(theta)]
        err_lf, err_cd = np.empty(n), np.empty(n)
        for i, p in enumerate(points):
            truth = analytic_gradient(smooth, p)
            err_lf[i] = angular_error(estimate_line_fit(sensor, p, 0.5, 21).g_hat, truth)
            err_cd[i] = angular_error(estimate_central_difference(sensor, p, 0.5).g_hat, truth)
        wins = int(np.sum(err_lf < err_cd))
        ties = int(np.sum(err_lf == err_cd))
        p_value = stats.binomtest(wins, n - ties, 0.5, alternative="greater").pvalue

        assert cd_sc.estimator.kind == "central_difference" and cd_sc.estimator.h == 0.05
        assert cd_sc.schedule.gamma_s == 0.0
        _, s_cd = run_ensemble(cd_sc, 100)
        _, s_lf = run_ensemble(lf_sc, 100)
    record_property("mean_err_deg", f"lf={np.degrees(err_lf.mean()):.1f},cd={np.degrees(err_cd.mean()):.1f}")
    record_property("sign_test_p", f"{p_value:.2g}")
    record_property("median_cd_m", f"{s_cd.final_median:.2f}")
    record_property("median_lf_m", f"{s_lf.final_median:.3f}")
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert err_lf.mean() < err_cd.mean()
    assert p_value < 0.01
    assert s_cd.final_median > 5.0
    assert s_lf.final_median < 2.0
    assert clock.elapsed < 300


@pytest.mark.criterion(6, "bridge: oracle at midpoint, median < 2 m, two-stage >= 80%")
def test_bridge(record_property):
    sc = _scenario("bridge_symmetric")
    np.testing.assert_array_equal([f.source for f in sc.fields], [[-5.0, 0.0], [5.0, 0.0]])
    assert sc.noise.sigma_meas == 2.0
    with Clock() as clock:
        left = free_space((-5.0, 0.0), 3.0)
        right = free_space((5.0, 0.0), 3.0)
        best = bridge_optimum_oracle(left, right, [(-10.0, 10.0), (-10.0, 10.0)], 0.05)
        _, summary = run_ensemble(sc, 100)
    frac = summary.extra["two_stage_fraction"]
    record_property("argmin", f"({best[0]:.3g},{best[1]:.3g})")
    record_property("median_m", f"{summary.final_median:.3f}")
    record_property("two_stage", f"{frac:.2f}")
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert np.all(np.abs(best) <= 0.05)
    assert summary.final_median < 2.0
    assert frac >= 0.8
    assert clock.elapsed < 180


# alpha, gamma_s -> (sum_a diverges, sum_ah converges, sum_a2/h2 converges, valid)
SCHEDULE_BATTERY = [
    ((1.0, 1 / 6), (True, True, True, True)),
    ((1.0, 0.5), (True, True, False, False)),
    ((0.6, 0.1), (True, False, False, False)),
    ((1.5, 0.2), (False, True, True, False)),
    ((0.8, 0.1), (True, False, True, False)),
    ((1.0, 0.0), (True, False, True, False)),
    ((0.9, 0.3), (True, True, True, True)),
    ((1.0, 0.12), (True, True, True, True)),
]


@pytest.mark.criterion(7, "schedule checker truth table and 10^6-term partial sums")
def test_schedule_truth_table(record_property):
    mismatches = []
    with Clock() as clock:
        for (alpha, gamma), want in SCHEDULE_BATTERY:
            sched = GainSchedule(1.0, 0.0, alpha, 1.0, gamma)
            v = check_schedule(sched)
            got = (v.sum_a_diverges, v.sum_ah_converges, v.sum_a2_over_h2_converges, v.valid)
            ev = partial_sum_evidence(sched, 10**6)
            numeric = (ev["sum_a"]["diverges"], not ev["sum_ah"]["diverges"],
                       not ev["sum_a2_over_h2"]["diverges"])
            if got != want or numeric != want[:3]:
                mismatches.append((alpha, gamma, got, numeric))
    record_property("mismatches", len(mismatches))
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert not mismatches
    assert clock.elapsed < 20


def _cli(args, out):
    env = dict(os.environ, RF_TAXIS_OUTPUT_DIR=str(out))
    subprocess.run([sys.executable, "-m", "rftaxis.cli", *args], env=env, check=True,
                   capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.criterion(8, "run and mc outputs byte-identical across invocations and workers 1/8")
def test_determinism(tmp_path, record_property):
    config = str(scenario_path("seek_free_space"))
    with Clock() as clock:
        run_a = _cli(["run", config], tmp_path / "run_a")
        run_b = _cli(["run", config], tmp_path / "run_b")
        mc_args = ["mc", config, "--runs", "16", "--max-iter", "200"]
        mc_1a = _cli(mc_args + ["--workers", "1"], tmp_path / "mc_1a")
        mc_1b = _cli(mc_args + ["--workers", "1"], tmp_path / "mc_1b")
        mc_8 = _cli(mc_args + ["--workers", "8"], tmp_path / "mc_8")
    record_property("files", len(run_a) + len(mc_1a))
    record_property("seconds", f"{clock.elapsed:.1f}")
    assert run_a and run_a == run_b
    assert len(mc_1a) == 3 and mc_1a == mc_1b == mc_8
    assert clock.elapsed < 60
