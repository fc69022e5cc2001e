"""Command line interface: ``rf-taxis {run,mc,check-schedule,field,gradcheck}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 failed check (``gradcheck`` and an invalid ``check-schedule`` verdict).
Outputs go to ``--out``, else ``$RF_TAXIS_OUTPUT_DIR``, else ``./rf_taxis_out``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

from . import export
from .diagnostics import gradcheck, gradcheck_passes
from .errors import ConfigError
from .sa import GainSchedule, check_schedule
from .scenario import describe, load_scenario, run_single

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
OUTPUT_ENV = "RF_TAXIS_OUTPUT_DIR"


def _outdir(args) -> Path:
    return Path(args.out or os.environ.get(OUTPUT_ENV) or "rf_taxis_out")


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_overrides(seed=args.seed)
    if args.max_iter is not None:
        scenario = scenario.with_overrides(max_iter=args.max_iter)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        record = run_single(scenario, args.run_index)
    out = _outdir(args)
    path = export.write_trajectory(record, out / f"{scenario.name}_trajectory.csv")
    print(f"scenario {scenario.name} [{scenario.hash}] seed={scenario.seed}")
    print(f"termination={record.termination} iterations={record.iterations} "
          f"final_dist={record.dist[-1]:.6g}")
    if not record.verdict.valid:
        print(f"warning: schedule fails {', '.join(record.verdict.failures())}")
    print(f"wrote {path}")
    if args.plot:
        from . import plotting

        print(f"wrote {plotting.plot_trajectory(record, scenario.fields, out / f'{scenario.name}_trajectory.png')}")
        print(f"wrote {plotting.plot_distance(record, out / f'{scenario.name}_distance.png')}")
    if record.failed:
        print(f"run failed: {record.message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_mc(args) -> int:
    from .ensemble import run_ensemble

    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_overrides(seed=args.seed)
    if args.max_iter is not None:
        scenario = scenario.with_overrides(max_iter=args.max_iter)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        records, summary = run_ensemble(scenario, args.runs, args.workers)
    out = _outdir(args)
    written = [export.write_summary(summary, out / f"{scenario.name}_summary.json"),
               export.write_finals(records, out / f"{scenario.name}_finals.csv")]
    if summary.curve:
        written.append(export.write_curve(summary, out / f"{scenario.name}_curve.csv"))
    print(f"scenario {scenario.name} [{scenario.hash}] runs={summary.n_runs} failed={summary.n_failed}")
    print(f"median final distance={summary.final_median:.6g} "
          f"success_fraction={summary.success_fraction:.4g}")
    if summary.rate_exponent is not None:
        print(f"rate exponent={summary.rate_exponent:.4f} +- {summary.rate_stderr:.4f}")
    if "two_stage_fraction" in summary.extra:
        print(f"two-stage fraction={summary.extra['two_stage_fraction']:.4g}")
    if args.plot and summary.curve:
        from . import plotting

        written.append(plotting.plot_ensemble(summary, out / f"{scenario.name}_ensemble.png"))
    for p in written:
        print(f"wrote {p}")
    return EXIT_RUNTIME if summary.n_failed == summary.n_runs else EXIT_OK


def cmd_check_schedule(args) -> int:
    try:
        schedule = GainSchedule(args.a, args.A, args.alpha, args.h0, args.gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    verdict = check_schedule(schedule)
    d = verdict.to_dict()
    width = max(len(k) for k in d)
    for key, value in d.items():
        if isinstance(value, bool):
            value = "pass" if value else "FAIL"
        elif isinstance(value, float):
            value = f"{value:.6g}"
        print(f"{key:<{width}}  {value}")
    return EXIT_OK if verdict.valid else EXIT_CHECK


def cmd_field(args) -> int:
    scenario = load_scenario(args.config)
    if not 0 <= args.node < len(scenario.fields):
        raise ConfigError(f"--node: scenario has {len(scenario.fields)} node(s)")
    model = scenario.fields[args.node]
    bbox = args.bbox
    if len(bbox) != 2 * scenario.dim:
        raise ConfigError(f"--bbox: expected {2 * scenario.dim} numbers for a {scenario.dim}-D scenario")
    bbox = [(bbox[2 * i], bbox[2 * i + 1]) for i in range(scenario.dim)]
    out = _outdir(args)
    path = export.write_field(model, bbox, args.res, out / f"{scenario.name}_field.csv", args.smooth)
    print(f"wrote {path}")
    if args.plot:
        from . import plotting

        pts, vals = export.field_raster(model, bbox, args.res, args.smooth)
        print(f"wrote {plotting.plot_field(pts, vals, out / f'{scenario.name}_field.png')}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    scenario = load_scenario(args.config)
    cfg = scenario.raw.get("gradcheck") or {}
    point = cfg.get("point_m")
    if point is None:
        offset = [5.0] + [0.0] * (scenario.dim - 1)
        point = (scenario.fields[0].source + offset).tolist()
    rows = gradcheck(scenario.fields[0], point, cfg.get("sigmas_db", (1.0, 2.0)),
                     cfg.get("h_m", (0.25, 0.5, 1.0)),
                     args.repeats or int(cfg.get("repeats", 100_000)), scenario.seed)
    out = _outdir(args)
    cols = ["sigma", "h", "predicted_var", "empirical_var", "bias_bound", "empirical_bias"]
    text = export._csv(cols, ([r[c] for c in cols] for r in rows))
    path = export._atomic_write(out / f"{scenario.name}_gradcheck.csv", text)
    sys.stdout.write(text)
    print(f"wrote {path}")
    if args.plot:
        from . import plotting

        print(f"wrote {plotting.plot_gradcheck(rows, out / f'{scenario.name}_gradcheck.png')}")
    ok = gradcheck_passes(rows)
    print("gradcheck", "passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_CHECK


class _Parser(argparse.ArgumentParser):
    # bad command lines are configuration errors, not runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rf-taxis", description="Gradient-based taxis on simulated signal strength fields")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, plot=True):
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./rf_taxis_out)")
        if plot:
            p.add_argument("--plot", action="store_true", help="also render PNG figures")

    p = sub.add_parser("run", help="single FDSA run, trajectory CSV")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--run-index", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mc", help="Monte Carlo ensemble, summary JSON + curve CSV")
    p.add_argument("config")
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)
    common(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("check-schedule", help="check gain schedule conditions")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0 / 6.0)
    p.add_argument("--a", dest="a", type=float, default=1.0)
    p.add_argument("--A", dest="A", type=float, default=0.0)
    p.add_argument("--h0", type=float, default=1.0)
    p.set_defaults(func=cmd_check_schedule)

    p = sub.add_parser("field", help="field raster CSV")
    p.add_argument("config")
    p.add_argument("--bbox", type=_floats, required=True, help="xmin,xmax,ymin,ymax[,zmin,zmax]")
    p.add_argument("--res", type=float, default=0.1)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--smooth", action="store_true", help="omit the fading term")
    common(p)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("gradcheck", help="estimator variance / bias Monte Carlo")
    p.add_argument("config")
    p.add_argument("--repeats", type=int)
    common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
