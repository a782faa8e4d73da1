"""``levy-isamp`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical or solver error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import tables
from .config import PRESETS, U64_MAX, load_config, parse_config, preset
from .errors import ConfigError, LevyISampError
from .mc_engine import price_importance, price_standard, sweep_theta
from .measures import TiltMeasure
from .optimal_tilt import TiltSolution, solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def parse_grid(spec: str) -> np.ndarray:
    """``a:b:step`` -> inclusive grid ``a, a+step, ..., b``."""
    try:
        a, b, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--grid: expected a:b:step, got {spec!r}") from None
    if step <= 0 or b < a:
        raise ConfigError("--grid: need step > 0 and a <= b")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="FILE", help="JSON run configuration")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in parameter set")
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--workers", type=_positive_int,
                        help="worker threads (default: $LEVY_ISAMP_WORKERS or 1)")
    common.add_argument("--n-samples", type=_positive_int, dest="n_samples", help="paths per estimator")
    common.add_argument("--output", choices=("json", "csv"), help="output format")

    p = _Parser(prog="levy-isamp", description="Importance sampling for exponential Levy models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("optimize", parents=[common], help="solve for the optimal tilt")
    pr = sub.add_parser("price", parents=[common], help="Monte Carlo price")
    pr.add_argument("--tilt", default="auto", metavar="auto|none|FILE",
                    help="auto: solve first; none: plain Monte Carlo; FILE: tilt JSON")
    pr.add_argument("--timing", action="store_true", help="include wall time in the report")
    sw = sub.add_parser("sweep", parents=[common], help="IS variance over constant tilts")
    sw.add_argument("--grid", default="-3.5:0:0.25", metavar="a:b:step")
    tb = sub.add_parser("table", parents=[common], help="reproduce a reference table")
    tb.add_argument("which", choices=tables.TABLES)
    return p


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("LEVY_ISAMP_WORKERS")
    if env:
        try:
            return _positive_int(env)
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"LEVY_ISAMP_WORKERS: {exc}") from None
    return None


def _run_config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config(preset(args.preset or "vg-1d"))
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.n_samples is not None:
        if args.n_samples < 2:
            raise ConfigError("--n-samples: need at least 2")
        over["n_samples"] = args.n_samples
    w = _workers(args)
    if w is not None:
        over["workers"] = w
    if over:
        cfg = replace(cfg, **over)
    return cfg


def _load_tilt(path, dim, horizon) -> TiltMeasure:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"--tilt {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--tilt {path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        if "measure" in data and "solver" in data:
            measure = TiltSolution.from_dict(data).measure
        elif "measure_used" in data:
            measure = TiltMeasure.from_dict(data["measure_used"])
        else:
            measure = TiltMeasure.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"--tilt {path}: not a tilt measure ({exc})") from None
    if measure.dim != dim:
        raise ConfigError(f"--tilt {path}: measure has dimension {measure.dim}, model has {dim}")
    if not np.isclose(measure.horizon, horizon):
        raise ConfigError(f"--tilt {path}: horizon {measure.horizon} does not match maturity {horizon}")
    return measure


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_optimize(cfg, fmt="json") -> str:
    sol = solve(cfg.model, cfg.payoff, asian_solver=cfg.asian_solver)
    if fmt == "csv":
        n = sol.measure.dim
        head = ["time"] + [f"weight_{i + 1}" for i in range(n)]
        body = [[repr(float(t))] + [repr(float(x)) for x in w] for t, w in zip(sol.measure.times, sol.measure.weights)]
        return _csv(head, body)
    return _json(sol.to_dict())


def cmd_price(cfg, tilt="auto", fmt="json", timing=False) -> str:
    kw = cfg.mc_kwargs()
    if tilt == "none":
        rep = price_standard(cfg.model, cfg.payoff, cfg.grid_cells, cfg.n_samples, cfg.seed, **kw)
    else:
        if tilt == "auto":
            measure = solve(cfg.model, cfg.payoff, asian_solver=cfg.asian_solver).measure
        else:
            measure = _load_tilt(tilt, cfg.model.dim, cfg.payoff.maturity)
        rep = price_importance(cfg.model, cfg.payoff, measure, cfg.grid_cells, cfg.n_samples,
                               cfg.seed, **kw)
    d = rep.to_dict(include_timing=timing)
    if fmt == "csv":
        keys = ["estimate", "std_error", "sample_variance", "n_samples", "seed"]
        return _csv(keys, [[repr(d[k]) if isinstance(d[k], float) else d[k] for k in keys]])
    return _json(d)


def cmd_sweep(cfg, grid, fmt="csv") -> str:
    if cfg.model.dim != 1:
        raise ConfigError("sweep: needs a single-asset model")
    if not cfg.payoff.kind.european:
        raise ConfigError("sweep: constant tilts apply to European payoffs")
    pts = sweep_theta(cfg.model, cfg.payoff, grid, cfg.grid_cells, cfg.n_samples, cfg.seed,
                      **cfg.mc_kwargs())
    if fmt == "json":
        return _json([{"theta": p.theta, "variance": p.variance, "stderr": p.std_error} for p in pts])
    return _csv(["theta", "variance", "stderr"], [[repr(float(p.theta)), repr(float(p.variance)), repr(float(p.std_error))] for p in pts])


def cmd_table(which, n_samples=100_000, seed=0, workers=None, fmt="csv") -> str:
    res = tables.run_table(which, n_samples, seed, workers=workers or 1)
    recs = []
    for r in res:
        th = r.theta_star
        recs.append({
            "section": r.row.section,
            "T": r.row.maturity,
            "K": r.row.strike,
            "theta_star": None if th is None else (float(th[0]) if th.size == 1 else th.tolist()),
            "variance_ratio": r.variance_ratio,
        })
    if fmt == "json":
        return _json(recs)
    body = []
    for d in recs:
        th = d["theta_star"]
        th = "" if th is None else (f"{th:.4f}" if isinstance(th, float) else " ".join(f"{x:.4f}" for x in th))
        body.append([d["section"], d["T"], d["K"], th, f"{d['variance_ratio']:.4f}"])
    return _csv(["section", "T", "K", "theta_star", "variance_ratio"], body)


def run(argv=None) -> str:
    args = build_parser().parse_args(argv)
    if args.command == "table":
        w = _workers(args)
        return cmd_table(args.which, args.n_samples or 100_000,
                         0 if args.seed is None else args.seed, w, args.output or "csv")
    cfg = _run_config(args)
    if args.command == "optimize":
        return cmd_optimize(cfg, args.output or "json")
    if args.command == "price":
        return cmd_price(cfg, args.tilt, args.output or "json", args.timing)
    return cmd_sweep(cfg, parse_grid(args.grid), args.output or "csv")


def main(argv=None) -> int:
    try:
        out = run(argv)
    except ConfigError as exc:
        print(f"levy-isamp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LevyISampError, ArithmeticError) as exc:
        print(f"levy-isamp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"levy-isamp: ValueError: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
