"""Run configuration: JSON ingestion and the shipped parameter presets.

A config has four blocks, all optional except ``model`` and ``payoff``::

    {"model":  {"lambda": 1.0, "b": [-0.2], "sigma": [[0.04]]},
     "payoff": {"kind": "vanilla_put", "strike": 1.0, "maturity": 1.0},
     "mc":     {"n_samples": 100000, "grid_cells": 1, "seed": 0, "workers": 1},
     "solver": {"asian": "bvp"}}

Unknown keys are rejected so a typo never silently falls back to a default.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .levy_models import VarianceGammaModel
from .payoffs import PayoffKind, PayoffSpec

U64_MAX = 2**64 - 1

_KEYS = {
    "model": {"lambda", "b", "sigma"},
    "payoff": {"kind", "strike", "maturity", "spot", "averaging_dates"},
    "mc": {"n_samples", "grid_cells", "seed", "workers", "batch_size"},
    "solver": {"asian"},
}

_BASKET_SIGMA = [[0.04, 0.02, 0.02], [0.02, 0.04, 0.02], [0.02, 0.02, 0.04]]

PRESETS = {
    "vg-1d": {
        "model": {"lambda": 1.0, "b": [-0.2], "sigma": [[0.04]]},
        "payoff": {"kind": "vanilla_put", "strike": 1.0, "maturity": 1.0},
        "mc": {"n_samples": 100_000, "grid_cells": 1, "seed": 0},
    },
    "vg-basket": {
        "model": {"lambda": 1.0, "b": [-0.2, -0.2, -0.2], "sigma": _BASKET_SIGMA},
        "payoff": {"kind": "basket_put", "strike": 3.0, "maturity": 1.0},
        "mc": {"n_samples": 100_000, "grid_cells": 1, "seed": 0},
    },
    "vg-asian": {
        "model": {"lambda": 1.0, "b": [-0.2], "sigma": [[0.04]]},
        "payoff": {"kind": "asian_put", "strike": 1.0, "maturity": 1.0, "averaging_dates": 100},
        "mc": {"n_samples": 100_000, "grid_cells": 100, "seed": 0},
        "solver": {"asian": "bvp"},
    },
}


def preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; have {', '.join(sorted(PRESETS))}") from None


@dataclass(frozen=True)
class RunConfig:
    model: VarianceGammaModel
    payoff: PayoffSpec
    n_samples: int = 100_000
    grid_cells: int = 1
    seed: int = 0
    workers: int | None = None
    batch_size: int = 8192
    asian_solver: str = "bvp"

    def mc_kwargs(self) -> dict:
        return {"batch_size": self.batch_size, "workers": self.workers or 1}


def _num(v, where, *, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {json.dumps(v)}")
    v = float(v)
    if not np.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}: must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{where}: must be nonnegative")
    return v


def _int(v, where, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {json.dumps(v)}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}: must be >= {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"{where}: must be <= {hi}")
    return v


def _vector(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a non-empty array of numbers")
    return np.array([_num(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _matrix(v, where, n):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [[v]]
    if not isinstance(v, list) or len(v) != n:
        raise ConfigError(f"{where}: expected a {n}x{n} array of arrays")
    rows = []
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{where}[{i}]: expected {n} entries")
        rows.append([_num(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(rows)


def _check_keys(block, name):
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: expected an object")
    extra = sorted(set(block) - _KEYS[name])
    if extra:
        raise ConfigError(f"{name}.{extra[0]}: unknown key")


def _need(block, key, name):
    if key not in block:
        raise ConfigError(f"{name}.{key}: missing")
    return block[key]


def parse_model(block: dict) -> VarianceGammaModel:
    _check_keys(block, "model")
    lam = _num(_need(block, "lambda", "model"), "model.lambda", positive=True)
    b = _vector(_need(block, "b", "model"), "model.b")
    sigma = _matrix(_need(block, "sigma", "model"), "model.sigma", b.size)
    try:
        return VarianceGammaModel(lam, b, sigma)
    except (ValueError, DomainError) as exc:
        field = "model.sigma" if "sigma" in str(exc) else "model"
        raise ConfigError(f"{field}: {exc}") from None


def parse_payoff(block: dict, dim: int) -> PayoffSpec:
    _check_keys(block, "payoff")
    kind = _need(block, "kind", "payoff")
    try:
        kind = PayoffKind(kind)
    except ValueError:
        names = ", ".join(k.value for k in PayoffKind)
        raise ConfigError(f"payoff.kind: expected one of {names}, got {json.dumps(kind)}") from None
    strike = _num(_need(block, "strike", "payoff"), "payoff.strike", nonneg=True)
    maturity = _num(_need(block, "maturity", "payoff"), "payoff.maturity", positive=True)
    spot = block.get("spot")
    spot = np.ones(dim) if spot is None else _vector(spot, "payoff.spot")
    if spot.size != dim:
        raise ConfigError(f"payoff.spot: expected {dim} entries to match the model")
    m = block.get("averaging_dates")
    if m is not None:
        if kind is not PayoffKind.ASIAN_PUT:
            raise ConfigError("payoff.averaging_dates: only valid for asian_put")
        m = _int(m, "payoff.averaging_dates", lo=1)
    if kind is PayoffKind.VANILLA_PUT and dim != 1:
        raise ConfigError("payoff.kind: vanilla_put needs a single-asset model; use basket_put")
    if kind is PayoffKind.ASIAN_PUT and dim != 1:
        raise ConfigError("payoff.kind: asian_put needs a single-asset model")
    try:
        return PayoffSpec(kind, strike, maturity, spot=spot, averaging_dates=m)
    except ValueError as exc:
        raise ConfigError(f"payoff: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    extra = sorted(set(data) - set(_KEYS))
    if extra:
        raise ConfigError(f"{extra[0]}: unknown key")
    model = parse_model(_need(data, "model", "config"))
    payoff = parse_payoff(_need(data, "payoff", "config"), model.dim)
    mc = data.get("mc", {})
    _check_keys(mc, "mc")
    default_m = payoff.averaging_dates if payoff.kind is PayoffKind.ASIAN_PUT else 1
    m = _int(mc.get("grid_cells", default_m), "mc.grid_cells", lo=1)
    if payoff.kind is PayoffKind.ASIAN_PUT and m % payoff.averaging_dates:
        raise ConfigError("mc.grid_cells: must be a multiple of payoff.averaging_dates")
    workers = mc.get("workers")
    solver = data.get("solver", {})
    _check_keys(solver, "solver")
    asian = solver.get("asian", "bvp")
    if asian not in ("bvp", "direct"):
        raise ConfigError(f"solver.asian: expected bvp or direct, got {json.dumps(asian)}")
    return RunConfig(
        model=model,
        payoff=payoff,
        n_samples=_int(mc.get("n_samples", 100_000), "mc.n_samples", lo=2),
        grid_cells=m,
        seed=_int(mc.get("seed", 0), "mc.seed", lo=0, hi=U64_MAX),
        workers=None if workers is None else _int(workers, "mc.workers", lo=1),
        batch_size=_int(mc.get("batch_size", 8192), "mc.batch_size", lo=1),
        asian_solver=asian,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data)
