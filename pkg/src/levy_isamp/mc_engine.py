"""Seeded Monte Carlo pricing under base and Esscher-tilted measures.

Paths live on a uniform grid of ``m`` cells. On cell ``j`` the tilt is the
constant ``eta_j`` (tail of the measure), under which increments are again
variance gamma with the parameters returned by ``esscher_tilt``. Every
``(seed, batch, cell)`` triple owns a counter-based Philox substream, so
the output does not depend on how batches are scheduled.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_backend
from .errors import DegenerateVariance, DomainError, GridMismatch
from .levy_models import VarianceGammaModel
from .measures import TiltMeasure, cell_tails, locate_times, log_mgf_path
from .payoffs import PayoffKind, PayoffSpec

__all__ = [
    "PathBatch",
    "EstimateReport",
    "SweepPoint",
    "uniform_grid",
    "substream",
    "sample_gamma",
    "simulate_batch",
    "price_importance",
    "price_standard",
    "variance_ratio",
    "sweep_theta",
    "DEFAULT_BATCH_SIZE",
]

DEFAULT_BATCH_SIZE = 8192


def uniform_grid(T: float, m: int) -> np.ndarray:
    return T * np.arange(m + 1) / m


def substream(seed: int, batch: int, cell: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(batch), int(cell)))
    return np.random.Generator(np.random.Philox(ss))


def sample_gamma(rng: np.random.Generator, shape: float, size: int, kernels=None) -> np.ndarray:
    """Gamma(shape, 1) variates by Marsaglia-Tsang with squeeze.

    Candidates are drawn in rounds (all pending normals, then all pending
    uniforms) until every slot is accepted. Shapes below one are boosted:
    ``G(a) = G(a + 1) U^{1/a}``, computed in log space.
    """
    kernels = kernels or get_backend()
    g, _ = kernels.draw_cell(rng, float(shape), 1.0, int(size), 0)
    return g


@dataclass(frozen=True)
class _CellPlan:
    grid: np.ndarray
    delta: np.ndarray
    shape: np.ndarray
    eta: np.ndarray
    drift: np.ndarray
    bt: np.ndarray
    chol: np.ndarray
    log_mgf: float
    lam: float


def _plan(model: VarianceGammaModel, measure: TiltMeasure, T: float, m: int) -> _CellPlan:
    if m < 1:
        raise ValueError("need at least one grid cell")
    if measure.dim != model.dim:
        raise ValueError(f"measure has dimension {measure.dim}, model {model.dim}")
    if not math.isclose(measure.horizon, T, rel_tol=1e-12):
        raise GridMismatch(f"measure horizon {measure.horizon} != maturity {T}")
    grid = uniform_grid(T, m)
    delta = np.diff(grid)
    eta = np.ascontiguousarray(cell_tails(measure, grid))
    n = model.dim
    drift = np.empty((m, n))
    bt = np.empty((m, n))
    chol = np.empty((m, n, n))
    cache = {}
    for j in range(m):
        key = eta[j].tobytes()
        if key not in cache:
            cache[key] = model.esscher_tilt(eta[j])
        tm = cache[key]
        drift[j] = tm.mu * delta[j]
        bt[j] = tm.b
        chol[j] = tm.chol
    lm = log_mgf_path(measure, model)
    if not np.isfinite(lm):
        raise DomainError("measure leaves the CGF domain")
    return _CellPlan(grid, delta, model.lam * delta, eta, drift, bt, chol, lm, model.lam)


def _draw_cell(plan: _CellPlan, seed, batch, cell, size, n, kernels):
    rng = substream(seed, batch, cell)
    return kernels.draw_cell(rng, float(plan.shape[cell]), float(plan.lam), size, n)


def _draw_batch(plan, seed, batch, size, n, kernels):
    m = plan.delta.size
    gamma = np.empty((m, size))
    z = np.empty((m, size, n))
    for j in range(m):
        gamma[j], z[j] = _draw_cell(plan, seed, batch, j, size, n, kernels)
    return gamma, z


def _batch_sizes(N: int, batch_size: int) -> list[int]:
    full, rest = divmod(N, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def _map_batches(fn, sizes, workers):
    if workers is None or workers <= 1 or len(sizes) <= 1:
        return [fn(b, s) for b, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


@dataclass
class PathBatch:
    grid: np.ndarray
    paths: np.ndarray
    measure_used: TiltMeasure


def simulate_batch(model: VarianceGammaModel, measure: TiltMeasure, m: int, N: int, seed: int, *,
                   batch_size: int = DEFAULT_BATCH_SIZE, workers: int = 1, backend=None) -> PathBatch:
    """Materialize ``N`` log-price paths under the tilted measure.

    Draws exactly the same random numbers as the pricing routines for the
    same ``(seed, batch_size)``, so paths can be checked against them.
    """
    kernels = get_backend(backend)
    T = measure.horizon
    plan = _plan(model, measure, T, m)
    n = model.dim

    def run(b, size):
        gamma, z = _draw_batch(plan, seed, b, size, n, kernels)
        bm = np.zeros((m, size, n))
        for i in range(n):
            s = plan.chol[:, i, 0][:, None] * z[:, :, 0]
            for k in range(1, i + 1):
                s = s + plan.chol[:, i, k][:, None] * z[:, :, k]
            bm[:, :, i] = plan.drift[:, i][:, None] + plan.bt[:, i][:, None] * gamma + np.sqrt(gamma) * s
        paths = np.zeros((size, m + 1, n))
        paths[:, 1:, :] = np.cumsum(bm, axis=0).transpose(1, 0, 2)
        return paths

    parts = _map_batches(run, _batch_sizes(N, batch_size), workers)
    return PathBatch(plan.grid, np.concatenate(parts, axis=0), measure)


@dataclass
class EstimateReport:
    estimate: float
    std_error: float
    sample_variance: float
    n_samples: int
    seed: int
    elapsed_seconds: float
    measure_used: TiltMeasure
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "sample_variance": self.sample_variance,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "elapsed_seconds": self.elapsed_seconds if include_timing else None,
            "measure_used": self.measure_used.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(
            estimate=d["estimate"],
            std_error=d["std_error"],
            sample_variance=d["sample_variance"],
            n_samples=d["n_samples"],
            seed=d["seed"],
            elapsed_seconds=d.get("elapsed_seconds") or 0.0,
            measure_used=TiltMeasure.from_dict(d["measure_used"]),
        )

    def same_result(self, other: "EstimateReport") -> bool:
        """Bitwise equality of every statistic, ignoring wall time."""
        return (self.estimate == other.estimate and self.std_error == other.std_error
                and self.sample_variance == other.sample_variance
                and self.n_samples == other.n_samples and self.seed == other.seed)


def _payoff_layout(payoff: PayoffSpec, grid: np.ndarray):
    m = grid.size - 1
    flags = np.zeros(m, dtype=np.uint8)
    idx = locate_times(grid, payoff.sampling_times())
    if payoff.kind is PayoffKind.ASIAN_PUT:
        flags[idx - 1] = 1
        return 1, flags
    if idx[0] != m:
        raise GridMismatch("maturity is not the last grid point")
    return 0, flags


def weighted_samples(model: VarianceGammaModel, payoff: PayoffSpec, measure: TiltMeasure, m: int,
                     N: int, seed: int, *, batch_size: int = DEFAULT_BATCH_SIZE, workers: int = 1,
                     backend=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-path payoffs and log-likelihood ratios, in batch order."""
    kernels = get_backend(backend)
    if payoff.dim != model.dim:
        raise ValueError(f"payoff has {payoff.dim} underlyings, model has {model.dim}")
    plan = _plan(model, measure, payoff.maturity, m)
    kind, flags = _payoff_layout(payoff, plan.grid)
    n = model.dim

    def run(b, size):
        gamma, z = _draw_batch(plan, seed, b, size, n, kernels)
        pay = np.empty(size)
        llr = np.empty(size)
        kernels.walk(gamma, z, plan.drift, plan.bt, plan.chol, plan.eta, kind,
                     float(payoff.strike), np.ascontiguousarray(payoff.spot), flags,
                     plan.log_mgf, pay, llr)
        return pay, llr

    parts = _map_batches(run, _batch_sizes(N, batch_size), workers)
    pay = np.concatenate([p for p, _ in parts])
    llr = np.concatenate([q for _, q in parts])
    return pay, llr


def price_importance(model: VarianceGammaModel, payoff: PayoffSpec, measure: TiltMeasure, m: int,
                     N: int, seed: int, *, batch_size: int = DEFAULT_BATCH_SIZE, workers: int = 1,
                     backend=None, keep_samples: bool = False) -> EstimateReport:
    """Importance-sampling estimate: mean of ``P * dP/dP^theta`` under ``P^theta``."""
    if N < 2:
        raise ValueError("need at least two samples")
    start = time.perf_counter()
    pay, llr = weighted_samples(model, payoff, measure, m, N, seed, batch_size=batch_size,
                                workers=workers, backend=backend)
    w = pay * np.exp(llr)
    est = float(np.mean(w))
    var = float(np.var(w, ddof=1))
    return EstimateReport(
        estimate=est,
        std_error=math.sqrt(var / N),
        sample_variance=var,
        n_samples=N,
        seed=int(seed),
        elapsed_seconds=time.perf_counter() - start,
        measure_used=measure,
        samples=w if keep_samples else None,
    )


def price_standard(model: VarianceGammaModel, payoff: PayoffSpec, m: int, N: int, seed: int,
                   **kw) -> EstimateReport:
    """Plain Monte Carlo: the importance pipeline with the zero measure."""
    zero = TiltMeasure.zero(model.dim, payoff.maturity)
    return price_importance(model, payoff, zero, m, N, seed, **kw)


def derived_seeds(seed: int, k: int = 2) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(k, dtype=np.uint64)]


def variance_ratio(model, payoff, measure, m, N, seed, *, return_reports: bool = False, **kw):
    """Plain variance over importance-sampling variance, independent seeds."""
    s_std, s_is = derived_seeds(seed)
    std = price_standard(model, payoff, m, N, s_std, **kw)
    imp = price_importance(model, payoff, measure, m, N, s_is, **kw)
    if imp.sample_variance == 0.0:
        if imp.estimate != 0.0:
            raise DegenerateVariance("importance-sampling variance is zero; increase N")
        ratio = math.nan
    else:
        ratio = std.sample_variance / imp.sample_variance
    return (ratio, std, imp) if return_reports else ratio


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    variance: float
    std_error: float


def sweep_theta(model, payoff, theta_grid, m, N, seed, **kw) -> list[SweepPoint]:
    """Importance-sampling variance along a grid of constant tilts.

    All grid points reuse ``seed`` (common random numbers), which keeps the
    curve smooth enough to read off its minimum. The standard error of each
    variance is ``sqrt((mu4 - s^4) / N)``.
    """
    if model.dim != 1:
        raise ValueError("theta sweeps are defined for single-asset models")
    out = []
    for th in theta_grid:
        measure = TiltMeasure.dirac([float(th)], payoff.maturity)
        rep = price_importance(model, payoff, measure, m, N, seed, keep_samples=True, **kw)
        w = rep.samples
        c = w - w.mean()
        mu4 = float(np.mean(c**4))
        s2 = float(np.mean(c**2))
        out.append(SweepPoint(float(th), rep.sample_variance, math.sqrt(max(mu4 - s2 * s2, 0.0) / N)))
    return out
