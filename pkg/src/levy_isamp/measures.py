"""Tilt measures on ``[0, T]`` and the path likelihood ratio.

A tilt measure is a finite collection of vector atoms ``w_j`` at times
``0 < t_1 < ... < t_k <= T``. Its tail function ``eta(t) = sum_{t_j >= t} w_j``
is piecewise constant, so the path moment generating integral
``int_0^T G(eta(t)) dt`` is an exact finite sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, RangeError

__all__ = [
    "TiltMeasure",
    "tail_function",
    "segment_tails",
    "log_mgf_path",
    "log_likelihood_ratio",
    "log_likelihood_ratio_increments",
    "locate_times",
    "cell_tails",
]

_TIME_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TiltMeasure:
    """Signed vector measure made of atoms.

    ``variant`` is ``"dirac"`` for a single atom at the horizon and
    ``"grid"`` otherwise. ``weights`` has shape ``(k, n)``.
    """

    variant: str
    times: np.ndarray
    weights: np.ndarray
    horizon: float

    def __post_init__(self):
        T = float(self.horizon)
        if not T > 0.0:
            raise ValueError("horizon must be positive")
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim == 1:
            weights = weights[:, None]
        if times.ndim != 1 or weights.ndim != 2 or weights.shape[0] != times.shape[0]:
            raise ValueError("times and weights do not line up")
        if times.size == 0:
            raise ValueError("a measure needs at least one atom")
        if times[0] <= 0.0:
            raise ValueError("atoms at time 0 are not allowed")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("atom times must be strictly increasing")
        if times[-1] > T * (1 + _TIME_RTOL):
            raise ValueError("atom beyond the horizon")
        if self.variant not in ("dirac", "grid"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "dirac" and (times.size != 1 or not np.isclose(times[0], T, rtol=_TIME_RTOL, atol=0)):
            raise ValueError("a dirac measure has exactly one atom at the horizon")
        times.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, weight, horizon: float) -> "TiltMeasure":
        w = np.atleast_1d(np.asarray(weight, dtype=float))
        return cls("dirac", np.array([float(horizon)]), w[None, :], horizon)

    @classmethod
    def grid(cls, times, weights, horizon: float) -> "TiltMeasure":
        return cls("grid", times, weights, horizon)

    @classmethod
    def zero(cls, dim: int, horizon: float) -> "TiltMeasure":
        return cls.dirac(np.zeros(dim), horizon)

    @classmethod
    def from_density(cls, density, horizon: float) -> "TiltMeasure":
        """Atoms ``w_j = density_j * Delta`` at the right ends of a uniform grid."""
        density = np.asarray(density, dtype=float)
        if density.ndim == 1:
            density = density[:, None]
        m = density.shape[0]
        times = horizon * np.arange(1, m + 1) / m
        return cls.grid(times, density * (horizon / m), horizon)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def total_mass(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weights)

    def charges_before_horizon(self) -> bool:
        early = self.times < self.horizon * (1 - _TIME_RTOL)
        return bool(np.any(self.weights[early]))

    def tail(self, t: float) -> np.ndarray:
        return tail_function(self, t)

    def to_dict(self) -> dict:
        return {
            "type": self.variant,
            "times": self.times.tolist(),
            "weights": self.weights.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TiltMeasure":
        times = d["times"]
        horizon = d.get("horizon", times[-1])
        return cls(d["type"], times, d["weights"], horizon)


def tail_function(measure: TiltMeasure, t: float) -> np.ndarray:
    """``theta([t, T])``: total weight of atoms at times ``>= t``."""
    T = measure.horizon
    if not 0.0 <= t <= T:
        raise RangeError(f"t={t} outside [0, {T}]")
    return measure.weights[measure.times >= t].sum(axis=0)


def segment_tails(measure: TiltMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Segment lengths and tail values of the piecewise constant ``eta``.

    Segment ``j`` is ``(t_{j-1}, t_j]`` with ``t_0 = 0``; the trailing
    segment ``(t_k, T]`` (if any) carries zero tail and is omitted.
    """
    bounds = np.concatenate([[0.0], measure.times])
    lengths = np.diff(bounds)
    tails = np.cumsum(measure.weights[::-1], axis=0)[::-1]
    return lengths, tails


def log_mgf_path(measure: TiltMeasure, model) -> float:
    """``log E exp(int X_t . theta(dt)) = int_0^T G(theta([t, T])) dt``.

    Returns ``+inf`` when some segment leaves the CGF domain.
    """
    lengths, tails = segment_tails(measure)
    vals = np.asarray(model.cgf(tails), dtype=float)
    if np.any(np.isinf(vals)):
        return float("inf")
    return float(lengths @ vals)


def locate_times(grid, times) -> np.ndarray:
    """Indices of ``times`` inside ``grid``; raises if any is absent."""
    grid = np.asarray(grid, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.searchsorted(grid, times)
    idx = np.clip(idx, 0, grid.size - 1)
    lo = np.clip(idx - 1, 0, grid.size - 1)
    pick = np.where(np.abs(grid[lo] - times) < np.abs(grid[idx] - times), lo, idx)
    scale = max(float(np.abs(grid).max()), 1.0)
    if np.any(np.abs(grid[pick] - times) > _TIME_RTOL * scale * 10):
        missing = times[np.abs(grid[pick] - times) > _TIME_RTOL * scale * 10]
        raise GridMismatch(f"dates {missing.tolist()} are not on the path grid")
    return pick


def cell_tails(measure: TiltMeasure, grid) -> np.ndarray:
    """Tail value on every grid cell ``(g_{c}, g_{c+1}]``, shape ``(m, n)``.

    Atoms are matched to grid points by index, so rounding in the grid
    construction cannot move an atom across a cell boundary.
    """
    grid = np.asarray(grid, dtype=float)
    idx = locate_times(grid, measure.times)
    if np.any(idx == 0):
        raise GridMismatch("atom placed on the initial grid point")
    mass = np.zeros((grid.size, measure.dim))
    np.add.at(mass, idx, measure.weights)
    return np.cumsum(mass[::-1], axis=0)[::-1][1:]


def _path_array(path, dim):
    x = np.asarray(path, dtype=float)
    if dim == 1 and (x.ndim == 1 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def log_likelihood_ratio(measure: TiltMeasure, model, grid, path) -> np.ndarray | float:
    """``log dP/dP^theta`` evaluated on paths sampled on ``grid``.

    ``path`` has shape ``(..., len(grid), n)`` (the trailing axis may be
    dropped in dimension one) and must start at 0.
    """
    x = _path_array(path, measure.dim)
    idx = locate_times(grid, measure.times)
    atoms = np.einsum("...kn,kn->...", x[..., idx, :], measure.weights)
    out = log_mgf_path(measure, model) - atoms
    return float(out) if np.ndim(out) == 0 else out


def log_likelihood_ratio_increments(measure: TiltMeasure, model, grid, path):
    """Same quantity as :func:`log_likelihood_ratio`, summed over increments.

    Uses ``sum_j <w_j, X_{t_j}> = sum_cells <eta_cell, dX_cell>`` which holds
    because ``X_0 = 0``.
    """
    x = _path_array(path, measure.dim)
    eta = cell_tails(measure, grid)
    dx = np.diff(x, axis=-2)
    out = log_mgf_path(measure, model) - np.einsum("...kn,kn->...", dx, eta)
    return float(out) if np.ndim(out) == 0 else out
