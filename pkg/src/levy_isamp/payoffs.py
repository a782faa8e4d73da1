"""Put payoffs, their log-payoff convex conjugates, and a brute-force oracle.

All supported payoffs have a concave logarithm ``H = log P`` in log-price
coordinates, which is what makes the dual formulation of the tilt problem
valid. Calls are rejected for that reason.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .measures import TiltMeasure, locate_times

__all__ = [
    "PayoffKind",
    "PayoffSpec",
    "ConjugateValue",
    "evaluate",
    "log_payoff",
    "conjugate_basket",
    "conjugate_asian",
    "conjugate_bruteforce",
    "conjugate_of_measure",
]


class PayoffKind(str, enum.Enum):
    VANILLA_PUT = "vanilla_put"
    BASKET_PUT = "basket_put"
    ASIAN_PUT = "asian_put"

    @property
    def european(self) -> bool:
        return self is not PayoffKind.ASIAN_PUT


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    kind: PayoffKind
    strike: float
    maturity: float
    spot: np.ndarray | None = None
    averaging_dates: int | None = None
    dim: int = 1

    def __post_init__(self):
        kind = PayoffKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not self.strike >= 0.0:
            raise ValueError("strike must be nonnegative")
        if not self.maturity > 0.0:
            raise ValueError("maturity must be positive")
        spot = np.ones(self.dim) if self.spot is None else np.atleast_1d(np.asarray(self.spot, dtype=float))
        if np.any(spot <= 0.0):
            raise ValueError("spot prices must be positive")
        object.__setattr__(self, "dim", spot.shape[0])
        spot.setflags(write=False)
        object.__setattr__(self, "spot", spot)
        if kind is PayoffKind.VANILLA_PUT and spot.shape[0] != 1:
            raise ValueError("a vanilla put has a single underlying")
        if kind is PayoffKind.ASIAN_PUT:
            if spot.shape[0] != 1:
                raise ValueError("Asian puts are single-asset")
            m = self.averaging_dates
            if m is None:
                m = max(1, int(round(250 * self.maturity)))
            if int(m) < 1:
                raise ValueError("averaging_dates must be >= 1")
            object.__setattr__(self, "averaging_dates", int(m))

    @classmethod
    def vanilla_put(cls, strike, maturity, spot=1.0):
        return cls(PayoffKind.VANILLA_PUT, strike, maturity, spot=spot)

    @classmethod
    def basket_put(cls, strike, maturity, spot=None, dim=None):
        if spot is None:
            spot = np.ones(dim or 1)
        return cls(PayoffKind.BASKET_PUT, strike, maturity, spot=spot)

    @classmethod
    def asian_put(cls, strike, maturity, averaging_dates=None, spot=1.0):
        return cls(PayoffKind.ASIAN_PUT, strike, maturity, spot=spot, averaging_dates=averaging_dates)

    def sampling_times(self) -> np.ndarray:
        """Dates the payoff reads the path at."""
        if self.kind is PayoffKind.ASIAN_PUT:
            m = self.averaging_dates
            return self.maturity * np.arange(1, m + 1) / m
        return np.array([self.maturity])

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "strike": self.strike, "maturity": self.maturity}
        if self.kind is PayoffKind.ASIAN_PUT:
            d["averaging_dates"] = self.averaging_dates
        return d


@dataclass(frozen=True)
class ConjugateValue:
    value: float
    argmax: np.ndarray | None = None


def evaluate(payoff: PayoffSpec, grid, path) -> np.ndarray | float:
    """Payoff of paths of log-prices ``X`` sampled on ``grid``.

    ``path`` has shape ``(..., len(grid), n)``; prices are ``S0 * exp(X)``.
    """
    x = np.asarray(path, dtype=float)
    if payoff.dim == 1 and (x.ndim == 1 or x.shape[-1] != 1):
        x = x[..., None]
    idx = locate_times(grid, payoff.sampling_times())
    if payoff.kind is PayoffKind.ASIAN_PUT:
        avg = (payoff.spot[0] * np.exp(x[..., idx, 0])).mean(axis=-1)
        out = np.maximum(payoff.strike - avg, 0.0)
    else:
        total = (payoff.spot * np.exp(x[..., idx[0], :])).sum(axis=-1)
        out = np.maximum(payoff.strike - total, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def log_payoff(payoff: PayoffSpec, x) -> np.ndarray | float:
    """``H(x) = log P`` for terminal log-prices (European) or for the
    vector of log-prices on the averaging dates (Asian); ``-inf`` off the
    exercise region."""
    x = np.asarray(x, dtype=float)
    if payoff.kind is PayoffKind.ASIAN_PUT:
        inner = payoff.strike - (payoff.spot[0] * np.exp(x)).mean(axis=-1)
    else:
        if payoff.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        inner = payoff.strike - (payoff.spot * np.exp(x)).sum(axis=-1)
    with np.errstate(divide="ignore"):
        out = np.where(inner > 0.0, np.log(np.where(inner > 0.0, inner, 1.0)), -np.inf)
    return float(out) if np.ndim(out) == 0 else out


def _xlogx_neg(theta):
    """``theta * log(-theta)`` with the ``0 log 0 = 0`` convention."""
    theta = np.asarray(theta, dtype=float)
    safe = np.where(theta < 0.0, -theta, 1.0)
    return np.where(theta < 0.0, theta * np.log(safe), 0.0)


def conjugate_basket(theta, strike: float, spot=None) -> ConjugateValue:
    """Conjugate of ``h(x) = log(K - sum_k S0_k e^{x_k})``.

    ``+inf`` as soon as one component is positive. With unit spots the
    closed form is ``-(1 - s) log((1 - s)/K) - sum_k theta_k log(-theta_k)``,
    ``s = sum_k theta_k``. Nonunit spots shift ``x`` by ``log S0``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(theta > 0.0) or strike <= 0.0:
        return ConjugateValue(math.inf)
    s = theta.sum()
    value = -(1.0 - s) * math.log((1.0 - s) / strike) - float(np.sum(_xlogx_neg(theta)))
    # maximizer of h(x) - <x, theta>: e^{x_k} = -K theta_k / (1 - s); -inf where theta_k = 0
    with np.errstate(divide="ignore"):
        argmax = np.log(-strike * theta / (1.0 - s))
    if spot is not None:
        logs = np.log(np.atleast_1d(np.asarray(spot, dtype=float)))
        value += float(theta @ logs)
        argmax = argmax - logs
    return ConjugateValue(value, argmax)


def conjugate_asian(theta_density, strike: float, maturity: float, cell_lengths=None) -> ConjugateValue:
    """Conjugate of the Asian log-payoff on a grid.

    ``theta_density[j]`` is the density on cell ``j`` (length ``Delta_j``;
    uniform ``T/m`` by default). With ``I = sum_j theta_j Delta_j``::

        log(K/(1 - I)) - sum_j theta_j log(-K T theta_j/(1 - I)) Delta_j

    This is exact for the average over the right ends of the cells. Any
    positive density gives ``+inf``.
    """
    th = np.asarray(theta_density, dtype=float).ravel()
    m = th.size
    delta = np.full(m, maturity / m) if cell_lengths is None else np.asarray(cell_lengths, dtype=float)
    if np.any(th > 0.0) or strike <= 0.0:
        return ConjugateValue(math.inf)
    integral = float(th @ delta)
    one_minus = 1.0 - integral
    neg = th < 0.0
    terms = np.zeros(m)
    terms[neg] = th[neg] * np.log(-strike * maturity * th[neg] / one_minus)
    value = math.log(strike / one_minus) - float(terms @ delta)
    with np.errstate(divide="ignore"):
        argmax = np.where(neg, np.log(np.where(neg, -strike * maturity * th / one_minus, 1.0)), -np.inf)
    return ConjugateValue(value, argmax)


def conjugate_of_measure(payoff: PayoffSpec, measure: TiltMeasure) -> float:
    """Conjugate of the log-payoff evaluated at a tilt measure.

    European payoffs only see ``X_T``, so any mass before ``T`` yields
    ``+inf``. Asian atoms must sit on averaging dates, which are then
    read as a piecewise constant density.
    """
    if payoff.kind.european:
        if measure.charges_before_horizon():
            return math.inf
        return conjugate_basket(measure.total_mass, payoff.strike, payoff.spot).value
    times = payoff.sampling_times()
    try:
        idx = locate_times(times, measure.times)
    except GridMismatch:
        return math.inf
    w = np.zeros(times.size)
    np.add.at(w, idx, measure.weights[:, 0])
    delta = np.diff(np.concatenate([[0.0], times]))
    value = conjugate_asian(w / delta, payoff.strike, payoff.maturity, delta).value
    s0 = payoff.spot[0]
    if np.isfinite(value) and s0 != 1.0:
        value += float(w.sum()) * math.log(s0)
    return value


def _maximize_1d(f, lo: float, hi: float, resolution: int) -> tuple[float, float]:
    """Grid scan of a scalar function followed by golden-section polishing."""
    xs = np.linspace(lo, hi, resolution)
    ys = f(xs)
    k = int(np.argmax(ys))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, resolution - 1)]
    best_x, best_y = xs[k], ys[k]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = float(f(np.array([c]))[0]), float(f(np.array([d]))[0])
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = float(f(np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = float(f(np.array([d]))[0])
        if b - a < 1e-13:
            break
    for x, y in ((c, fc), (d, fd)):
        if y > best_y:
            best_x, best_y = x, y
    return float(best_x), float(best_y)


def conjugate_bruteforce(payoff: PayoffSpec, theta, box=(-10.0, 0.0), resolution: int = 20001,
                         sweeps: int = 200, tol: float = 1e-13) -> float:
    """Numerical ``sup_x {H(x) - <x, theta>}`` over a box (test oracle).

    ``theta`` is the terminal vector for European payoffs and the atom
    weights on the averaging dates for the Asian put. The search is a
    coordinate-wise grid scan with golden-section refinement, repeated
    until the value stalls; it is valid because ``H`` is concave.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lo, hi = box
    k = theta.size
    x = np.full(k, lo + 0.75 * (hi - lo))
    # start inside the exercise region
    while not np.isfinite(log_payoff(payoff, x)):
        x = x - 1.0
        if x[0] < lo - 50:
            return -math.inf

    def objective(v):
        return log_payoff(payoff, v) - v @ theta

    best = objective(x)
    for _ in range(sweeps):
        prev = best
        for i in range(k):
            def along(vals, i=i):
                pts = np.repeat(x[None, :], vals.size, axis=0)
                pts[:, i] = vals
                return np.asarray(log_payoff(payoff, pts)) - pts @ theta
            xi, yi = _maximize_1d(along, lo, hi, resolution)
            if yi >= best:
                x[i], best = xi, yi
        if best - prev <= tol:
            break
    return float(best)
