"""Exponential Lévy models with a bounded CGF domain.

Only the multivariate variance gamma model is shipped::

    X_t = mu t + b Gamma_t + chol(Sigma) W_{Gamma_t}

with ``Gamma`` a gamma subordinator, ``E[Gamma_t] = t`` and
``Var Gamma_t = t / lambda``. Its cumulant generating function is

    G(theta) = <theta, mu> - lambda log u*(theta),
    u*(theta) = 1 - <theta, b>/lambda - <Sigma theta, theta>/(2 lambda),

finite exactly when ``u* > 0``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "LevyModel",
    "VarianceGammaModel",
    "martingale_drift",
    "cgf",
    "cgf_grad",
    "esscher_tilt",
    "domain_margin",
]


class LevyModel(ABC):
    """Interface the solvers and the Monte Carlo engine rely on."""

    dim: int

    @abstractmethod
    def cgf(self, theta):
        """CGF of ``X_1``; ``+inf`` outside the effective domain."""

    @abstractmethod
    def cgf_grad(self, theta) -> np.ndarray:
        ...

    @abstractmethod
    def cgf_hessian(self, theta) -> np.ndarray:
        ...

    @abstractmethod
    def esscher_tilt(self, theta) -> "LevyModel":
        """Law of ``X`` under the Esscher measure with constant parameter ``theta``."""

    @abstractmethod
    def in_domain(self, theta) -> bool:
        ...


def _as_vector(x, dim=None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"expected length {dim}, got {arr.shape[0]}")
    return arr


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def martingale_drift(lam: float, b, sigma) -> np.ndarray:
    """Drift making every ``exp(X^i)`` a martingale.

    ``mu_i = lambda log(1 - b_i/lambda - Sigma_ii/(2 lambda))``.
    """
    b = _as_vector(b)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    arg = 1.0 - b / lam - np.diag(sigma) / (2.0 * lam)
    if np.any(arg <= 0.0):
        bad = [int(i) for i in np.flatnonzero(arg <= 0.0)]
        raise DomainError(f"model inadmissible: exp(X^i) not integrable for assets {bad}")
    return lam * np.log(arg)


@dataclass(frozen=True, eq=False)
class VarianceGammaModel(LevyModel):
    """Multivariate variance gamma model.

    Build base models with ``VarianceGammaModel(lam, b, sigma)``; ``mu`` is
    then derived from the martingale condition. Tilted instances are produced
    by :meth:`esscher_tilt` and carry ``tilted=True``, which disables the
    martingale check.
    """

    lam: float
    b: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray | None = None
    tilted: bool = False
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0.0:
            raise ValueError("lambda must be positive")
        b = _as_vector(self.b)
        n = b.shape[0]
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (n, n):
            raise ValueError(f"sigma must be {n}x{n}, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-14):
            raise ValueError("sigma not symmetric")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValueError("sigma not positive definite") from None
        if self.mu is None:
            if self.tilted:
                raise ValueError("tilted models need an explicit drift")
            mu = martingale_drift(lam, b, sigma)
        else:
            mu = _as_vector(self.mu, n)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "chol", _frozen(chol))
        if not self.tilted:
            resid = np.array([self.cgf(e) for e in np.eye(n)])
            if np.any(np.abs(resid) > 1e-12):
                raise ValueError("drift violates the martingale condition")

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    # -- CGF --------------------------------------------------------------

    def _theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 0 or theta.shape[-1] != self.dim:
            if self.dim == 1:
                theta = theta[..., None]
            else:
                raise ValueError(f"theta must end in an axis of length {self.dim}")
        return theta

    def domain_margin(self, theta):
        """``u*(theta)``; theta is in the domain iff this is positive.

        Broadcasts over leading axes of ``theta``.
        """
        th = self._theta(theta)
        quad = np.einsum("...i,ij,...j->...", th, self.sigma, th)
        return 1.0 - th @ self.b / self.lam - quad / (2.0 * self.lam)

    def in_domain(self, theta) -> bool:
        return bool(np.all(self.domain_margin(theta) > 0.0))

    def cgf(self, theta):
        th = self._theta(theta)
        u = self.domain_margin(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = th @ self.mu - self.lam * np.log(np.where(u > 0.0, u, 1.0))
        val = np.where(u > 0.0, val, np.inf)
        return float(val) if np.ndim(val) == 0 else val

    def cgf_grad(self, theta) -> np.ndarray:
        th = self._theta(theta)
        u = self.domain_margin(th)
        if np.any(u <= 0.0):
            raise DomainError("theta outside the CGF domain")
        u = np.asarray(u)[..., None]
        return self.mu + (self.b + th @ self.sigma) / u

    def cgf_hessian(self, theta) -> np.ndarray:
        th = _as_vector(theta, self.dim)
        u = float(self.domain_margin(th))
        if u <= 0.0:
            raise DomainError("theta outside the CGF domain")
        v = self.b + self.sigma @ th
        return self.sigma / u + np.outer(v, v) / (self.lam * u * u)

    def esscher_tilt(self, theta) -> "VarianceGammaModel":
        th = _as_vector(theta, self.dim)
        u = float(self.domain_margin(th))
        if u <= 0.0:
            raise DomainError(f"cannot tilt by {th.tolist()}: u* = {u:.6g} <= 0")
        return VarianceGammaModel(
            lam=self.lam,
            b=(self.b + self.sigma @ th) / u,
            sigma=self.sigma / u,
            mu=self.mu,
            tilted=True,
        )

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "b": self.b.tolist(), "sigma": self.sigma.tolist()}


def domain_margin(model: VarianceGammaModel, theta):
    return model.domain_margin(theta)


def cgf(model: LevyModel, theta):
    return model.cgf(theta)


def cgf_grad(model: LevyModel, theta) -> np.ndarray:
    return model.cgf_grad(theta)


def esscher_tilt(model: LevyModel, theta) -> LevyModel:
    return model.esscher_tilt(theta)
