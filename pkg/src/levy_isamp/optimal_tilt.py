"""Asymptotically optimal tilt measures.

The tilt minimizes the variance proxy::

    2 * (H^(theta) + int_0^T G(theta([t, T])) dt)

where ``H^`` is the convex conjugate of the log-payoff. For European
payoffs the minimizer is an atom at maturity and the problem is
``min_theta h^(theta) + T G(theta)`` over ``R^n``. For the Asian put it is
a density, obtained either by minimizing the gridded objective directly or
by shooting on the Euler-Lagrange equation ``psi' = -(G(psi) + C)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketingFailure, DomainExit, MaxIterations, NoInteriorPoint
from .levy_models import LevyModel
from .measures import TiltMeasure, log_mgf_path
from .payoffs import PayoffKind, PayoffSpec, conjugate_of_measure

__all__ = [
    "TiltSolution",
    "dual_objective",
    "damped_newton",
    "solve_european",
    "solve_asian_direct",
    "solve_asian_bvp",
    "solve",
    "shooting_residual",
]


@dataclass
class TiltSolution:
    measure: TiltMeasure
    objective: float
    gradient_norm: float
    iterations: int
    solver: str
    theta_bar: np.ndarray | None = None
    psi: np.ndarray | None = None
    C: float | None = None
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = {
            "solver": self.solver,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "measure": self.measure.to_dict(),
        }
        if self.theta_bar is not None:
            d["theta_bar"] = self.theta_bar.tolist() if self.theta_bar.size > 1 else float(self.theta_bar[0])
        if self.C is not None:
            d["C"] = self.C
        if self.psi is not None:
            d["psi"] = self.psi.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TiltSolution":
        tb = d.get("theta_bar")
        return cls(
            measure=TiltMeasure.from_dict(d["measure"]),
            objective=d["objective"],
            gradient_norm=d["gradient_norm"],
            iterations=d["iterations"],
            solver=d["solver"],
            theta_bar=None if tb is None else np.atleast_1d(np.asarray(tb, dtype=float)),
            psi=None if d.get("psi") is None else np.asarray(d["psi"], dtype=float),
            C=d.get("C"),
        )


def dual_objective(model: LevyModel, payoff: PayoffSpec, measure: TiltMeasure) -> float:
    conj = conjugate_of_measure(payoff, measure)
    if not np.isfinite(conj):
        return math.inf
    lm = log_mgf_path(measure, model)
    if not np.isfinite(lm):
        return math.inf
    return 2.0 * (conj + lm)


def damped_newton(fun, grad, hess, x0, feasible, *, gtol=1e-12, max_iter=500, armijo=1e-4):
    """Newton's method with backtracking, kept strictly inside ``feasible``.

    Returns ``(x, f, gnorm, iterations, history)``. Falls back to steepest
    descent whenever the Newton direction is not a descent direction.
    """
    x = np.array(x0, dtype=float)
    if not feasible(x):
        raise NoInteriorPoint("starting point is infeasible")
    f = fun(x)
    g = grad(x)
    history = [f]
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol:
            return x, f, gnorm, it - 1, history
        try:
            d = -np.linalg.solve(hess(x), g)
        except np.linalg.LinAlgError:
            d = -g
        slope = float(g @ d)
        if not slope < 0.0:
            d, slope = -g, -gnorm**2
        step = 1.0
        gt = None
        while True:
            trial = x + step * d
            if feasible(trial):
                ft = fun(trial)
                if ft <= f + armijo * step * slope:
                    break
                # near the optimum f stops resolving progress; fall back to
                # the gradient norm while f stays flat to roundoff
                if ft <= f + 4 * np.finfo(float).eps * (1.0 + abs(f)):
                    gt = grad(trial)
                    if np.linalg.norm(gt) < 0.5 * gnorm:
                        break
                    gt = None
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20:
            # no representable progress left
            return x, f, gnorm, it, history
        x, f = trial, min(ft, f)
        g = grad(x) if gt is None else gt
        history.append(f)
    gnorm = float(np.linalg.norm(g))
    if gnorm > 1e-8:
        raise MaxIterations(f"Newton did not converge in {max_iter} iterations (|grad| = {gnorm:.3g})")
    return x, f, gnorm, max_iter, history


# -- European ----------------------------------------------------------------


def solve_european(model: LevyModel, payoff: PayoffSpec, *, theta0=None, max_iter: int = 500) -> TiltSolution:
    """Optimal atom at maturity for a vanilla or basket put."""
    if not payoff.kind.european:
        raise ValueError("solve_european needs a European payoff")
    n = model.dim
    if payoff.dim != n:
        raise ValueError(f"payoff has {payoff.dim} underlyings, model has {n}")
    K, T = payoff.strike, payoff.maturity
    if K <= 0.0:
        raise NoInteriorPoint("strike must be positive for a nontrivial tilt")
    log_spot = np.log(payoff.spot)

    def feasible(th):
        return bool(np.all(th < 0.0)) and model.in_domain(th)

    def fun(th):
        s = th.sum()
        return (-(1.0 - s) * math.log((1.0 - s) / K) - float(np.sum(th * np.log(-th)))
                + float(th @ log_spot) + T * model.cgf(th))

    def grad(th):
        s = th.sum()
        return math.log((1.0 - s) / K) - np.log(-th) + log_spot + T * np.ravel(model.cgf_grad(th))

    def hess(th):
        s = th.sum()
        return -np.full((n, n), 1.0 / (1.0 - s)) - np.diag(1.0 / th) + T * model.cgf_hessian(th)

    x0 = -np.ones(n) if theta0 is None else np.asarray(theta0, dtype=float)
    shrink = 0
    while not feasible(x0):
        x0 = 0.5 * x0
        shrink += 1
        if shrink > 60:
            raise NoInteriorPoint("no feasible starting point")
    theta, f, gnorm, its, hist = damped_newton(fun, grad, hess, x0, feasible, max_iter=max_iter)
    measure = TiltMeasure.dirac(theta, T)
    return TiltSolution(
        measure=measure,
        objective=dual_objective(model, payoff, measure),
        gradient_norm=gnorm,
        iterations=its,
        solver="newton",
        theta_bar=theta,
        history=[2.0 * h for h in hist],
    )


# -- Asian -------------------------------------------------------------------


def _scalar_cgf(model: LevyModel):
    if model.dim != 1:
        raise ValueError("the Asian tilt is computed for single-asset models only")
    lam = float(model.lam)
    b = float(model.b[0])
    s = float(model.sigma[0, 0])
    mu = float(model.mu[0])

    def margin(x):
        return 1.0 - x * b / lam - s * x * x / (2.0 * lam)

    def G(x):
        u = margin(x)
        return x * mu - lam * math.log(u) if u > 0.0 else math.inf

    def dG(x):
        return mu + (b + s * x) / margin(x)

    return G, dG, margin


def _asian_objective_parts(model, K, T, m):
    """Gridded objective in the cell densities ``theta_j <= 0`` (spot 1)."""
    delta = T / m

    def tails(th):
        # eta_c = delta * sum_{k >= c} theta_k
        return delta * np.cumsum(th[::-1])[::-1]

    def feasible(th):
        return bool(np.all(th < 0.0)) and bool(np.all(model.domain_margin(tails(th)) > 0.0))

    def fun(th):
        integral = delta * th.sum()
        one = 1.0 - integral
        ent = float(np.sum(th * np.log(-T * th))) * delta
        return one * math.log(K / one) - ent + delta * float(np.sum(model.cgf(tails(th)[:, None])))

    def grad(th):
        integral = delta * th.sum()
        eta = tails(th)
        dg = np.ravel(model.cgf_grad(eta[:, None]))
        return delta * (-math.log(K / (1.0 - integral)) - np.log(-T * th) + delta * np.cumsum(dg))

    def hess(th):
        integral = delta * th.sum()
        eta = tails(th)
        d2 = np.array([model.cgf_hessian([e])[0, 0] for e in eta])
        cum = np.cumsum(d2)
        # sum_{c <= min(i, j)} G''(eta_c)
        mins = np.minimum.outer(np.arange(m), np.arange(m))
        return (-delta**2 / (1.0 - integral) * np.ones((m, m)) - np.diag(delta / th)
                + delta**3 * cum[mins])

    return fun, grad, hess, feasible


def _asian_payoff(K, T, m):
    return PayoffSpec.asian_put(K, T, averaging_dates=m)


def solve_asian_direct(model: LevyModel, K: float, T: float, m: int, *, theta0=None,
                       max_iter: int = 500) -> TiltSolution:
    """Minimize the gridded Asian objective over nonpositive cell densities.

    Damped Newton in the densities; the constraint ``theta < 0`` and the
    CGF domain act as barriers through the line search.
    """
    _scalar_cgf(model)
    if m < 2:
        raise ValueError("need at least two grid cells")
    fun, grad, hess, feasible = _asian_objective_parts(model, K, T, m)
    x0 = -np.ones(m) if theta0 is None else np.asarray(theta0, dtype=float)
    while not feasible(x0):
        x0 = 0.5 * x0
        if np.max(np.abs(x0)) < 1e-12:
            raise NoInteriorPoint("no feasible starting density")
    th, f, gnorm, its, hist = damped_newton(fun, grad, hess, x0, feasible, gtol=1e-11, max_iter=max_iter)
    measure = TiltMeasure.from_density(th, T)
    payoff = _asian_payoff(K, T, m)
    delta = T / m
    psi = np.concatenate([[0.0], delta * np.cumsum(th[::-1])])
    return TiltSolution(
        measure=measure,
        objective=dual_objective(model, payoff, measure),
        gradient_norm=gnorm,
        iterations=its,
        solver="direct",
        psi=psi,
        history=[2.0 * h for h in hist],
    )


def _integrate_psi(G, margin, C, T, m, substeps=1):
    """RK4 for ``psi' = -(G(psi) + C)``, ``psi(0) = 0``; values on ``m`` cells."""
    h = T / (m * substeps)
    psi = np.empty(m + 1)
    psi[0] = 0.0
    y = 0.0

    def rhs(v):
        if margin(v) <= 0.0:
            raise DomainExit(f"psi={v:.6g} left the CGF domain (C={C:.6g})")
        return -(G(v) + C)

    for k in range(m):
        for _ in range(substeps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not np.isfinite(y):
                raise DomainExit(f"psi diverged (C={C:.6g})")
        psi[k + 1] = y
    return psi


def shooting_residual(model: LevyModel, K: float, T: float, m: int, C: float, substeps: int = 8):
    """Terminal mismatch of the first-integral trajectory for constant ``C``.

    The transversality condition of the gridless problem reads
    ``psi'(T) = -(1 - psi_T) / (K T)``; the residual is
    ``psi'(T) + (1 - psi_T)/(K T)``. Returns ``(residual, psi)``.
    """
    G, _, margin = _scalar_cgf(model)
    psi = _integrate_psi(G, margin, C, T, m, substeps)
    pT = psi[-1]
    if margin(pT) <= 0.0:
        raise DomainExit("terminal value outside the CGF domain")
    slope = -(G(pT) + C)
    return slope + (1.0 - pT) / (K * T), psi


def solve_asian_bvp(model: LevyModel, K: float, T: float, m: int, *, tol: float = 1e-10,
                    substeps: int = 8, max_doublings: int = 60, max_iter: int = 500) -> TiltSolution:
    """Shooting on the first-integral constant ``C``.

    ``C = 0`` gives ``psi = 0`` and a positive residual ``1/(K T)``; larger
    ``C`` drives ``psi`` down until the trajectory leaves the CGF domain.
    The root is bracketed by doubling and refined by Illinois regula falsi,
    with bisection across the domain-exit region.
    """
    if K <= 0.0:
        raise NoInteriorPoint("strike must be positive")

    def res(C):
        try:
            return shooting_residual(model, K, T, m, C, substeps)[0]
        except DomainExit:
            return -math.inf

    lo, f_lo = 0.0, res(0.0)
    hi = 1.0
    f_hi = res(hi)
    n_eval = 2
    doublings = 0
    while f_hi > 0.0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = res(hi)
        n_eval += 1
        doublings += 1
        if doublings > max_doublings:
            raise BracketingFailure("no sign change of the shooting residual")
    side = 0
    C = lo
    f_c = f_lo
    for _ in range(max_iter):
        if np.isfinite(f_hi):
            C = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            if not lo < C < hi:
                C = 0.5 * (lo + hi)
        else:
            C = 0.5 * (lo + hi)
        f_c = res(C)
        n_eval += 1
        if abs(f_c) <= tol or hi - lo <= 1e-15 * max(1.0, hi):
            break
        if f_c > 0.0:
            lo, f_lo = C, f_c
            if side == 1 and np.isfinite(f_hi):
                f_hi *= 0.5
            side = 1
        else:
            hi, f_hi = C, f_c
            if side == -1:
                f_lo *= 0.5
            side = -1
    else:
        raise MaxIterations("shooting did not converge")
    if not np.isfinite(f_c) or abs(f_c) > 1e-6:
        raise BracketingFailure(f"shooting stalled with residual {f_c:.3g}")
    resid, psi = shooting_residual(model, K, T, m, C, substeps)
    G, _, _ = _scalar_cgf(model)
    # theta*_s = psi'(T - s); psi[k] sits at t = k T/m, so s_j = j T/m is psi[m - j]
    density = np.array([-(G(psi[m - j]) + C) for j in range(1, m + 1)])
    weights = density * (T / m)
    times = T * np.arange(1, m + 1) / m
    measure = TiltMeasure.grid(times, weights, T)
    payoff = _asian_payoff(K, T, m)
    return TiltSolution(
        measure=measure,
        objective=dual_objective(model, payoff, measure),
        gradient_norm=abs(resid),
        iterations=n_eval,
        solver="bvp",
        psi=psi,
        C=float(C),
    )


def solve(model: LevyModel, payoff: PayoffSpec, *, asian_solver: str = "bvp") -> TiltSolution:
    """Dispatch on the payoff kind; the BVP falls back to the direct solver."""
    if payoff.kind.european:
        return solve_european(model, payoff)
    K, T, m = payoff.strike, payoff.maturity, payoff.averaging_dates
    if asian_solver == "direct":
        return solve_asian_direct(model, K, T, m)
    try:
        return solve_asian_bvp(model, K, T, m)
    except (BracketingFailure, DomainExit, MaxIterations):
        return solve_asian_direct(model, K, T, m)
