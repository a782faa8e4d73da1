"""Pure numpy implementation of the simulation kernels.

Mirrors ``_kernels.pyx`` operation for operation so both backends consume
the same random draws and agree to rounding.
"""
import math

import numpy as np

NAME = "python"


def draw_cell(rng, shape, lam, size, n):
    """Draw one cell: Gamma(shape, 1/lam) increments then (size, n) normals.

    Gamma variates use Marsaglia-Tsang with squeeze, in rounds (all pending
    normals, then all pending uniforms) until every slot is accepted. Shapes
    below one are boosted: ``G(a) = G(a + 1) U^{1/a}``, done in log space.
    """
    a = float(shape)
    if not a > 0.0:
        raise ValueError("gamma shape must be positive")
    boost = a < 1.0
    a1 = a + 1.0 if boost else a
    d = a1 - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    pending = np.arange(size)
    while pending.size:
        k = pending.size
        x = rng.standard_normal(k)
        u = rng.random(k)
        vals = np.empty(k)
        acc = mt_accept(x, u, d, c, vals)
        out[pending[acc]] = vals[acc]
        pending = pending[~acc]
    if boost:
        w = rng.random(size)
        with np.errstate(divide="ignore"):
            out *= np.exp(np.log(w) / a)
    out /= lam
    z = rng.standard_normal((size, n))
    return out, z


def mt_accept(x, u, d, c, out):
    """Marsaglia-Tsang acceptance step for one round of candidates.

    Writes ``d * (1 + c x)^3`` into ``out`` and returns the boolean mask of
    accepted candidates (squeeze test first, then the log test).
    """
    t = 1.0 + c * x
    v = t * t * t
    pos = v > 0.0
    x2 = x * x
    squeeze = u < 1.0 - 0.0331 * (x2 * x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        logtest = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(np.where(pos, v, 1.0)))
    acc = pos & (squeeze | logtest)
    np.multiply(d, v, out=out)
    return acc


def walk(gamma, z, drift, bt, chol, eta, kind, strike, spot, avg_flags, log_mgf,
         out_payoff, out_loglr):
    """Accumulate log-price paths cell by cell and evaluate payoff and LR.

    gamma: (m, N) subordinator increments; z: (m, N, n) standard normals;
    drift, bt, eta: (m, n); chol: (m, n, n) lower-triangular factors.
    ``kind`` 0 is European (terminal basket sum), 1 is the Asian average.
    """
    m, N = gamma.shape
    n = drift.shape[1]
    x = np.zeros((N, n))
    lr = np.zeros(N)
    acc = np.zeros(N)
    n_avg = 0
    for j in range(m):
        g = gamma[j]
        sg = np.sqrt(g)
        zj = z[j]
        for i in range(n):
            s = chol[j, i, 0] * zj[:, 0]
            for k in range(1, i + 1):
                s = s + chol[j, i, k] * zj[:, k]
            dx = drift[j, i] + bt[j, i] * g + sg * s
            lr = lr + eta[j, i] * dx
            x[:, i] = x[:, i] + dx
        if kind == 1 and avg_flags[j]:
            acc = acc + spot[0] * np.exp(x[:, 0])
            n_avg += 1
    if kind == 1:
        np.maximum(strike - acc / n_avg, 0.0, out=out_payoff)
    else:
        total = spot[0] * np.exp(x[:, 0])
        for i in range(1, n):
            total = total + spot[i] * np.exp(x[:, i])
        np.maximum(strike - total, 0.0, out=out_payoff)
    np.subtract(log_mgf, lr, out=out_loglr)
