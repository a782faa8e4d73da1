"""Compiled vs numpy kernel timings.

    python3 benchmarks/bench_kernels.py [--n-samples N] [--repeat R]

Times the gamma/normal draw for one cell, the path walk on a fixed batch,
and an end-to-end tilted Asian price. Each figure is the best of ``repeat``
runs. Both backends consume identical random streams, so the end-to-end
estimates are printed as well and should agree to rounding.
"""
import argparse
import time

import numpy as np

from levy_isamp import PayoffSpec, price_importance, solve
from levy_isamp._backend import BACKENDS
from levy_isamp.mc_engine import _draw_batch, _payoff_layout, _plan, substream
from levy_isamp.tables import vg_1d


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(n_samples, repeat, m=100):
    model = vg_1d()
    payoff = PayoffSpec.asian_put(1.0, 1.0, m)
    measure = solve(model, payoff).measure
    plan = _plan(model, measure, payoff.maturity, m)
    kind, flags = _payoff_layout(payoff, plan.grid)
    size = 8192
    rows = []
    for name, k in BACKENDS.items():
        t_draw, _ = best_of(lambda: [k.draw_cell(substream(0, 0, c), float(plan.shape[c]), float(plan.lam), size, 1)
                                     for c in range(m)], repeat)
        gamma, z = _draw_batch(plan, 0, 0, size, 1, k)
        pay, llr = np.empty(size), np.empty(size)

        def walk():
            k.walk(gamma, z, plan.drift, plan.bt, plan.chol, plan.eta, kind, float(payoff.strike),
                   np.ascontiguousarray(payoff.spot), flags, plan.log_mgf, pay, llr)

        t_walk, _ = best_of(walk, repeat)
        t_all, rep = best_of(lambda: price_importance(model, payoff, measure, m, n_samples, 0, backend=name), repeat)
        rows.append((name, t_draw, t_walk, t_all, rep.estimate))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-samples", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = bench(args.n_samples, args.repeat)
    print(f"asian put, m=100, batch 8192, N={args.n_samples}, best of {args.repeat}")
    print(f"{'backend':<10}{'draw s':>10}{'walk s':>10}{'price s':>10}  estimate")
    for name, d, w, a, est in rows:
        print(f"{name:<10}{d:>10.4f}{w:>10.4f}{a:>10.3f}  {est:.12g}")
    if len(rows) == 2:
        (_, d0, w0, a0, _), (_, d1, w1, a1, _) = rows
        print(f"speedup (python/compiled): draw {d0 / d1:.2f}x, walk {w0 / w1:.2f}x, price {a0 / a1:.2f}x")
    else:
        print("compiled extension not built; python backend only")


if __name__ == "__main__":
    main()
