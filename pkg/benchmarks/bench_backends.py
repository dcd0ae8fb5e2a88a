#!/usr/bin/env python3
"""Benchmark the compiled core against the pure-numpy fallback.

Times the log-posterior gradient kernel and a full posterior chain on the
bundled case-study fixture.  Run after building the extension:

    python benchmarks/bench_backends.py
"""

import math
import time

import numpy as np

from ssaltplan import _pycore, casestudy
from ssaltplan.likelihood import pack_data
from ssaltplan.simulate import RngSeed, generator

try:
    from ssaltplan import _core
except ImportError:
    _core = None


def time_fn(fn, min_time=0.5):
    n = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        elapsed = time.perf_counter() - t0
        if elapsed > min_time:
            return elapsed / n
        n = max(n * 2, int(n * min_time / max(elapsed, 1e-9)))


def main():
    data = casestudy.load_dataset()
    prior = casestudy.stock_prior("I")
    times, causes, x1, x2, tau, tc, n_cens = pack_data(data)
    qconst = math.log(-math.log1p(-prior.q))
    args = (prior.alphas, prior.rates, qconst, times, causes,
            x1, x2, tau, tc, n_cens, True)
    z = np.log(np.maximum(prior.mean(), 1e-3))

    backends = [("pure", _pycore)] + ([("compiled", _core)] if _core else [])
    print(f"{'benchmark':<34}" + "".join(f"{name:>14}" for name, _ in backends)
          + f"{'speedup':>10}")

    rows = []
    grad_times = {}
    for name, mod in backends:
        grad_times[name] = time_fn(lambda m=mod: m.logpost_grad_z(z, *args))
    rows.append(("log-posterior gradient (1 eval)", {
        k: f"{v * 1e6:9.1f} us" for k, v in grad_times.items()}))

    chain_times = {}
    for name, mod in backends:
        def run(m=mod):
            rng = generator(RngSeed(2026, 0))
            m.run_nuts_chain(z, *args, 300, 300, 0.8, 10, "dense", rng)
        chain_times[name] = time_fn(run, min_time=1.0)
    rows.append(("posterior chain (300+300 iter)", {
        k: f"{v * 1e3:9.1f} ms" for k, v in chain_times.items()}))

    for label, vals in rows:
        line = f"{label:<34}"
        for name, _ in backends:
            line += f"{vals[name]:>14}"
        if _core:
            base = grad_times if "gradient" in label else chain_times
            line += f"{base['pure'] / base['compiled']:9.1f}x"
        print(line)

    if _core is None:
        print("\ncompiled core unavailable; showing the fallback only")


if __name__ == "__main__":
    main()
