#!/usr/bin/env python3
"""Benchmark the compiled phase-field kernel against the NumPy fallback.

Runs the same update on identical inputs through both backends, checks the
results agree, and reports per-step wall time across grid sizes.

    python3 benchmarks/benchmark_kernels.py [--sizes 16,32,48] [--channels 20]
"""

import argparse
import time

import numpy as np

from meltpath import _pf_numpy

try:
    from meltpath import _pf_core
except ImportError:
    _pf_core = None


def time_backend(fn, eta, zeta, args, repeats):
    fn(eta, zeta, *args)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        out, bad = fn(eta, zeta, *args)
    dt = (time.perf_counter() - t0) / repeats
    return dt, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="16,32,48")
    parser.add_argument("--channels", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=10)
    cli = parser.parse_args()

    m_g, gamma, kappa, L_g = 3.125e5, 1.5, 3.6e-6, 1.389e-7
    dt_s, dx_m = 0.4, 2.155e-6
    args = (m_g, gamma, kappa, L_g, dt_s, dx_m)

    print(f"{'grid':>10} {'channels':>8} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for size in (int(s) for s in cli.sizes.split(",")):
        rng = np.random.default_rng(0)
        eta = rng.uniform(0, 1, size=(cli.channels, size, size, size))
        zeta = rng.uniform(0, 1, size=(size, size, size))
        t_np, out_np = time_backend(_pf_numpy.step_tdgl, eta, zeta, args, cli.repeats)
        if _pf_core is None:
            print(f"{size:>10} {cli.channels:>8} {t_np * 1e3:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_cy, out_cy = time_backend(_pf_core.step_tdgl, eta, zeta, args, cli.repeats)
        assert np.allclose(out_np, out_cy, rtol=0, atol=1e-13), "backends disagree"
        print(f"{size:>10} {cli.channels:>8} {t_np * 1e3:>10.2f} {t_cy * 1e3:>10.2f} "
              f"{t_np / t_cy:>8.2f}")


if __name__ == "__main__":
    main()
