#!/usr/bin/env python3
"""Benchmark the compiled trajectory kernels against the NumPy fallback.

Runs the bundled estimation workload (path graph, N=10, d=10, lazy walk
alpha=0.1) through both backends and reports per-trial wall times.  Usage::

    python benchmarks/bench_kernels.py [--trials 20] [--iterations 5000]
"""

import argparse
import time

import numpy as np

import markov_admm as ma
from markov_admm import _kernels_py, backend
from markov_admm.graph import arc_arrays


def _workload():
    g = ma.path_graph(10)
    rng = np.random.default_rng(42)
    targets = rng.normal(size=(10, 10))
    p = ma.ProblemInstance(g, tuple(ma.Quadratic(t) for t in targets))
    chain = ma.random_walk_chain(10, 0.1)
    cert = ma.kkt_certificate(p)
    return g, p, chain, cert, targets


def _bench(fn, trials):
    t0 = time.perf_counter()
    for _ in range(trials):
        fn()
    return (time.perf_counter() - t0) / trials


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=5000)
    args = ap.parse_args()

    g, p, chain, cert, targets = _workload()
    arrs = arc_arrays(g)
    state = ma.init_state(p)
    path = ma.simulate(chain, 0, args.iterations, seed=7)
    f_star = float(((cert.x_star[None, :] - targets) ** 2).sum())

    def run_python():
        _kernels_py.async_trajectory(
            state.x, targets, state.beta, state.z, 1.0, arrs, path.states,
            cert.x_star, cert.z_star, cert.beta_star, f_star)

    rows = [("python", _bench(run_python, args.trials))]

    if backend.backend_name() == "c":
        from markov_admm import _kernels

        def run_c():
            _kernels.async_trajectory(
                state.x, targets, state.beta, state.z, 1.0,
                arrs["arc_src"], arrs["arc_dst"], arrs["nbr_indptr"],
                arrs["nbr_nodes"], arrs["nbr_arcs"], path.states,
                cert.x_star, cert.z_star, cert.beta_star, f_star)

        rows.append(("c", _bench(run_c, args.trials)))
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    print(f"\nasync trajectory, {args.iterations} iterations, "
          f"mean over {args.trials} trials:")
    base = rows[0][1]
    for name, t in rows:
        print(f"  {name:>7s}: {t * 1e3:8.2f} ms/trial   ({base / t:5.1f}x)")


if __name__ == "__main__":
    main()
