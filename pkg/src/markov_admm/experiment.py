"""Experiment orchestration: Monte Carlo trials, averaging, and emission.

Trials are independent runs of the configured engines on shared data.  The
chain seed of trial t under the e-th configured engine is drawn from
``SeedSequence(master_seed, spawn_key=(e, t))``, so results are a pure
function of the config and master seed.  Trial metrics are reduced in
trial-index order with exact (compensated) summation, making the averages
invariant under any execution-order permutation of the trials.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .admm import run
from .analysis import contraction_constants, fit_linear_rate, kkt_certificate
from .config import ExperimentConfig
from .errors import DegenerateSeries
from .markov import stationary_comparison

__all__ = ["ResultBundle", "run_experiment", "emit"]

_MEAN_FIELDS = ("g_err", "x_err", "obj_gap", "consensus_res")
_DEFAULT_BURN_FRACTION = 10  # burn-in = iterations // 10 when not certifiable


@dataclass(frozen=True, eq=False)
class ResultBundle:
    """Everything an experiment produced, ready for emission."""

    config: dict                 # echo with defaults filled
    engines: dict                # name -> per-engine results dict
    certificate_residuals: dict
    constants: dict | None
    stationary: dict | None
    runtime: float


def _worker_count(trials: int) -> int:
    cap = os.environ.get("MARKOV_ADMM_THREADS")
    workers = min(trials, os.cpu_count() or 1)
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, workers)


def _fsum_mean_stderr(rows):
    """Exact-summation mean and standard error across trials, per entry.

    ``rows`` is a (T, K) array-like; reduction order is independent of how
    the trials were scheduled because fsum is exactly rounded.
    """
    rows = [np.asarray(r, dtype=np.float64) for r in rows]
    T = len(rows)
    K = rows[0].shape[0]
    mean = np.empty(K)
    stderr = np.zeros(K)
    for k in range(K):
        vals = [r[k] for r in rows]
        m = math.fsum(vals) / T
        mean[k] = m
        if T > 1:
            var = math.fsum((v - m) ** 2 for v in vals) / (T - 1)
            stderr[k] = math.sqrt(var / T)
    return mean, stderr


def _trial_seed(master_seed: int, engine_index: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(engine_index, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def run_experiment(cfg: ExperimentConfig) -> ResultBundle:
    """Execute every configured engine for the configured number of trials.

    The reference optimum is computed once and shared; the synchronous
    engine is deterministic, so it runs once regardless of the trial count.
    Raises on any trial failure; partial results are never returned.
    """
    t_start = time.perf_counter()
    certificate = kkt_certificate(cfg.problem)

    constants = None
    if cfg.emit_constants:
        constants = contraction_constants(cfg.problem, cfg.rho, cfg.chain).as_dict()

    stationary = None
    if cfg.chain is not None and cfg.chain_alpha is not None:
        stationary = stationary_comparison(cfg.chain, cfg.chain_alpha)

    engines_out = {}
    for e_idx, engine in enumerate(cfg.engines):
        t_engine = time.perf_counter()
        if engine == "sync":
            records = [run(cfg.problem, cfg.rho, "sync", iterations=cfg.iterations,
                           certificate=certificate)]
            trial_seeds = []
        else:
            trial_seeds = [_trial_seed(cfg.master_seed, e_idx, t)
                           for t in range(cfg.trials)]

            def one_trial(seed):
                return run(cfg.problem, cfg.rho, "async", chain=cfg.chain,
                           i0=cfg.i0, iterations=cfg.iterations, seed=seed,
                           certificate=certificate)

            workers = _worker_count(cfg.trials)
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    records = list(pool.map(one_trial, trial_seeds))
            else:
                records = [one_trial(s) for s in trial_seeds]

        result = {"k": np.arange(cfg.iterations + 1),
                  "work_per_iteration": records[0].work_per_iteration,
                  "trial_seeds": trial_seeds,
                  "trials_executed": len(records)}
        for name in _MEAN_FIELDS:
            mean, stderr = _fsum_mean_stderr([r.metrics[name] for r in records])
            result[f"{name}_mean"] = mean
            result[f"{name}_stderr"] = stderr

        if constants is not None and constants["certifiable"]:
            burn_in = constants["k_prime"]
        else:
            burn_in = max(1, cfg.iterations // _DEFAULT_BURN_FRACTION)
        try:
            rate, r2 = fit_linear_rate(result["g_err_mean"], burn_in)
            result["fitted_rate"] = rate
            result["fit_r_squared"] = r2
            result["non_contractive"] = bool(rate >= 1.0)
        except DegenerateSeries:
            result["fitted_rate"] = None
            result["fit_r_squared"] = None
            result["non_contractive"] = None
        result["burn_in"] = burn_in
        result["wall_time"] = time.perf_counter() - t_engine
        engines_out[engine] = result

    return ResultBundle(
        config=cfg.echo,
        engines=engines_out,
        certificate_residuals=certificate.kkt_residuals,
        constants=constants,
        stationary=stationary,
        runtime=time.perf_counter() - t_start,
    )


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_for(result) -> str:
    header = ("k,g_err_mean,g_err_stderr,x_err_mean,x_err_stderr,"
              "obj_gap_mean,consensus_res_mean")
    lines = [header]
    K = len(result["k"])
    for k in range(K):
        lines.append(",".join([
            str(int(result["k"][k])),
            repr(float(result["g_err_mean"][k])),
            repr(float(result["g_err_stderr"][k])),
            repr(float(result["x_err_mean"][k])),
            repr(float(result["x_err_stderr"][k])),
            repr(float(result["obj_gap_mean"][k])),
            repr(float(result["consensus_res_mean"][k])),
        ]))
    return "\n".join(lines) + "\n"


def emit(bundle: ResultBundle, out_dir) -> list[str]:
    """Write metrics_<engine>.csv, constants.json (when computed), summary.json.

    CSV floats are shortest round-trip decimal representations with '.'
    separators and LF line endings; writes are atomic per file.
    """
    import json

    os.makedirs(out_dir, exist_ok=True)
    written = []
    summary_engines = {}
    for engine, result in bundle.engines.items():
        path = os.path.join(out_dir, f"metrics_{engine}.csv")
        _atomic_write(path, _csv_for(result))
        written.append(path)
        summary_engines[engine] = {
            "fitted_rate": result["fitted_rate"],
            "fit_r_squared": result["fit_r_squared"],
            "non_contractive": result["non_contractive"],
            "burn_in": result["burn_in"],
            "work_per_iteration": result["work_per_iteration"],
            "trials_executed": result["trials_executed"],
            "trial_seeds": [int(s) for s in result["trial_seeds"]],
            "wall_time": result["wall_time"],
            "final_g_err_mean": float(result["g_err_mean"][-1]),
            "final_x_err_mean": float(result["x_err_mean"][-1]),
        }

    if bundle.constants is not None:
        path = os.path.join(out_dir, "constants.json")
        _atomic_write(path, json.dumps(bundle.constants, indent=2) + "\n")
        written.append(path)

    summary = {
        "config": bundle.config,
        "engines": summary_engines,
        "kkt_residuals": bundle.certificate_residuals,
        "certifiable": None if bundle.constants is None
        else bundle.constants["certifiable"],
        "stationary_comparison": bundle.stationary,
        "runtime": bundle.runtime,
    }
    path = os.path.join(out_dir, "summary.json")
    _atomic_write(path, json.dumps(summary, indent=2) + "\n")
    written.append(path)
    return written
