"""Selects the compiled trajectory kernels when available.

The C extension is optional: building it requires Cython and a compiler,
and everything works (slower) without it.  Selection happens once at
import; set ``MARKOV_ADMM_BACKEND=python`` to force the NumPy fallback or
``MARKOV_ADMM_BACKEND=c`` to insist on the extension.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_FORCED = os.environ.get("MARKOV_ADMM_BACKEND", "").strip().lower()

_c_kernels = None
if _FORCED != "python":
    try:
        from . import _kernels as _c_kernels
    except ImportError:
        _c_kernels = None
if _FORCED == "c" and _c_kernels is None:
    raise ImportError(
        "MARKOV_ADMM_BACKEND=c but the compiled markov_admm._kernels "
        "extension is not available; reinstall with a C compiler present")


def backend_name() -> str:
    return "c" if _c_kernels is not None else "python"


def _prep(x0, targets, beta0, z0, x_star, z_star, beta_star):
    c = np.ascontiguousarray
    return (c(x0, dtype=np.float64), c(targets, dtype=np.float64),
            c(beta0, dtype=np.float64), c(z0, dtype=np.float64),
            c(x_star, dtype=np.float64), c(z_star, dtype=np.float64),
            c(beta_star, dtype=np.float64))


def sync_trajectory(x0, targets, beta0, z0, rho, arrs, iterations,
                    x_star, z_star, beta_star, f_star):
    """Whole synchronous trajectory; returns (metrics dict, x, beta, z)."""
    x0, targets, beta0, z0, x_star, z_star, beta_star = _prep(
        x0, targets, beta0, z0, x_star, z_star, beta_star)
    if _c_kernels is None:
        return _kernels_py.sync_trajectory(
            x0, targets, beta0, z0, rho, arrs, iterations,
            x_star, z_star, beta_star, f_star)
    g_err, x_err, obj_gap, cons, x, beta, z = _c_kernels.sync_trajectory(
        x0, targets, beta0, z0, float(rho),
        arrs["arc_src"], arrs["arc_dst"], arrs["nbr_indptr"],
        arrs["nbr_nodes"], arrs["nbr_arcs"], int(iterations),
        x_star, z_star, beta_star, float(f_star))
    metrics = {"k": np.arange(iterations + 1), "g_err": g_err, "x_err": x_err,
               "obj_gap": obj_gap, "consensus_res": cons}
    return metrics, x, beta, z


def async_trajectory(x0, targets, beta0, z0, rho, arrs, path_states,
                     x_star, z_star, beta_star, f_star):
    """Whole asynchronous trajectory along ``path_states``."""
    x0, targets, beta0, z0, x_star, z_star, beta_star = _prep(
        x0, targets, beta0, z0, x_star, z_star, beta_star)
    path = np.ascontiguousarray(path_states, dtype=np.int64)
    if _c_kernels is None:
        return _kernels_py.async_trajectory(
            x0, targets, beta0, z0, rho, arrs, path,
            x_star, z_star, beta_star, f_star)
    iterations = len(path) - 1
    g_err, x_err, obj_gap, cons, x, beta, z = _c_kernels.async_trajectory(
        x0, targets, beta0, z0, float(rho),
        arrs["arc_src"], arrs["arc_dst"], arrs["nbr_indptr"],
        arrs["nbr_nodes"], arrs["nbr_arcs"], path,
        x_star, z_star, beta_star, float(f_star))
    metrics = {"k": np.arange(iterations + 1), "g_err": g_err, "x_err": x_err,
               "obj_gap": obj_gap, "consensus_res": cons}
    return metrics, x, beta, z
