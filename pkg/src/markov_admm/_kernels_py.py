"""NumPy implementation of the hot trajectory loops (quadratic objectives).

This is the fallback backend; :mod:`markov_admm._kernels` is the compiled
twin with identical semantics.  Both take the initial state plus flat arc
arrays, run the whole trajectory, and return the per-iteration metric
arrays together with the final state.  Update formula per node i with
degree d_i, target a_i and dual sum s_i:

    x_i <- (a_i - s_i + rho * (d_i x_i + sum_p x_p) / 2) / (1 + rho d_i)

followed (sync: every arc; async: the triggered arc pair only) by

    beta_ij <- beta_ij + (rho/2) (x_i - x_j),   z_ij <- (x_i + x_j) / 2.
"""

from __future__ import annotations

import numpy as np


def _metrics_into(out, k, rho, x, beta, z, targets, x_star, z_star, beta_star, f_star):
    g_err, x_err, obj_gap, cons = out
    g_err[k] = rho * float(((z - z_star) ** 2).sum()) \
        + (1.0 / rho) * float(((beta - beta_star) ** 2).sum())
    x_err[k] = float(((x - x_star[None, :]) ** 2).sum())
    obj_gap[k] = float(((x - targets) ** 2).sum()) - f_star
    cons[k] = 0.0  # filled by caller (needs arc arrays)


def _alloc(iterations):
    return (np.empty(iterations + 1), np.empty(iterations + 1),
            np.empty(iterations + 1), np.empty(iterations + 1))


def _consensus(x, src, dst):
    d = x[src] - x[dst]
    return float(np.sqrt((d * d).sum()))


def _record(out, k, rho, x, beta, z, targets, src, dst,
            x_star, z_star, beta_star, f_star):
    _metrics_into(out, k, rho, x, beta, z, targets, x_star, z_star, beta_star, f_star)
    out[3][k] = _consensus(x, src, dst)


def sync_trajectory(x0, targets, beta0, z0, rho, arrs, iterations,
                    x_star, z_star, beta_star, f_star):
    src, dst = arrs["arc_src"], arrs["arc_dst"]
    indptr, nbr_nodes, nbr_arcs = arrs["nbr_indptr"], arrs["nbr_nodes"], arrs["nbr_arcs"]
    deg = arrs["degrees"].astype(np.float64)
    n = x0.shape[0]

    x = np.array(x0, dtype=np.float64)
    beta = np.array(beta0, dtype=np.float64)
    z = np.array(z0, dtype=np.float64)
    out = _alloc(iterations)
    _record(out, 0, rho, x, beta, z, targets, src, dst,
            x_star, z_star, beta_star, f_star)

    x_new = np.empty_like(x)
    for k in range(1, iterations + 1):
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            s_beta = beta[nbr_arcs[lo:hi]].sum(axis=0)
            s_x = x[nbr_nodes[lo:hi]].sum(axis=0)
            x_new[i] = (targets[i] - s_beta + rho * (deg[i] * x[i] + s_x) / 2.0) \
                / (1.0 + rho * deg[i])
        x, x_new = x_new, x  # swap buffers; x_new is fully rewritten next pass
        beta += 0.5 * rho * (x[src] - x[dst])
        z = 0.5 * (x[src] + x[dst])
        _record(out, k, rho, x, beta, z, targets, src, dst,
                x_star, z_star, beta_star, f_star)

    metrics = {"k": np.arange(iterations + 1), "g_err": out[0], "x_err": out[1],
               "obj_gap": out[2], "consensus_res": out[3]}
    return metrics, x, beta, z


def async_trajectory(x0, targets, beta0, z0, rho, arrs, path_states,
                     x_star, z_star, beta_star, f_star):
    src, dst = arrs["arc_src"], arrs["arc_dst"]
    indptr, nbr_nodes, nbr_arcs = arrs["nbr_indptr"], arrs["nbr_nodes"], arrs["nbr_arcs"]
    deg = arrs["degrees"].astype(np.float64)
    iterations = len(path_states) - 1

    # arc lookup: position of arc (i, j) for neighbor pairs
    arc_of = {}
    n = x0.shape[0]
    for i in range(n):
        for slot in range(indptr[i], indptr[i + 1]):
            arc_of[(i, int(nbr_nodes[slot]))] = int(nbr_arcs[slot])

    x = np.array(x0, dtype=np.float64)
    beta = np.array(beta0, dtype=np.float64)
    z = np.array(z0, dtype=np.float64)
    out = _alloc(iterations)
    _record(out, 0, rho, x, beta, z, targets, src, dst,
            x_star, z_star, beta_star, f_star)

    for k in range(1, iterations + 1):
        j = int(path_states[k - 1])
        i = int(path_states[k])
        lo, hi = indptr[i], indptr[i + 1]
        s_beta = beta[nbr_arcs[lo:hi]].sum(axis=0)
        s_x = x[nbr_nodes[lo:hi]].sum(axis=0)
        x[i] = (targets[i] - s_beta + rho * (deg[i] * x[i] + s_x) / 2.0) \
            / (1.0 + rho * deg[i])
        if i != j:
            q = arc_of[(i, j)]
            qm = q ^ 1
            nb = beta[q] + 0.5 * rho * (x[i] - x[j])
            beta[q] = nb
            beta[qm] = -nb
            avg = 0.5 * (x[i] + x[j])
            z[q] = avg
            z[qm] = avg
        _record(out, k, rho, x, beta, z, targets, src, dst,
                x_star, z_star, beta_star, f_star)

    metrics = {"k": np.arange(iterations + 1), "g_err": out[0], "x_err": out[1],
               "obj_gap": out[2], "consensus_res": out[3]}
    return metrics, x, beta, z
