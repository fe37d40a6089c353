"""Synchronous and asynchronous consensus-ADMM engines.

State layout: per-node primal block ``x`` (N x d), per-arc duals ``beta``
(2|E| x d, stored for both directions with the antisymmetry
beta[(j,i)] = -beta[(i,j)]), and per-arc auxiliaries ``z`` (mirrored per
unordered pair).  The synchronous engine updates every node each iteration;
the asynchronous engine updates the single node selected by a Markov chain
and the single arc joining the current and previous chain states.

Primal updates always read the *current* neighbor values, never the stored
auxiliaries; ``z`` is bookkeeping that feeds the weighted error metric and
is refreshed lazily in asynchronous mode.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .errors import InvalidDual, InvalidTransition, ValidationError
from .graph import arc_arrays
from .markov import ChainPath, MarkovChain, simulate
from .objective import ProblemInstance, local_x_update

__all__ = [
    "AlgState",
    "RunRecord",
    "init_state",
    "sync_step",
    "async_step",
    "hypothetical_full_update",
    "run",
]

_ANTISYM_TOL = 1e-12
_RANGE_TOL = 1e-8


@dataclass(frozen=True)
class AlgState:
    """Algorithm state at iteration ``k``; arrays are treated as immutable."""

    k: int
    x: np.ndarray          # (N, d)
    beta: np.ndarray       # (2|E|, d)
    z: np.ndarray          # (2|E|, d)
    last_mc_state: int | None = None


@dataclass(frozen=True)
class RunRecord:
    """Trajectory-level output of :func:`run`."""

    config: dict
    metrics: dict          # arrays: k, g_err, x_err, obj_gap, consensus_res
    chain_path: ChainPath | None
    wall_time: float
    seed_lineage: dict
    final_state: AlgState
    work_per_iteration: int


def _as_x0(p, x0):
    if isinstance(x0, str):
        if x0 != "zeros":
            raise ValidationError(f"unknown x0 spec {x0!r}")
        return np.zeros((p.num_nodes, p.dim))
    x = np.asarray(x0, dtype=np.float64)
    if x.shape != (p.num_nodes, p.dim):
        raise ValidationError(f"x0 has shape {x.shape}, expected {(p.num_nodes, p.dim)}")
    return x.copy()


def init_state(p: ProblemInstance, x0="zeros", beta0="zeros") -> AlgState:
    """Initial state with ``z`` set to the per-arc endpoint averages of x0.

    A supplied ``beta0`` must be antisymmetric across mirror arcs and lie in
    the range of the transposed oriented incidence matrix (equivalently, be
    expressible as per-arc differences of node potentials); both are
    required for the dual recursion's invariants to hold from the start.
    """
    g = p.graph
    x = _as_x0(p, x0)
    na = g.num_arcs
    if isinstance(beta0, str):
        if beta0 != "zeros":
            raise ValidationError(f"unknown beta0 spec {beta0!r}")
        beta = np.zeros((na, p.dim))
    else:
        beta = np.asarray(beta0, dtype=np.float64)
        if beta.shape != (na, p.dim):
            raise ValidationError(f"beta0 has shape {beta.shape}, expected {(na, p.dim)}")
        beta = beta.copy()
        scale = max(1.0, float(np.abs(beta).max()))
        for q in range(0, na, 2):
            if np.abs(beta[q] + beta[q + 1]).max() > _ANTISYM_TOL * scale:
                raise InvalidDual(f"beta0 not antisymmetric on arc pair {q},{q + 1}")
        if na:
            arrs = arc_arrays(g)
            im_t = np.zeros((na, g.num_nodes))
            im_t[np.arange(na), arrs["arc_src"]] = 1.0
            im_t[np.arange(na), arrs["arc_dst"]] = -1.0
            y, *_ = np.linalg.lstsq(im_t, beta, rcond=None)
            resid = np.linalg.norm(im_t @ y - beta)
            if resid > _RANGE_TOL * scale:
                raise InvalidDual(
                    f"beta0 outside the oriented-incidence range (residual {resid:.3e})")
    arrs = arc_arrays(g) if na else None
    if na:
        z = 0.5 * (x[arrs["arc_src"]] + x[arrs["arc_dst"]])
    else:
        z = np.zeros((0, p.dim))
    return AlgState(k=0, x=x, beta=beta, z=z)


def _lambda_sum(beta, arrs, i):
    lo, hi = arrs["nbr_indptr"][i], arrs["nbr_indptr"][i + 1]
    if hi == lo:
        return 0.0
    return beta[arrs["nbr_arcs"][lo:hi]].sum(axis=0)


def _node_update(p, rho, x, beta, arrs, i):
    lo, hi = arrs["nbr_indptr"][i], arrs["nbr_indptr"][i + 1]
    nbrs = arrs["nbr_nodes"][lo:hi]
    means = 0.5 * (x[i] + x[nbrs])
    lam = _lambda_sum(beta, arrs, i)
    return local_x_update(p.objectives[i], lam, list(means), rho)


def hypothetical_full_update(p: ProblemInstance, rho: float, state: AlgState):
    """One synchronous step of every node and arc, without committing it.

    Returns ``(x_hat, z_hat, beta_hat)`` where every node solves its local
    subproblem against the current iterate, duals advance by half the
    penalized primal disagreement, and auxiliaries take the new endpoint
    averages.
    """
    arrs = arc_arrays(p.graph)
    x_hat = np.empty_like(state.x)
    for i in range(p.num_nodes):
        x_hat[i] = _node_update(p, rho, state.x, state.beta, arrs, i)
    src, dst = arrs["arc_src"], arrs["arc_dst"]
    beta_hat = state.beta + 0.5 * rho * (x_hat[src] - x_hat[dst])
    z_hat = 0.5 * (x_hat[src] + x_hat[dst])
    return x_hat, z_hat, beta_hat


def sync_step(p: ProblemInstance, rho: float, state: AlgState) -> AlgState:
    """Commit one synchronous iteration (all nodes, then all arcs)."""
    x_hat, z_hat, beta_hat = hypothetical_full_update(p, rho, state)
    return AlgState(k=state.k + 1, x=x_hat, beta=beta_hat, z=z_hat,
                    last_mc_state=state.last_mc_state)


def async_step(p: ProblemInstance, rho: float, state: AlgState,
               xi_prev: int, xi_curr: int,
               chain: MarkovChain | None = None) -> AlgState:
    """Commit one asynchronous iteration for the chain move ``xi_prev -> xi_curr``.

    Node ``xi_curr`` re-solves its local subproblem against current values;
    every other primal block is frozen.  When the move crosses an edge, the
    dual and auxiliary on that single arc pair are refreshed; a self-move
    updates the primal block only.
    """
    g = p.graph
    i, j = int(xi_curr), int(xi_prev)
    if not (0 <= i < g.num_nodes and 0 <= j < g.num_nodes):
        raise ValidationError(f"chain states ({j}, {i}) out of range")
    if chain is not None and chain.P[j, i] <= 0.0:
        raise InvalidTransition(f"P[{j}][{i}] = 0")
    if i != j and (min(i, j), max(i, j)) not in g.arc_index:
        raise InvalidTransition(f"no edge between chain states {j} and {i}")

    arrs = arc_arrays(g)
    x = state.x.copy()
    x[i] = _node_update(p, rho, state.x, state.beta, arrs, i)
    beta = state.beta
    z = state.z
    if i != j:
        beta = beta.copy()
        z = z.copy()
        q = g.arc_index[(i, j)]
        qm = g.mirror_arc(q)
        new_beta = beta[q] + 0.5 * rho * (x[i] - x[j])
        beta[q] = new_beta
        beta[qm] = -new_beta
        avg = 0.5 * (x[i] + x[j])
        z[q] = avg
        z[qm] = avg
    return AlgState(k=state.k + 1, x=x, beta=beta, z=z, last_mc_state=i)


def _metric_row(p, rho, x, beta, z, arrs, x_star, z_star, beta_star, f_star):
    g_err = rho * float(((z - z_star) ** 2).sum()) \
        + (1.0 / rho) * float(((beta - beta_star) ** 2).sum())
    x_err = float(((x - x_star[None, :]) ** 2).sum())
    obj = sum(p.objectives[i].value(x[i]) for i in range(p.num_nodes))
    diff = x[arrs["arc_src"]] - x[arrs["arc_dst"]]
    consensus = float(np.sqrt((diff ** 2).sum()))
    return g_err, x_err, obj - f_star, consensus


def run(p: ProblemInstance, rho: float, engine: str,
        chain: MarkovChain | None = None, i0: int = 0,
        iterations: int = 100, seed: int = 0, *,
        certificate=None, x0="zeros", beta0="zeros") -> RunRecord:
    """Execute ``iterations`` steps of one engine, recording metrics each step.

    Parameters
    ----------
    engine : {"sync", "async"}
        Asynchronous runs need ``chain`` and draw their activation sequence
        from :func:`markov_admm.markov.simulate` with the given seed.
    certificate : OptimalCertificate, optional
        Precomputed reference optimum; computed on the fly when omitted.

    The record is a pure function of the arguments: same instance, engine,
    and seed give bit-identical trajectories (per backend).
    """
    if engine not in ("sync", "async"):
        raise ValidationError(f"unknown engine {engine!r}")
    if engine == "async" and chain is None:
        raise ValidationError("async engine requires a chain")
    if iterations < 0:
        raise ValidationError("iterations must be nonnegative")
    if certificate is None:
        from .analysis import kkt_certificate
        certificate = kkt_certificate(p)

    arrs = arc_arrays(p.graph)
    x_star = certificate.x_star
    z_star = certificate.z_star
    beta_star = certificate.beta_star
    f_star = sum(o.value(x_star) for o in p.objectives)

    state0 = init_state(p, x0=x0, beta0=beta0)
    path = None
    if engine == "async":
        path = simulate(chain, i0, iterations, seed)

    t0 = time.perf_counter()
    if p.is_quadratic():
        targets = p.targets()
        if engine == "sync":
            out = backend.sync_trajectory(
                state0.x, targets, state0.beta, state0.z, rho, arrs, iterations,
                x_star, z_star, beta_star, f_star)
        else:
            out = backend.async_trajectory(
                state0.x, targets, state0.beta, state0.z, rho, arrs,
                path.states, x_star, z_star, beta_star, f_star)
        metrics, x_f, beta_f, z_f = out
        final = AlgState(k=iterations, x=x_f, beta=beta_f, z=z_f,
                         last_mc_state=int(path.states[-1]) if path is not None else None)
    else:
        ks = np.arange(iterations + 1)
        g_err = np.empty(iterations + 1)
        x_err = np.empty(iterations + 1)
        obj_gap = np.empty(iterations + 1)
        cons = np.empty(iterations + 1)
        state = state0
        g_err[0], x_err[0], obj_gap[0], cons[0] = _metric_row(
            p, rho, state.x, state.beta, state.z, arrs, x_star, z_star, beta_star, f_star)
        for k in range(1, iterations + 1):
            if engine == "sync":
                state = sync_step(p, rho, state)
            else:
                state = async_step(p, rho, state, int(path.states[k - 1]),
                                   int(path.states[k]), chain)
            g_err[k], x_err[k], obj_gap[k], cons[k] = _metric_row(
                p, rho, state.x, state.beta, state.z, arrs,
                x_star, z_star, beta_star, f_star)
        metrics = {"k": ks, "g_err": g_err, "x_err": x_err,
                   "obj_gap": obj_gap, "consensus_res": cons}
        final = state
    wall = time.perf_counter() - t0

    return RunRecord(
        config={"engine": engine, "rho": rho, "iterations": iterations,
                "i0": i0 if engine == "async" else None,
                "num_nodes": p.num_nodes, "dim": p.dim,
                "backend": backend.backend_name() if p.is_quadratic() else "generic"},
        metrics=metrics,
        chain_path=path,
        wall_time=wall,
        seed_lineage={"chain_seed": int(seed) if engine == "async" else None},
        final_state=final,
        work_per_iteration=p.num_nodes if engine == "sync" else 1,
    )
