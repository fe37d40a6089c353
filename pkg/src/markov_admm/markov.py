"""Node-activation Markov chains: construction, spectra, and simulation.

Chains are row-stochastic matrices whose off-diagonal support is contained
in the edge set of an undirected graph (self-loops are permitted, and are in
fact required for aperiodicity of the lazy random walk used by the bundled
estimation experiment).
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AperiodicityWarning,
    InvalidAlpha,
    InvalidDistribution,
    NumericalError,
    PeriodicChainError,
    ValidationError,
)
from .graph import Graph, path_graph

__all__ = [
    "MarkovChain",
    "ChainPath",
    "metropolis_hastings",
    "random_walk_chain",
    "closed_form_stationary",
    "stationary_comparison",
    "mixing_constants",
    "simulate",
]

K_CHECK_DEFAULT = 500

_ROW_SUM_TOL = 1e-12
_STATIONARY_TOL = 1e-10
_PERIODIC_TOL = 1e-10
_GAMMA_FLOOR = 1e-12
_B_FLOOR = 1e-12
# Deviations below this are floating-point noise; the mixing-prefactor
# calibration stops there instead of dividing noise by a vanishing gamma^k.
_DEVIATION_FLOOR = 1e-13


class MarkovChain:
    """Row-stochastic transition matrix conforming to a graph.

    Parameters
    ----------
    P : (N, N) array
        Transition probabilities.  Rows must sum to one within 1e-12 and
        off-diagonal support must be a subset of the graph's edges.
    graph : Graph
        The supporting communication graph.

    Attributes
    ----------
    pi : (N,) array
        Stationary distribution (principal left eigenvector, normalized).
    gamma : float or None
        Second-largest eigenvalue modulus, floored at 1e-12; None when the
        chain is periodic (some other eigenvalue has modulus one).
    p_min, p_max : float
        Min/max over the strictly positive off-diagonal entries of P.
    """

    def __init__(self, P, graph: Graph):
        P = np.ascontiguousarray(np.asarray(P, dtype=np.float64))
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValidationError("P must be square")
        n = P.shape[0]
        if n != graph.num_nodes:
            raise ValidationError(
                f"P is {n}x{n} but the graph has {graph.num_nodes} nodes")
        if np.any(P < 0):
            raise ValidationError("P has negative entries")
        row_err = np.abs(P.sum(axis=1) - 1.0).max()
        if row_err > _ROW_SUM_TOL:
            raise ValidationError(f"rows of P do not sum to 1 (max error {row_err:.3e})")
        edge_set = set(graph.edges)
        for i in range(n):
            for j in range(n):
                if i != j and P[i, j] > 0.0:
                    if (min(i, j), max(i, j)) not in edge_set:
                        raise ValidationError(
                            f"P[{i}][{j}] > 0 but {{{i},{j}}} is not an edge")
        _check_irreducible(P)

        self.P = P
        self.P.setflags(write=False)
        self.graph = graph
        self.pi = _stationary_distribution(P)
        self.pi.setflags(write=False)
        off = P[~np.eye(n, dtype=bool)]
        pos = off[off > 0.0]
        self.p_min = float(pos.min())
        self.p_max = float(pos.max())
        self.gamma = _slem(P)
        self._b_cache: dict[int, float] = {}
        self._lock = threading.Lock()

    @property
    def num_states(self) -> int:
        return self.P.shape[0]

    @property
    def b(self) -> float:
        """Mixing prefactor for the default calibration horizon."""
        return mixing_constants(self, K_CHECK_DEFAULT)[1]

    def __repr__(self):  # pragma: no cover - debugging aid
        return (f"MarkovChain(n={self.num_states}, gamma={self.gamma}, "
                f"p_min={self.p_min}, p_max={self.p_max})")


@dataclass(frozen=True)
class ChainPath:
    """A simulated state sequence, reproducible from its seed."""

    seed: int
    states: np.ndarray
    initial_state: int

    def __len__(self):
        return len(self.states)


def _reaches_all(adj, start):
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen.all()


def _check_irreducible(P):
    """Strong connectivity of the positive-entry digraph."""
    adj = P > 0.0
    if not (_reaches_all(adj, 0) and _reaches_all(adj.T, 0)):
        raise ValidationError("chain is reducible on its support graph")


def _stationary_distribution(P):
    w, v = np.linalg.eig(P.T)
    idx = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[idx] - 1.0) > 1e-8:
        raise NumericalError("no eigenvalue close to 1; chain is not stochastic?")
    pi = np.real(v[:, idx])
    pi = np.abs(pi)
    pi = pi / pi.sum()
    err = np.abs(pi @ P - pi).max()
    if err > _STATIONARY_TOL:
        raise NumericalError(f"stationary distribution residual {err:.3e}")
    return pi


def _slem(P):
    """Second-largest eigenvalue modulus, or None for a periodic chain."""
    w = np.linalg.eigvals(P)
    mods = np.abs(w)
    # drop exactly one Perron eigenvalue (the one closest to +1)
    perron = int(np.argmin(np.abs(w - 1.0)))
    mods = np.delete(mods, perron)
    if mods.size == 0:
        return _GAMMA_FLOOR
    second = float(mods.max())
    if second >= 1.0 - _PERIODIC_TOL:
        return None
    return max(second, _GAMMA_FLOOR)


def metropolis_hastings(g: Graph, target_pi="uniform") -> MarkovChain:
    """Metropolis-Hastings chain on ``g`` with a prescribed stationary law.

    Off-diagonal rule for neighbors j of i (d = degree):
    ``P[i][j] = (1/d_i) * min(1, (pi_j d_i) / (pi_i d_j))``; the diagonal
    absorbs the residual mass.  Emits :class:`AperiodicityWarning` when the
    resulting chain is periodic (e.g. a single edge with uniform target).
    """
    n = g.num_nodes
    if isinstance(target_pi, str):
        if target_pi != "uniform":
            raise InvalidDistribution(f"unknown target {target_pi!r}")
        target = np.full(n, 1.0 / n)
    else:
        target = np.asarray(target_pi, dtype=np.float64)
        if target.shape != (n,):
            raise InvalidDistribution(f"target has shape {target.shape}, expected ({n},)")
        if np.any(target <= 0.0):
            raise InvalidDistribution("target entries must be strictly positive")
        if abs(target.sum() - 1.0) > 1e-8:
            raise InvalidDistribution(f"target sums to {target.sum()!r}, not 1")

    P = np.zeros((n, n))
    for i in range(n):
        d_i = g.degree(i)
        for j in g.neighbors[i]:
            d_j = g.degree(j)
            P[i, j] = min(1.0, (target[j] * d_i) / (target[i] * d_j)) / d_i
        residual = 1.0 - P[i].sum()
        # off-diagonal mass can overshoot/undershoot 1 by a few ulps
        P[i, i] = residual if abs(residual) > 1e-15 else 0.0
        if P[i, i] < 0.0:
            P[i, i] = 0.0
    mc = MarkovChain(P, g)
    if mc.gamma is None:
        warnings.warn(
            "Metropolis-Hastings chain is periodic; mixing-rate computations "
            "will fail on it", AperiodicityWarning, stacklevel=2)
    return mc


def random_walk_chain(N: int, alpha: float) -> MarkovChain:
    """Lazy random walk on the path graph with step probability ``alpha``.

    Interior rows move to each neighbor with probability ``alpha`` and stay
    put with ``1 - 2 alpha``.  The boundary rows are taken literally from
    the chained equalities P[0][0] = 1 - alpha, P[0][1] = alpha and
    P[N-1][N-1] = alpha, P[N-1][N-2] = 1 - alpha.  The resulting stationary
    distribution is computed numerically and may differ from the geometric
    closed form (see :func:`closed_form_stationary`); the two are reported
    side by side, never silently reconciled.
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 2:
        raise ValidationError("N must be an integer >= 2")
    if not (0.0 < alpha < 0.5):
        raise InvalidAlpha(f"alpha={alpha!r} outside (0, 1/2)")
    N = int(N)
    P = np.zeros((N, N))
    P[0, 0] = 1.0 - alpha
    P[0, 1] = alpha
    for i in range(1, N - 1):
        P[i, i - 1] = alpha
        P[i, i + 1] = alpha
        P[i, i] = 1.0 - 2.0 * alpha
    P[N - 1, N - 2] = 1.0 - alpha
    P[N - 1, N - 1] = alpha
    return MarkovChain(P, path_graph(N))


def closed_form_stationary(N: int, alpha: float) -> np.ndarray:
    """Geometric stationary profile ``pi_i ~ beta^i`` with beta = 1/(1-alpha).

    Returned normalized; provided for comparison against the numerically
    computed stationary distribution of :func:`random_walk_chain`, and as a
    prescribable Metropolis-Hastings target.  Well defined for any alpha in
    (0, 1), wider than the walk construction itself supports.
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    if N == 1:
        return np.array([1.0])
    if not (0.0 < alpha < 1.0):
        raise InvalidAlpha(f"alpha={alpha!r} outside (0, 1)")
    beta = 1.0 / (1.0 - alpha)
    i = np.arange(1, N + 1, dtype=np.float64)
    v = beta ** i * (1.0 - beta) / (1.0 - beta ** N)
    return v / v.sum()


def stationary_comparison(mc: MarkovChain, alpha: float, tolerance: float = 0.03) -> dict:
    """Report the numeric stationary distribution next to the closed form.

    The two can genuinely disagree (the closed form assumes a geometric
    profile the literal transition matrix does not produce); any mismatch
    is flagged in the report, never reconciled.
    """
    n = mc.num_states
    formula = closed_form_stationary(n, alpha)
    numeric = mc.pi
    diff = float(np.abs(numeric - formula).max())
    report = {
        "alpha": float(alpha),
        "pi_numeric": [float(v) for v in numeric],
        "pi_closed_form": [float(v) for v in formula],
        "pi_min_numeric": float(numeric.min()),
        "pi_max_numeric": float(numeric.max()),
        "pi_min_closed_form": float(formula.min()),
        "pi_max_closed_form": float(formula.max()),
        "max_abs_difference": diff,
        "tolerance": float(tolerance),
        "agree_within_tolerance": bool(diff <= tolerance),
    }
    if diff > tolerance:
        report["note"] = (
            "numeric stationary distribution of the literal transition matrix "
            "does not match the geometric closed form; both are reported")
    return report


def mixing_constants(mc: MarkovChain, K_check: int = K_CHECK_DEFAULT):
    """Geometric mixing pair (gamma, b) with |P^k_ij - pi_j| <= b gamma^k.

    gamma is the second-largest eigenvalue modulus.  b is calibrated
    empirically: the maximum of deviation/gamma^k over 1 <= k <= K_check,
    so the bound holds on that horizon by construction.  The scan stops
    early once the deviation falls below 1e-13, where floating-point noise
    would otherwise be divided by a vanishing gamma^k.

    Raises
    ------
    PeriodicChainError
        When gamma is within 1e-10 of one.
    """
    if mc.gamma is None:
        raise PeriodicChainError("chain is periodic: |lambda_2| = 1")
    gamma = mc.gamma
    with mc._lock:
        if K_check in mc._b_cache:
            return gamma, mc._b_cache[K_check]
    P, pi = mc.P, mc.pi
    Pk = np.eye(mc.num_states)
    b = _B_FLOOR
    gk = 1.0
    for _ in range(1, K_check + 1):
        Pk = Pk @ P
        gk *= gamma
        dev = float(np.abs(Pk - pi[None, :]).max())
        if dev < _DEVIATION_FLOOR:
            break
        b = max(b, dev / gk)
    with mc._lock:
        mc._b_cache[K_check] = b
    return gamma, b


def simulate(mc: MarkovChain, i0: int, steps: int, seed: int) -> ChainPath:
    """Simulate ``steps`` transitions starting from ``i0``.

    Pure function of its arguments: the transition at each step is drawn by
    inverse-CDF over the current row of P with cumulative mass accumulated
    in ascending node-id order, consuming one uniform from a PCG64 stream
    seeded with ``seed``.
    """
    n = mc.num_states
    if not 0 <= i0 < n:
        raise ValidationError(f"i0={i0} outside [0, {n})")
    if steps < 0:
        raise ValidationError("steps must be nonnegative")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(mc.P, axis=1)
    # fallback target when cumulative rounding leaves cum[-1] < u: the
    # largest node id with positive probability in the row
    last_pos = np.array([int(np.nonzero(row > 0.0)[0][-1]) for row in mc.P])
    states = np.empty(steps + 1, dtype=np.int64)
    states[0] = i0
    if steps:
        u = rng.random(steps)
        cur = i0
        for k in range(steps):
            nxt = int(np.searchsorted(cum[cur], u[k], side="right"))
            cur = int(last_pos[cur]) if nxt >= n else nxt
            states[k + 1] = cur
    states.setflags(write=False)
    return ChainPath(seed=int(seed), states=states, initial_state=int(i0))
