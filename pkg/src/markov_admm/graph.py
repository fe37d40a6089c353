"""Undirected graphs with a fixed arc ordering and their incidence matrices.

Every edge {i, j} contributes two directed arcs (i, j) and (j, i).  All
arc-indexed quantities elsewhere in the package (auxiliary variables, dual
variables, incidence columns) rely on the deterministic arc ordering fixed
here: edges are sorted lexicographically with i < j, and each edge's two
arcs are stored contiguously, (i, j) first.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DisconnectedError, NumericalError, ParseError, ValidationError

__all__ = [
    "Graph",
    "IncidenceMatrices",
    "build_graph",
    "load_graph",
    "incidence",
    "consensus_matrices",
    "path_graph",
    "complete_graph",
    "star_graph",
]

# Relative threshold separating the zero singular values of the oriented
# incidence matrix from the rest.
_NULLSPACE_RTOL = 1e-8


@dataclass(frozen=True)
class Graph:
    """Validated undirected connected graph with derived arc bookkeeping.

    Attributes
    ----------
    num_nodes : int
        Number of nodes N; node ids are 0-based.
    edges : tuple of (int, int)
        Sorted unordered edges, each stored with i < j.
    arcs : tuple of (int, int)
        All 2|E| directed arcs; arc 2e is edge e as (i, j), arc 2e+1 is
        its mirror (j, i).
    arc_index : dict
        Maps a directed pair to its position in ``arcs``.
    neighbors : tuple of tuple of int
        Sorted adjacency lists per node.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    arcs: tuple[tuple[int, int], ...] = field(repr=False)
    arc_index: dict = field(repr=False, hash=False, compare=False)
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def mirror_arc(self, q: int) -> int:
        """Index of the opposite-direction arc of arc ``q``."""
        return q ^ 1

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])


def _check_node_id(v, num_nodes):
    # bool is an int subclass; reject it along with floats per the schema.
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ValidationError(f"node id {v!r} is not an integer")
    if not 0 <= v < num_nodes:
        raise ValidationError(f"node id {v} outside [0, {num_nodes})")
    return int(v)


def build_graph(num_nodes, edges) -> Graph:
    """Validate an edge list and derive the arc bookkeeping.

    Raises
    ------
    ValidationError
        On self-loops, duplicate edges, or node ids outside range.
    DisconnectedError
        If the graph is not connected.
    """
    if isinstance(num_nodes, bool) or not isinstance(num_nodes, (int, np.integer)):
        raise ValidationError("num_nodes must be an integer")
    if num_nodes < 1:
        raise ValidationError("num_nodes must be positive")
    num_nodes = int(num_nodes)

    seen = set()
    norm_edges = []
    for e in edges:
        if len(e) != 2:
            raise ValidationError(f"edge {e!r} is not a pair")
        i = _check_node_id(e[0], num_nodes)
        j = _check_node_id(e[1], num_nodes)
        if i == j:
            raise ValidationError(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValidationError(f"duplicate edge {key}")
        seen.add(key)
        norm_edges.append(key)
    norm_edges.sort()

    adj = [[] for _ in range(num_nodes)]
    for i, j in norm_edges:
        adj[i].append(j)
        adj[j].append(i)

    # connectivity by breadth-first traversal
    visited = [False] * num_nodes
    queue = deque([0])
    visited[0] = True
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not visited[v]:
                visited[v] = True
                count += 1
                queue.append(v)
    if count != num_nodes:
        missing = [v for v in range(num_nodes) if not visited[v]]
        raise DisconnectedError(f"graph is disconnected; unreachable nodes {missing}")

    arcs = []
    for i, j in norm_edges:
        arcs.append((i, j))
        arcs.append((j, i))
    arc_index = {a: q for q, a in enumerate(arcs)}

    return Graph(
        num_nodes=num_nodes,
        edges=tuple(norm_edges),
        arcs=tuple(arcs),
        arc_index=arc_index,
        neighbors=tuple(tuple(sorted(a)) for a in adj),
    )


def load_graph(path) -> Graph:
    """Load a graph from a JSON file ``{"num_nodes": N, "edges": [[i, j], ...]}``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    for key in ("num_nodes", "edges"):
        if key not in data:
            raise ParseError(f"{path}: missing field {key!r}")
    if not isinstance(data["edges"], list):
        raise ParseError(f"{path}: 'edges' must be a list")
    return build_graph(data["num_nodes"], data["edges"])


@dataclass(frozen=True)
class IncidenceMatrices:
    """Arc incidence matrices and the singular values the analysis needs.

    ``A1``/``A2`` are 2|E| x N selector matrices: row q of ``A1`` marks the
    source of arc q, row q of ``A2`` its destination.  ``I_plus`` is the
    unoriented incidence matrix A1^T + A2^T and ``I_minus`` the oriented one
    A1^T - A2^T, both N x 2|E|.
    """

    A1: np.ndarray
    A2: np.ndarray
    I_plus: np.ndarray
    I_minus: np.ndarray
    sigma_max_plus: float
    sigma_min_minus: float


def _gram_singular_values(M):
    """Singular values of M via eigendecomposition of the smaller Gram matrix."""
    n, m = M.shape
    gram = M @ M.T if n <= m else M.T @ M
    try:
        ev = np.linalg.eigvalsh(gram)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return np.sqrt(np.clip(ev, 0.0, None))


def incidence(g: Graph) -> IncidenceMatrices:
    """Build A1, A2, I_plus, I_minus and their extreme singular values.

    ``sigma_min_minus`` is the smallest *nonzero* singular value of I_minus;
    the null direction (the all-ones vector for a connected graph) is
    separated by a relative threshold of 1e-8.
    """
    if g.num_arcs == 0:
        raise ValidationError("incidence matrices need at least one edge")
    na = g.num_arcs
    A1 = np.zeros((na, g.num_nodes))
    A2 = np.zeros((na, g.num_nodes))
    for q, (i, j) in enumerate(g.arcs):
        A1[q, i] = 1.0
        A2[q, j] = 1.0
    I_plus = A1.T + A2.T
    I_minus = A1.T - A2.T

    sv_plus = _gram_singular_values(I_plus)
    sv_minus = _gram_singular_values(I_minus)
    sigma_max_plus = float(sv_plus.max())
    cutoff = _NULLSPACE_RTOL * sv_minus.max()
    nonzero = sv_minus[sv_minus > cutoff]
    if nonzero.size == 0:
        raise NumericalError("oriented incidence matrix has no nonzero singular value")
    return IncidenceMatrices(
        A1=A1,
        A2=A2,
        I_plus=I_plus,
        I_minus=I_minus,
        sigma_max_plus=sigma_max_plus,
        sigma_min_minus=float(nonzero.min()),
    )


def consensus_matrices(g: Graph):
    """Stacked constraint matrices (A, B) with A x + B z = 0 iff consensus.

    A is the 4|E| x N stack [A1; A2]; B is the 4|E| x 2|E| stack [-I; -I].
    """
    inc = incidence(g)
    na = g.num_arcs
    A = np.vstack([inc.A1, inc.A2])
    eye = np.eye(na)
    B = np.vstack([-eye, -eye])
    return A, B


def path_graph(n: int) -> Graph:
    """Path on ``n`` nodes: edges (i, i+1)."""
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(n: int) -> Graph:
    """Star with center 0 and leaves 1..n-1."""
    return build_graph(n, [(0, i) for i in range(1, n)])


@lru_cache(maxsize=128)
def arc_arrays(g: Graph):
    """Flat integer arrays describing arcs and adjacency, for the engines.

    Returns
    -------
    dict with keys
        ``arc_src``, ``arc_dst`` : (2|E|,) arrays of arc endpoints;
        ``nbr_indptr`` : (N+1,) CSR-style offsets into the two arrays below;
        ``nbr_nodes`` : flat neighbor ids, sorted per node;
        ``nbr_arcs`` : for node i and neighbor p, the index of arc (i, p);
        ``degrees`` : (N,) node degrees.
    """
    arc_src = np.array([a[0] for a in g.arcs], dtype=np.int64)
    arc_dst = np.array([a[1] for a in g.arcs], dtype=np.int64)
    indptr = np.zeros(g.num_nodes + 1, dtype=np.int64)
    nodes = []
    arcs_of = []
    for i in range(g.num_nodes):
        for p in g.neighbors[i]:
            nodes.append(p)
            arcs_of.append(g.arc_index[(i, p)])
        indptr[i + 1] = len(nodes)
    return {
        "arc_src": arc_src,
        "arc_dst": arc_dst,
        "nbr_indptr": indptr,
        "nbr_nodes": np.array(nodes, dtype=np.int64),
        "nbr_arcs": np.array(arcs_of, dtype=np.int64),
        "degrees": np.diff(indptr).astype(np.int64),
    }
