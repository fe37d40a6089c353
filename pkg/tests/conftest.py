import numpy as np
import pytest

import markov_admm as ma


def make_quadratic_instance(g, seed=0, dim=1, spread=2.0):
    rng = np.random.default_rng(seed)
    targets = spread * rng.standard_normal((g.num_nodes, dim))
    return ma.ProblemInstance(g, tuple(ma.Quadratic(t) for t in targets))


def make_logistic_instance(g, seed=0, dim=2, samples=6, mu=0.5):
    rng = np.random.default_rng(seed)
    objs = []
    for _ in range(g.num_nodes):
        F = rng.standard_normal((samples, dim))
        y = rng.choice([-1.0, 1.0], size=samples)
        objs.append(ma.LogisticRidge(F, y, mu))
    return ma.ProblemInstance(g, tuple(objs))


def random_connected_graph(rng, n, extra_edge_prob=0.3):
    """Random spanning tree plus a sprinkle of extra edges."""
    edges = set()
    order = rng.permutation(n)
    for idx in range(1, n):
        a = int(order[idx])
        b = int(order[rng.integers(0, idx)])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return ma.build_graph(n, sorted(edges))


def random_feasible_state(p, rng, scale=3.0):
    """Random state whose dual lies in the oriented-incidence range."""
    inc = ma.incidence(p.graph)
    x = scale * rng.standard_normal((p.num_nodes, p.dim))
    y = scale * rng.standard_normal((p.num_nodes, p.dim))
    return ma.init_state(p, x0=x, beta0=inc.I_minus.T @ y)


@pytest.fixture(scope="session")
def estimation_instance():
    """Path graph on 10 nodes, d=10, noisy targets around zero."""
    g = ma.path_graph(10)
    rng = np.random.default_rng(42)
    targets = rng.standard_normal((10, 10))
    p = ma.ProblemInstance(g, tuple(ma.Quadratic(t) for t in targets))
    return g, p


@pytest.fixture(scope="session")
def two_node_instance():
    g = ma.build_graph(2, [[0, 1]])
    p = ma.ProblemInstance(
        g, (ma.Quadratic(np.array([0.0])), ma.Quadratic(np.array([2.0]))))
    return g, p
