import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import markov_admm as ma
from markov_admm.errors import DisconnectedError, ParseError, ValidationError

from conftest import random_connected_graph


def write_graph(tmp_path, payload, name="g.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestLoadGraph:
    def test_smallest_connected_graph(self, tmp_path):
        g = ma.load_graph(write_graph(tmp_path, {"num_nodes": 2, "edges": [[0, 1]]}))
        assert g.arcs == ((0, 1), (1, 0))
        assert g.arc_index == {(0, 1): 0, (1, 0): 1}

    def test_path_graph_has_18_arcs(self, tmp_path):
        payload = {"num_nodes": 10, "edges": [[i, i + 1] for i in range(9)]}
        g = ma.load_graph(write_graph(tmp_path, payload))
        assert g.num_arcs == 18

    def test_isolated_node_rejected(self, tmp_path):
        with pytest.raises(DisconnectedError):
            ma.load_graph(write_graph(tmp_path, {"num_nodes": 3, "edges": [[0, 1]]}))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            ma.load_graph(str(path))

    def test_missing_field(self, tmp_path):
        with pytest.raises(ParseError):
            ma.load_graph(write_graph(tmp_path, {"edges": []}))

    @pytest.mark.parametrize("payload", [
        {"num_nodes": 2, "edges": [[0, 0]]},            # self-loop
        {"num_nodes": 2, "edges": [[0, 1], [1, 0]]},    # duplicate
        {"num_nodes": 2, "edges": [[0, 2]]},            # id out of range
        {"num_nodes": 2, "edges": [[0.0, 1]]},          # float id
        {"num_nodes": 2.0, "edges": [[0, 1]]},          # float N
    ])
    def test_validation_errors(self, tmp_path, payload):
        with pytest.raises(ValidationError):
            ma.load_graph(write_graph(tmp_path, payload))


class TestArcOrdering:
    def test_edges_sorted_and_arcs_paired(self):
        g = ma.build_graph(4, [[2, 3], [0, 1], [1, 2]])
        assert g.edges == ((0, 1), (1, 2), (2, 3))
        for e, (i, j) in enumerate(g.edges):
            assert g.arcs[2 * e] == (i, j)
            assert g.arcs[2 * e + 1] == (j, i)
            assert g.mirror_arc(2 * e) == 2 * e + 1

    def test_arc_index_bijective(self):
        rng = np.random.default_rng(5)
        g = random_connected_graph(rng, 7)
        assert sorted(g.arc_index.values()) == list(range(g.num_arcs))
        for (i, j) in g.arcs:
            assert ((i, j) in g.arc_index) == ((j, i) in g.arc_index)


class TestIncidence:
    def test_two_node_oracle(self, two_node_instance):
        # I_minus columns are +-(e0 - e1); the only nonzero singular value is 2
        g, _ = two_node_instance
        inc = ma.incidence(g)
        assert inc.I_minus.T.tolist() == [[1.0, -1.0], [-1.0, 1.0]]
        assert inc.sigma_min_minus == pytest.approx(2.0, abs=1e-10)
        assert inc.sigma_max_plus == pytest.approx(2.0, abs=1e-10)

    def test_k3_matches_brute_force_svd(self):
        g = ma.complete_graph(3)
        inc = ma.incidence(g)
        sv_plus = np.linalg.svd(inc.I_plus, compute_uv=False)
        assert inc.sigma_max_plus == pytest.approx(float(sv_plus.max()), rel=1e-10)
        sv_minus = np.linalg.svd(inc.I_minus, compute_uv=False)
        nonzero = sv_minus[sv_minus > 1e-8 * sv_minus.max()]
        assert inc.sigma_min_minus == pytest.approx(float(nonzero.min()), rel=1e-10)

    def test_ones_vector_in_null_space(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            g = random_connected_graph(rng, int(rng.integers(2, 9)))
            inc = ma.incidence(g)
            assert np.abs(inc.I_minus.T @ np.ones(g.num_nodes)).max() == 0.0

    def test_row_structure(self):
        g = ma.build_graph(3, [[0, 1], [1, 2]])
        inc = ma.incidence(g)
        for q, (i, j) in enumerate(g.arcs):
            row1 = np.zeros(3)
            row1[i] = 1.0
            row2 = np.zeros(3)
            row2[j] = 1.0
            assert (inc.A1[q] == row1).all()
            assert (inc.A2[q] == row2).all()

    def test_oriented_rank_is_n_minus_1(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            g = random_connected_graph(rng, int(rng.integers(2, 10)))
            inc = ma.incidence(g)
            assert np.linalg.matrix_rank(inc.I_minus) == g.num_nodes - 1

    def test_deterministic_construction(self):
        edges = [[4, 2], [0, 1], [1, 2], [3, 4], [2, 3]]
        a = ma.incidence(ma.build_graph(5, edges))
        b = ma.incidence(ma.build_graph(5, list(reversed(edges))))
        assert (a.A1 == b.A1).all() and (a.A2 == b.A2).all()


class TestConsensusMatrices:
    def test_consensus_point_satisfies_constraints(self, two_node_instance):
        g, _ = two_node_instance
        A, B = ma.consensus_matrices(g)
        x = np.array([5.0, 5.0])
        z = np.array([5.0, 5.0])
        assert np.abs(A @ x + B @ z).max() == 0.0

    def test_nonconsensus_residual_matches_direct_multiply(self, two_node_instance):
        g, _ = two_node_instance
        A, B = ma.consensus_matrices(g)
        res = A @ np.array([1.0, 0.0]) + B @ np.array([0.5, 0.5])
        assert res.tolist() == [0.5, -0.5, -0.5, 0.5]

    def test_zero_residual_iff_consensus_on_k3(self):
        g = ma.complete_graph(3)
        A, B = ma.consensus_matrices(g)
        inc = ma.incidence(g)
        grid = [0.0, 0.5, 1.0]
        for x0 in grid:
            for x1 in grid:
                for x2 in grid:
                    x = np.array([x0, x1, x2])
                    z = 0.5 * inc.I_plus.T @ x
                    res = np.abs(A @ x + B @ z).max()
                    if x0 == x1 == x2:
                        assert res == 0.0
                    else:
                        assert res > 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=10_000))
def test_graph_invariants_random(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n)
    assert g.num_arcs == 2 * g.num_edges
    assert len(g.arc_index) == g.num_arcs
    for i, j in g.edges:
        assert i < j
    for i in range(n):
        for p in g.neighbors[i]:
            assert (i, p) in g.arc_index
