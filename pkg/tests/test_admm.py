import numpy as np
import pytest

import markov_admm as ma
from markov_admm.errors import InvalidDual, InvalidTransition, ValidationError
from markov_admm.graph import arc_arrays

from conftest import (
    make_logistic_instance,
    make_quadratic_instance,
    random_connected_graph,
    random_feasible_state,
)


class TestInitState:
    def test_zeros_everywhere(self, two_node_instance):
        _, p = two_node_instance
        s = ma.init_state(p)
        assert s.k == 0
        assert not s.x.any() and not s.beta.any() and not s.z.any()

    def test_z_is_endpoint_average(self, estimation_instance):
        g, p = estimation_instance
        rng = np.random.default_rng(0)
        x0 = rng.standard_normal((10, 10))
        s = ma.init_state(p, x0=x0)
        for q, (i, j) in enumerate(g.arcs):
            assert s.z[q] == pytest.approx(0.5 * (x0[i] + x0[j]))

    def test_symmetric_dual_rejected(self, two_node_instance):
        _, p = two_node_instance
        beta0 = np.array([[1.0], [1.0]])  # both directions +1
        with pytest.raises(InvalidDual):
            ma.init_state(p, beta0=beta0)

    def test_potential_difference_dual_accepted(self):
        g = ma.complete_graph(4)
        p = make_quadratic_instance(g, seed=1, dim=2)
        rng = np.random.default_rng(2)
        y = rng.standard_normal((4, 2))
        beta0 = ma.incidence(g).I_minus.T @ y
        s = ma.init_state(p, beta0=beta0)
        assert s.beta == pytest.approx(beta0)

    def test_out_of_range_dual_rejected(self):
        # antisymmetric but with a cycle component, which no potential produces
        g = ma.complete_graph(3)
        p = make_quadratic_instance(g, seed=1, dim=1)
        beta0 = np.zeros((6, 1))
        for q, (i, j) in enumerate(g.arcs):
            # circulation around the triangle 0 -> 1 -> 2 -> 0
            beta0[q, 0] = 1.0 if (j - i) % 3 == 1 else -1.0
        with pytest.raises(InvalidDual):
            ma.init_state(p, beta0=beta0)


class TestSyncStep:
    def test_two_node_hand_values(self, two_node_instance):
        _, p = two_node_instance
        s1 = ma.sync_step(p, 1.0, ma.init_state(p))
        assert s1.x.ravel() == pytest.approx([0.0, 1.0])
        assert s1.beta.ravel() == pytest.approx([-0.5, 0.5])
        assert s1.z.ravel() == pytest.approx([0.5, 0.5])

    def test_fixed_point_at_optimum(self, estimation_instance):
        _, p = estimation_instance
        cert = ma.kkt_certificate(p)
        x0 = np.tile(cert.x_star, (10, 1))
        s = ma.init_state(p, x0=x0, beta0=cert.beta_star)
        s1 = ma.sync_step(p, 1.0, s)
        assert np.abs(s1.x - s.x).max() <= 1e-8
        assert np.abs(s1.beta - s.beta).max() <= 1e-8
        assert np.abs(s1.z - s.z).max() <= 1e-8

    def test_estimation_converges(self, estimation_instance):
        _, p = estimation_instance
        cert = ma.kkt_certificate(p)
        s = ma.init_state(p)
        for _ in range(2000):
            s = ma.sync_step(p, 1.0, s)
        assert np.linalg.norm(s.x - cert.x_star[None, :], axis=1).max() <= 1e-6

    def test_z_consistency_invariant(self, estimation_instance):
        g, p = estimation_instance
        inc = ma.incidence(g)
        s = ma.init_state(p, x0=np.random.default_rng(1).standard_normal((10, 10)))
        for _ in range(5):
            s = ma.sync_step(p, 1.0, s)
            assert np.abs(s.z - 0.5 * inc.I_plus.T @ s.x).max() <= 1e-10

    def test_stationarity_residual(self, estimation_instance):
        # the committed update satisfies
        #   grad f(x+) + I_minus beta+ + rho I_plus (z+ - z) = 0
        # (with the post-update dual; the pre-update form does not close)
        g, p = estimation_instance
        inc = ma.incidence(g)
        rng = np.random.default_rng(3)
        s = ma.init_state(p, x0=rng.standard_normal((10, 10)))
        for _ in range(3):
            s_next = ma.sync_step(p, 1.0, s)
            grads = np.array([p.objectives[i].grad(s_next.x[i]) for i in range(10)])
            res = grads + inc.I_minus @ s_next.beta + 1.0 * inc.I_plus @ (s_next.z - s.z)
            assert np.linalg.norm(res) <= 1e-6
            s = s_next


class TestAsyncStep:
    def test_two_node_hand_values(self, two_node_instance):
        _, p = two_node_instance
        s = ma.init_state(p)
        s1 = ma.async_step(p, 1.0, s, 0, 1)
        assert s1.x.ravel() == pytest.approx([0.0, 1.0])
        assert s1.beta.ravel() == pytest.approx([-0.5, 0.5])  # arcs (0,1), (1,0)
        assert s1.z.ravel() == pytest.approx([0.5, 0.5])
        assert s1.last_mc_state == 1

    def test_self_transition_freezes_duals(self, estimation_instance):
        _, p = estimation_instance
        rng = np.random.default_rng(4)
        s = random_feasible_state(p, rng)
        s1 = ma.async_step(p, 1.0, s, 5, 5)
        assert (s1.x[5] != s.x[5]).any()
        assert (s1.beta == s.beta).all()
        assert (s1.z == s.z).all()

    def test_single_node_single_arc_touch(self, estimation_instance):
        g, p = estimation_instance
        rng = np.random.default_rng(5)
        s = random_feasible_state(p, rng)
        s1 = ma.async_step(p, 1.0, s, 3, 4)
        changed_rows = [i for i in range(10) if (s1.x[i] != s.x[i]).any()]
        assert changed_rows == [4]
        q = g.arc_index[(4, 3)]
        touched = {q, g.mirror_arc(q)}
        for a in range(g.num_arcs):
            if a not in touched:
                assert (s1.beta[a] == s.beta[a]).all()
                assert (s1.z[a] == s.z[a]).all()

    def test_fixed_point_at_optimum(self, estimation_instance):
        _, p = estimation_instance
        cert = ma.kkt_certificate(p)
        s = ma.init_state(p, x0=np.tile(cert.x_star, (10, 1)), beta0=cert.beta_star)
        for (j, i) in [(0, 1), (5, 5), (8, 9)]:
            s1 = ma.async_step(p, 1.0, s, j, i)
            assert np.abs(s1.x - s.x).max() <= 1e-8
            assert np.abs(s1.beta - s.beta).max() <= 1e-8

    def test_non_edge_transition_rejected(self, estimation_instance):
        _, p = estimation_instance
        s = ma.init_state(p)
        with pytest.raises(InvalidTransition):
            ma.async_step(p, 1.0, s, 0, 5)

    def test_zero_probability_transition_rejected(self):
        # clockwise-only lazy walk on a 4-cycle: edge {0,1} exists but the
        # transition 1 -> 0 has zero probability
        g = ma.build_graph(4, [[0, 1], [1, 2], [2, 3], [0, 3]])
        p = make_quadratic_instance(g, seed=12, dim=1)
        order = {0: 1, 1: 2, 2: 3, 3: 0}
        P = np.zeros((4, 4))
        for i, j in order.items():
            P[i, j] = 0.9
            P[i, i] = 0.1
        mc = ma.MarkovChain(P, g)
        s = ma.init_state(p)
        with pytest.raises(InvalidTransition):
            ma.async_step(p, 1.0, s, 1, 0, chain=mc)
        # the supported direction is fine
        ma.async_step(p, 1.0, s, 0, 1, chain=mc)


class TestHypotheticalFullUpdate:
    def test_equals_sync_step_fields(self, estimation_instance):
        _, p = estimation_instance
        rng = np.random.default_rng(6)
        s = random_feasible_state(p, rng)
        x_hat, z_hat, beta_hat = ma.hypothetical_full_update(p, 1.0, s)
        s1 = ma.sync_step(p, 1.0, s)
        assert (x_hat == s1.x).all()
        assert (z_hat == s1.z).all()
        assert (beta_hat == s1.beta).all()

    def test_dual_increment_identity(self):
        # (rho/2) I_minus^T x_hat == beta_hat - beta, even for non-quadratics
        g = ma.path_graph(3)
        p = make_logistic_instance(g, seed=7)
        inc = ma.incidence(g)
        rng = np.random.default_rng(8)
        s = random_feasible_state(p, rng)
        rho = 0.7
        x_hat, z_hat, beta_hat = ma.hypothetical_full_update(p, rho, s)
        res = 0.5 * rho * inc.I_minus.T @ x_hat - (beta_hat - s.beta)
        assert np.linalg.norm(res) <= 1e-8
        assert np.abs(z_hat - 0.5 * inc.I_plus.T @ x_hat).max() <= 1e-12


class TestInvariants:
    @pytest.mark.parametrize("engine", ["sync", "async"])
    def test_antisymmetry_preserved(self, engine, estimation_instance):
        g, p = estimation_instance
        chain = ma.random_walk_chain(10, 0.1)
        rng = np.random.default_rng(9)
        s = random_feasible_state(p, rng)
        path = ma.simulate(chain, 0, 50, seed=1)
        for k in range(1, 51):
            if engine == "sync":
                s = ma.sync_step(p, 1.0, s)
            else:
                s = ma.async_step(p, 1.0, s, int(path.states[k - 1]),
                                  int(path.states[k]))
            for q in range(0, g.num_arcs, 2):
                assert np.abs(s.beta[q] + s.beta[q + 1]).max() <= 1e-12
                assert (s.z[q] == s.z[q + 1]).all()

    @pytest.mark.parametrize("engine", ["sync", "async"])
    def test_dual_stays_in_incidence_range(self, engine, estimation_instance):
        g, p = estimation_instance
        inc = ma.incidence(g)
        chain = ma.random_walk_chain(10, 0.1)
        rng = np.random.default_rng(10)
        s = random_feasible_state(p, rng)
        path = ma.simulate(chain, 0, 40, seed=2)
        for k in range(1, 41):
            if engine == "sync":
                s = ma.sync_step(p, 1.0, s)
            else:
                s = ma.async_step(p, 1.0, s, int(path.states[k - 1]),
                                  int(path.states[k]))
        y, *_ = np.linalg.lstsq(inc.I_minus.T, s.beta, rcond=None)
        assert np.linalg.norm(inc.I_minus.T @ y - s.beta) <= 1e-8


class TestRun:
    def test_zero_iterations(self, estimation_instance):
        _, p = estimation_instance
        rec = ma.run(p, 1.0, "sync", iterations=0)
        assert len(rec.metrics["k"]) == 1
        assert rec.metrics["g_err"][0] > 0

    def test_async_determinism(self, estimation_instance):
        _, p = estimation_instance
        chain = ma.random_walk_chain(10, 0.1)
        a = ma.run(p, 1.0, "async", chain=chain, iterations=200, seed=99)
        b = ma.run(p, 1.0, "async", chain=chain, iterations=200, seed=99)
        for key in ("g_err", "x_err", "obj_gap", "consensus_res"):
            assert (a.metrics[key] == b.metrics[key]).all()
        assert (a.chain_path.states == b.chain_path.states).all()
        assert (a.final_state.x == b.final_state.x).all()

    def test_sync_error_decreases(self, estimation_instance):
        _, p = estimation_instance
        rec = ma.run(p, 1.0, "sync", iterations=100)
        ge = rec.metrics["g_err"]
        assert (np.diff(ge[1:]) <= 1e-12 * ge[1]).all()

    def test_async_requires_chain(self, estimation_instance):
        _, p = estimation_instance
        with pytest.raises(ValidationError):
            ma.run(p, 1.0, "async", iterations=10)

    def test_metrics_row_view(self, estimation_instance):
        _, p = estimation_instance
        rec = ma.run(p, 1.0, "sync", iterations=5)
        rows = ma.metrics_rows(rec)
        assert len(rows) == 6
        assert rows[0].k == 0
        assert rows[3].g_err == rec.metrics["g_err"][3]
        assert rows[-1].consensus_res >= 0.0

    def test_work_per_iteration(self, estimation_instance):
        _, p = estimation_instance
        chain = ma.random_walk_chain(10, 0.1)
        assert ma.run(p, 1.0, "sync", iterations=1).work_per_iteration == 10
        assert ma.run(p, 1.0, "async", chain=chain,
                      iterations=1).work_per_iteration == 1

    def test_generic_engine_matches_kernel_on_quadratics(self, estimation_instance):
        # step-by-step reference against the fast trajectory path
        _, p = estimation_instance
        chain = ma.random_walk_chain(10, 0.1)
        cert = ma.kkt_certificate(p)
        rec = ma.run(p, 1.0, "async", chain=chain, iterations=60, seed=5,
                     certificate=cert)
        s = ma.init_state(p)
        path = rec.chain_path
        for k in range(1, 61):
            s = ma.async_step(p, 1.0, s, int(path.states[k - 1]),
                              int(path.states[k]))
        assert np.abs(s.x - rec.final_state.x).max() <= 1e-12
        assert np.abs(s.beta - rec.final_state.beta).max() <= 1e-12

    def test_logistic_instance_runs_generic_path(self):
        g = ma.path_graph(4)
        p = make_logistic_instance(g, seed=11)
        chain = ma.metropolis_hastings(g, "uniform")
        rec = ma.run(p, 1.0, "async", chain=chain, iterations=30, seed=3)
        assert rec.config["backend"] == "generic"
        assert len(rec.metrics["g_err"]) == 31
        rec2 = ma.run(p, 1.0, "sync", iterations=50)
        assert rec2.metrics["g_err"][-1] < rec2.metrics["g_err"][1]
