import math

import numpy as np
import pytest

from plugins import LogCoshCost
from tvtrack import consensus
from tvtrack.consensus import ConsensusState, ReferenceSet
from tvtrack.costs import (
    Problem,
    QuadraticCost,
    QuadraticSinusoidalCost,
    numeric_optimum,
    optimal_trajectory,
)
from tvtrack.dynamics import (
    OrchestratorConfig,
    SimulationDiverged,
    TrackerState,
    central_baseline,
    integrate_interval,
    interval_map_radius,
    orchestrate,
    rhs,
)
from tvtrack.graph import Graph

K2 = Graph.complete(2)


def benchmark_problem():
    return Problem(Graph.ring(5), [QuadraticSinusoidalCost(i, i, 0.05) for i in range(1, 6)])


def static_problem():
    costs = [QuadraticCost([[h]], offset=[c]) for h, c in [(2, 1), (4, -2), (6, 0.5), (8, 3), (10, -1)]]
    return Problem(Graph.ring(5), costs)


BENCH_DC = 0.5 * 0.17044208813839


class TestRhs:
    def test_consensus_equilibrium(self):
        np.testing.assert_array_equal(rhs(np.full((4, 2), 3.0), np.zeros((4, 2)), Graph.ring(4)), 0)

    def test_constant_estimate(self):
        np.testing.assert_array_equal(rhs([[0.0], [0.0]], [[1.0], [1.0]], K2), [[-1], [-1]])

    def test_laplacian_term(self):
        np.testing.assert_array_equal(rhs([[1.0], [-1.0]], [[0.0], [0.0]], K2), [[-2], [2]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rhs(np.zeros((2, 1)), np.zeros((2, 2)), K2)


class TestIntegrateInterval:
    def test_single_agent_constant(self):
        g = Graph([[0.0]])
        out, _ = integrate_interval(TrackerState(np.array([[0.7]]), np.zeros((1, 1)), 0.0, 0), g, 0.1)
        np.testing.assert_array_equal(out.x, [[0.7]])

    def test_linear_drift_exact(self):
        g = Graph([[0.0]])
        x0 = np.array([[0.25, -1.0]])
        c = np.array([[0.5, 2.0]])
        out, samples = integrate_interval(TrackerState(x0, c, 0.0, 0), g, 0.1, 10)
        np.testing.assert_allclose(out.x, x0 - 0.1 * c, rtol=1e-15, atol=1e-15)
        assert samples.shape == (10, 1, 2)
        assert out.s == 1 and out.t == pytest.approx(0.1)

    def test_k2_matrix_exponential(self):
        out, _ = integrate_interval(TrackerState(np.array([[1.0], [-1.0]]), np.zeros((2, 1)), 0.0, 0), K2, 0.1, 10)
        np.testing.assert_allclose(out.x, math.exp(-0.2) * np.array([[1.0], [-1.0]]), atol=1e-8)

    def test_fourth_order(self):
        x0 = np.array([[1.0], [-1.0]])
        exact = math.exp(-2 * 1.0) * x0
        errs = []
        for sub in (5, 10, 20):
            out, _ = integrate_interval(TrackerState(x0, np.zeros((2, 1)), 0.0, 0), K2, 1.0, sub)
            errs.append(np.abs(out.x - exact).max())
        for coarse, fine in zip(errs, errs[1:]):
            assert 12 < coarse / fine < 20

    def test_non_finite_aborts(self):
        ts = TrackerState(np.array([[1.0], [0.0]]), np.array([[np.inf], [0.0]]), 0.0, 3)
        with np.errstate(invalid="ignore"), pytest.raises(SimulationDiverged, match="s=3"):
            integrate_interval(ts, K2, 0.1)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(delta_t=-0.1),
            dict(k_bar=0),
            dict(k_bar=1.5),
            dict(delta_c=0.0),
            dict(horizon=0.0),
            dict(horizon=1.05),
            dict(substeps=0),
        ],
    )
    def test_invalid(self, kwargs):
        base = dict(delta_t=0.1, k_bar=2, delta_c=0.05, horizon=1.0, substeps=10)
        base.update(kwargs)
        with pytest.raises(ValueError):
            OrchestratorConfig(**base)

    def test_intervals(self):
        assert OrchestratorConfig(0.1, 2, 0.05, 50.0).n_intervals == 500


@pytest.fixture(scope="module")
def bench_series():
    cfg = OrchestratorConfig(delta_t=0.1, k_bar=3, delta_c=BENCH_DC, horizon=5.0, substeps=4)
    return cfg, orchestrate(benchmark_problem(), cfg, [-1, -0.5, 0, 0.5, 1])


class TestOrchestrate:
    def test_shapes(self, bench_series):
        cfg, ts = bench_series
        assert ts.x.shape == (50 * 4 + 1, 5, 1)
        assert ts.p.shape == (50 * 3 + 1, 5, 1)
        assert ts.pbar.shape == (151, 1)
        np.testing.assert_allclose(ts.t, np.linspace(0, 5, 201), atol=1e-12)
        assert math.isnan(ts.delta_bar_min)

    def test_psi_piecewise_constant(self, bench_series):
        cfg, ts = bench_series
        for s in range(cfg.n_intervals):
            block = ts.psi[s * cfg.substeps:(s + 1) * cfg.substeps]
            for row in block[1:]:
                np.testing.assert_array_equal(row, block[0])

    def test_replay(self, bench_series):
        """Re-execute the interval protocol by hand and compare bitwise."""
        cfg, ts = bench_series
        p = benchmark_problem()
        g = p.graph
        x = np.array([-1, -0.5, 0, 0.5, 1.0]).reshape(5, 1)
        cs = ConsensusState.initial(ReferenceSet.sample(p, x, 0.0))
        for s in range(cfg.n_intervals):
            t_s = s * cfg.delta_t
            psi = cs.p.copy()
            np.testing.assert_array_equal(ts.refresh_x[s], x)
            np.testing.assert_array_equal(ts.x[s * cfg.substeps], x)
            assert ts.refresh_t[s] == t_s
            refs = ReferenceSet.sample(p, x, t_s)
            cs = cs.rebase(refs)
            np.testing.assert_array_equal(ts.pbar[s * cfg.k_bar], consensus.weighted_average(refs))
            np.testing.assert_array_equal(ts.p[s * cfg.k_bar], cs.p)
            cs = consensus.run(cs, refs, g, cfg.delta_c, cfg.k_bar)
            np.testing.assert_array_equal(ts.psi[s * cfg.substeps], psi)
            x = integrate_interval(TrackerState(x, psi, t_s, s), g, cfg.delta_t, cfg.substeps)[0].x
        np.testing.assert_array_equal(ts.x[-1], x)
        np.testing.assert_array_equal(ts.p[-1], cs.p)

    def test_first_estimate_from_initial_refs(self, bench_series):
        _, ts = bench_series
        p = benchmark_problem()
        refs = ReferenceSet.sample(p, np.array([-1, -0.5, 0, 0.5, 1.0]).reshape(5, 1), 0.0)
        np.testing.assert_array_equal(ts.psi[0], refs.gh)

    def test_optimum_recorded(self, bench_series):
        _, ts = bench_series
        p = benchmark_problem()
        for i in (0, 57, 200):
            np.testing.assert_array_equal(ts.x_star[i], optimal_trajectory(p, ts.t[i]))

    def test_deterministic(self):
        cfg = OrchestratorConfig(delta_t=0.1, k_bar=2, delta_c=BENCH_DC, horizon=2.0)
        a = orchestrate(benchmark_problem(), cfg, [-1, -0.5, 0, 0.5, 1])
        b = orchestrate(benchmark_problem(), cfg, [-1, -0.5, 0, 0.5, 1])
        for name in ("x", "psi", "p", "pbar", "x_star"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_static_convergence(self):
        p = static_problem()
        cfg = OrchestratorConfig(delta_t=0.1, k_bar=10, delta_c=0.05, horizon=50.0)
        ts = orchestrate(p, cfg, np.linspace(-1, 1, 5))
        target = numeric_optimum(p, 0.0)
        assert np.abs(ts.x[-1] - target).max() <= 1e-4

    def test_single_agent_matches_central_to_first_order(self):
        p = Problem(Graph([[0.0]]), [QuadraticSinusoidalCost(2, 3, 0.2)])
        errs = []
        for dt in (0.1, 0.05, 0.025):
            cfg = OrchestratorConfig(delta_t=dt, k_bar=30, delta_c=0.2, horizon=10.0)
            ts = orchestrate(p, cfg, [1.0])
            cb = central_baseline(p, [1.0], dt / cfg.substeps, 10.0)
            errs.append(np.abs(ts.x[:, 0, 0] - cb.x[:, 0]).max())
        for dt, err in zip((0.1, 0.05, 0.025), errs):
            assert err <= 4 * dt
        for coarse, fine in zip(errs, errs[1:]):
            assert 1.8 < coarse / fine < 2.2

    def test_divergence_detected(self):
        cfg = OrchestratorConfig(delta_t=0.1, k_bar=10, delta_c=1.0, horizon=50.0)
        with pytest.raises(SimulationDiverged):
            orchestrate(benchmark_problem(), cfg, np.ones(5))

    def test_running_delta_bar_for_varying_hessians(self):
        costs = [LogCoshCost([[float(i)]], [1.0], 0.3) for i in (1, 2, 3)]
        p = Problem(Graph.path(3), costs)
        cfg = OrchestratorConfig(delta_t=0.1, k_bar=5, delta_c=0.05, horizon=1.0)
        ts = orchestrate(p, cfg, [0.5, -0.5, 1.0])
        assert 0 < ts.delta_bar_min < math.inf
        np.testing.assert_allclose(p.average_gradient(ts.x_star[-1], ts.t[-1]), 0, atol=1e-10)

    def test_initial_state_size_checked(self):
        cfg = OrchestratorConfig(delta_t=0.1, k_bar=1, delta_c=0.05, horizon=1.0)
        with pytest.raises(ValueError):
            orchestrate(benchmark_problem(), cfg, [0.0, 1.0])


class TestCentralBaseline:
    def test_invariant_manifold(self):
        p = benchmark_problem()
        cb = central_baseline(p, optimal_trajectory(p, 0.0), 0.01, 20.0)
        assert np.abs(cb.x - cb.x_star).max() <= 1e-8

    def test_tracks_from_one(self):
        cb = central_baseline(benchmark_problem(), [1.0], 0.01, 50.0)
        late = cb.t > 10
        assert np.abs(cb.x[late] - cb.x_star[late]).max() <= 1e-3

    def test_static_gradient(self):
        p = static_problem()
        cb = central_baseline(p, [2.0], 0.01, 30.0)
        assert np.linalg.norm(p.average_gradient(cb.x[-1], 30.0)) <= 1e-8

    def test_horizon_multiple(self):
        with pytest.raises(ValueError):
            central_baseline(benchmark_problem(), [1.0], 0.3, 1.0)


class TestIntervalMap:
    def test_benchmark_values(self):
        p = benchmark_problem()
        r10 = interval_map_radius(p, OrchestratorConfig(0.1, 10, BENCH_DC, 50.0))
        r1 = interval_map_radius(p, OrchestratorConfig(0.1, 1, BENCH_DC, 50.0))
        assert r10 == pytest.approx(0.9159, abs=1e-4)
        assert r1 == pytest.approx(0.9867, abs=1e-4)

    def test_predicts_divergence(self):
        p = benchmark_problem()
        cfg = OrchestratorConfig(0.1, 1, 0.9 * 0.17044208813839, 50.0)
        assert interval_map_radius(p, cfg) > 1
        ts = orchestrate(p, cfg, np.linspace(-1, 1, 5))
        assert np.abs(ts.x[-1]).max() > 1e6

    def test_rejects_non_quadratic(self):
        p = Problem(Graph.path(2), [LogCoshCost([[1.0]], [1], 0.4)] * 2)
        with pytest.raises(ValueError):
            interval_map_radius(p, OrchestratorConfig(0.1, 1, 0.05, 1.0))
