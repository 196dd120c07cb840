"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line that pytest prints in the
"acceptance criteria" summary section.
"""

import dataclasses
import filecmp
import time

import numpy as np

from oracles import central_difference, random_connected_adjacency, random_spd, stable_step_boundary
from test_costs import cost_families
from tvtrack import consensus
from tvtrack.consensus import ConsensusState, ReferenceSet
from tvtrack.costs import Problem, QuadraticSinusoidalCost, derivatives
from tvtrack.dynamics import central_baseline
from tvtrack.experiments import run_scenario, run_sweep
from tvtrack.graph import Graph, decompose
from tvtrack.stability import build_abar, delta_bar


def benchmark_problem():
    return Problem(Graph.ring(5), [QuadraticSinusoidalCost(i, i, 0.05) for i in range(1, 6)])


def test_1_kbar_trend(benchmark_scenario, acceptance):
    e_bars, times = [], []
    for k in (1, 2, 5, 10):
        start = time.perf_counter()
        res = run_scenario(benchmark_scenario.with_param("k_bar", k))
        times.append(time.perf_counter() - start)
        e_bars.append(res.metrics.e_bar)
    decreasing = all(a > b for a, b in zip(e_bars, e_bars[1:]))
    fast = max(times) < 10
    detail = "e_bar " + ", ".join(f"k={k}:{e:.5f}" for k, e in zip((1, 2, 5, 10), e_bars))
    detail += f"; slowest run {max(times):.2f}s"
    acceptance("1 k_bar sweep e_bar strictly decreasing, runs < 10 s", decreasing and fast, detail)
    assert decreasing, detail
    assert fast, detail


def test_2_central_baseline(acceptance):
    cb = central_baseline(benchmark_problem(), [1.0], 0.01, 50.0)
    closed = np.array([-sum(np.sin(0.05 * i * t) for i in range(1, 6)) / 30 for t in cb.t])
    np.testing.assert_allclose(cb.x_star[:, 0], closed, atol=1e-15)
    late = cb.t > 10
    worst = float(np.abs(cb.x[late, 0] - closed[late]).max())
    ok = worst <= 1e-3
    acceptance("2 central baseline error <= 1e-3 for t > 10", ok, f"max error {worst:.3e}")
    assert ok


def test_3_static_weighted_average(rng, acceptance):
    worst_err, worst_steps = 0.0, 0
    instances = []
    refs = ReferenceSet(hessians=[2.0, 4.0, 6.0], gh=[1.0, 2.0, 3.0])
    instances.append((Graph.path(3), refs))
    for _ in range(10):
        n_agents, n = int(rng.integers(2, 8)), int(rng.integers(1, 3))
        g = Graph(random_connected_adjacency(rng, n_agents))
        h = np.stack([random_spd(rng, n) for _ in range(n_agents)])
        instances.append((g, ReferenceSet(hessians=h, gh=rng.normal(size=(n_agents, n)))))
    exact = consensus.weighted_average(instances[0][1])
    for g, refs in instances:
        dc = 0.9 * delta_bar(build_abar(g.decomposition, refs.hessians, refs.dimension))
        h_sum = refs.hessians.sum(axis=0)
        pbar = np.linalg.solve(h_sum, refs.gh.sum(axis=0))
        s = ConsensusState.initial(refs)
        for k in range(1, 5001):
            s = consensus.step(s, refs, g, dc)
            err = np.linalg.norm(s.p - pbar)
            if err <= 1e-8:
                break
        worst_err, worst_steps = max(worst_err, err), max(worst_steps, k)
    ok = worst_err <= 1e-8 and float(exact[0]) == 0.5
    detail = f"worst error {worst_err:.2e} within {worst_steps} steps; instance p_bar = {float(exact[0])!r}"
    acceptance("3 static weighted average <= 1e-8 within 5000 steps at 0.9*delta_bar", ok, detail)
    assert ok, detail


def test_4_schur_property(rng, acceptance):
    worst_rho, worst_gap = 0.0, 0.0
    for _ in range(10):
        n_agents, n = int(rng.integers(2, 8)), int(rng.integers(1, 3))
        g = Graph(random_connected_adjacency(rng, n_agents))
        h = np.stack([random_spd(rng, n) for _ in range(n_agents)])
        ts = build_abar(g.decomposition, h, n)
        a, dbar = ts.a_bar, delta_bar(ts)
        eye = np.eye(a.shape[0])
        for frac in rng.uniform(0.001, 0.999, size=20):
            worst_rho = max(worst_rho, max(abs(np.linalg.eigvals(eye + frac * dbar * a))))
        worst_gap = max(worst_gap, abs(stable_step_boundary(a) - dbar) / dbar)
    ok = worst_rho < 1 and worst_gap <= 0.05
    detail = f"max spectral radius {worst_rho:.6f}; max bisection gap {100 * worst_gap:.2e}%"
    acceptance("4 Schur for delta_c in (0, delta_bar); bisection within 5%", ok, detail)
    assert ok, detail


def test_5_q1_conservation(rng, acceptance):
    worst = 0.0
    for _ in range(5):
        n_agents, n = int(rng.integers(2, 8)), int(rng.integers(1, 3))
        g = Graph(random_connected_adjacency(rng, n_agents))
        h = np.stack([random_spd(rng, n) for _ in range(n_agents)])
        refs = ReferenceSet(hessians=h, gh=rng.normal(size=(n_agents, n)))
        dc = 0.5 * delta_bar(build_abar(g.decomposition, h, n))
        s = ConsensusState.initial(refs, rng.normal(size=(n_agents, n)), rng.normal(size=(n_agents, n)))
        q0 = consensus.diagnostics(s, refs, g.decomposition).q1
        for _ in range(1000):
            s = consensus.step(s, refs, g, dc)
        q1 = consensus.diagnostics(s, refs, g.decomposition).q1
        worst = max(worst, float(np.abs(q1 - q0).max()))
    ok = worst <= 1e-10
    acceptance("5 q1 drift <= 1e-10 over 1000 steps", ok, f"max drift {worst:.2e}")
    assert ok


def test_6_bound_suites(benchmark_scenario, acceptance):
    lines, ok = [], True
    for k in (1, 2, 5, 10):
        res = run_scenario(benchmark_scenario.with_param("k_bar", k))
        chk = res.check
        ok &= chk.passed and res.region_ok
        lines.append(
            f"k={k}: consensus {chk.max_consensus_err:.3g}/{chk.consensus_bound:.3g} "
            f"(margin {chk.consensus_margin:.2e}), gradient {chk.max_grad_norm:.3g}/{chk.gradient_bound:.3g} "
            f"(margin {chk.gradient_margin:.2e}), region_ok={res.region_ok}"
        )
    detail = "; ".join(lines)
    acceptance("6 consensus and gradient bounds hold along the sweep", ok, detail)
    assert ok, detail


def test_7_derivatives(rng, acceptance):
    worst = {}
    for name, cost in cost_families(rng):
        w = 0.0
        for _ in range(100):
            x = rng.uniform(-2, 2, size=cost.dimension)
            t = float(rng.uniform(0, 50))
            g, hess, gt = derivatives(cost, x, t)
            fd_g = central_difference(lambda y: cost.value(y, t), x).ravel()
            fd_h = central_difference(lambda y: cost.grad(y, t), x)
            fd_gt = (cost.grad(x, t + 1e-6) - cost.grad(x, t - 1e-6)) / 2e-6
            for an, fd in ((g, fd_g), (hess, fd_h), (gt, fd_gt)):
                w = max(w, np.linalg.norm(an - fd) / max(np.linalg.norm(an), 1.0))
        worst[name] = w
    ok = max(worst.values()) <= 1e-6
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in worst.items())
    acceptance("7 derivatives match central differences (rel <= 1e-6)", ok, detail)
    assert ok, detail


def test_8_structural_linear_algebra(rng, acceptance):
    orth = block = spectrum_gap = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 16))
        d = decompose(Graph(random_connected_adjacency(rng, n)))
        t = d.t_mat
        orth = max(orth, np.linalg.norm(t.T @ t - np.eye(n)))
        tlt = t.T @ d.laplacian @ t
        block = max(block, np.abs(tlt[0]).max(), np.abs(tlt[:, 0]).max())
        spectrum_gap = max(spectrum_gap, np.abs(np.linalg.eigvalsh(d.l_plus) - d.lam[1:]).max())
    ok = orth <= 1e-12 and block <= 1e-12 and spectrum_gap <= 1e-9
    detail = f"||T'T - I|| {orth:.1e}; T'LT first row/col {block:.1e}; L+ spectrum {spectrum_gap:.1e}"
    acceptance("8 structural linear algebra on 50 graphs", ok, detail)
    assert ok, detail


def test_9_static_end_to_end(static_scenario, acceptance):
    res = run_scenario(static_scenario)
    e_t, dis_t = float(res.metrics.e[-1]), float(res.metrics.disagreement[-1])
    ok = e_t <= 1e-4 and dis_t <= 1e-4 and res.series.t[-1] == 50.0
    acceptance("9 static quadratic e(T), disagreement(T) <= 1e-4 at T=50", ok,
               f"e(T) {e_t:.2e}, disagreement(T) {dis_t:.2e}")
    assert ok


def test_10_determinism(benchmark_scenario, static_scenario, tmp_path, acceptance):
    mismatched = []
    cases = [benchmark_scenario, static_scenario, dataclasses.replace(benchmark_scenario, k_bar=1)]
    for i, s in enumerate(cases):
        a = run_scenario(s, tmp_path / f"{i}a")
        b = run_scenario(s, tmp_path / f"{i}b")
        for key in a.files:
            if not filecmp.cmp(a.files[key], b.files[key], shallow=False):
                mismatched.append(f"{s.name}/{key}")
    run_sweep(benchmark_scenario, "k_bar", [1, 10], tmp_path / "sa")
    run_sweep(benchmark_scenario, "k_bar", [1, 10], tmp_path / "sb", jobs=2)
    for f in sorted((tmp_path / "sa").rglob("*")):
        if f.is_file():
            twin = tmp_path / "sb" / f.relative_to(tmp_path / "sa")
            if not filecmp.cmp(f, twin, shallow=False):
                mismatched.append(f"sweep/{f.relative_to(tmp_path / 'sa')}")
    ok = not mismatched
    acceptance("10 reruns produce bitwise identical files", ok,
               "all files identical" if ok else "differ: " + ", ".join(mismatched))
    assert ok
