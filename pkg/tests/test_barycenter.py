"""Tests for the decentralized barycenter simulator."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import softmax

from accopt.barycenter import (
    AgentMeasure,
    agent_stoch_grad,
    barycenter_run,
    consensus_residual,
    gaussian_measure,
    laplacian,
    pool_measure,
)
from accopt.errors import InvalidInputError


# ---------------------------------------------------------------------------
# oracles


def transport_cost_exact(pool, p, gamma):
    """Exact regularized transport cost of a finite pool against the
    two-point weights p, via the scalar dual.

    The conjugate is gamma E log sum_l exp((lambda_l - c_l(Y))/gamma)
    and the pairing is shift-invariant, so the dual maximization
    reduces to one scalar variable lambda = (s, 0).
    """

    def neg(s):
        lam = np.array([s, 0.0])
        lse = gamma * np.log(
            np.exp((lam[None, :] - pool) / gamma).sum(axis=1)).mean()
        return -(s * p[0] - lse)

    res = minimize_scalar(neg, bounds=(-50.0, 50.0), method="bounded",
                          options={"xatol": 1e-10})
    return -res.fun


def schedule_oracle(L, lam_max, eps, N):
    """Independent recomputation of the (alpha, C, batch) schedule."""
    rows, C = [], 0.0
    for _ in range(N):
        alpha = (1.0 + math.sqrt(1.0 + 8.0 * L * C)) / (4.0 * L)
        C += alpha
        rows.append((alpha, alpha / C,
                     max(1, math.ceil(lam_max * C / (L * alpha * eps)))))
    return rows


# ---------------------------------------------------------------------------
# network


def test_laplacian_two_path():
    g = laplacian([(0, 1)], 2)
    np.testing.assert_allclose(g.W_bar, [[1.0, -1.0], [-1.0, 1.0]])
    assert g.lambda_max == pytest.approx(2.0)


def test_laplacian_three_path():
    g = laplacian([(0, 1), (1, 2)], 3)
    np.testing.assert_allclose(
        g.W_bar, [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    assert np.all(np.linalg.eigvalsh(g.W_bar) >= -1e-12)
    np.testing.assert_allclose(g.W_bar.sum(axis=1), 0.0, atol=1e-14)


def test_laplacian_rejects_self_loops_and_bad_edges():
    with pytest.raises(InvalidInputError):
        laplacian([(0, 0)], 2)
    with pytest.raises(InvalidInputError):
        laplacian([(0, 5)], 2)


def test_graph_connectivity_and_neighbors():
    g = laplacian([(0, 1), (1, 2)], 3)
    assert g.is_connected()
    assert g.neighbors(1) == [0, 2]
    assert not laplacian([(0, 1)], 3).is_connected()


def test_consensus_residual_detects_disagreement():
    g = laplacian([(0, 1), (1, 2)], 3)
    p = np.tile([0.3, 0.7], (3, 1))
    assert consensus_residual(g, p) == 0.0
    p[2] = [0.4, 0.6]
    assert consensus_residual(g, p) == pytest.approx(2 * 0.1 ** 2)


# ---------------------------------------------------------------------------
# measures and stochastic gradients


def test_measure_validation():
    with pytest.raises(InvalidInputError):
        AgentMeasure(n=2, gamma=0.0, pool_costs=np.zeros((1, 2)))
    with pytest.raises(InvalidInputError):
        AgentMeasure(n=2, gamma=1.0)          # neither pool nor sampler
    with pytest.raises(InvalidInputError):
        pool_measure(-np.ones((2, 2)), 1.0)   # negative costs


def test_stoch_grad_uniform_for_constant_costs():
    meas = pool_measure(np.full((5, 4), 3.0), gamma=0.7)
    g = agent_stoch_grad(meas, np.zeros(4), 8, np.random.default_rng(0))
    np.testing.assert_allclose(g, 0.25 * np.ones(4), atol=1e-12)


def test_stoch_grad_concentrates_for_small_gamma():
    # logit gap 1 between the two coordinates
    meas = pool_measure(np.array([[0.0, 1.0]]), gamma=1e-3)
    g = agent_stoch_grad(meas, np.zeros(2), 1, np.random.default_rng(0))
    assert g[0] >= 0.99


def test_stoch_grad_simplex_feasible():
    rng = np.random.default_rng(1)
    meas = pool_measure(rng.uniform(0, 2, size=(6, 3)), gamma=0.4)
    for M in (1, 3):
        g = agent_stoch_grad(meas, rng.normal(size=3), M, rng)
        assert np.all(g >= 0) and g.sum() == pytest.approx(1.0)


def test_stoch_grad_variance_scales_inversely_with_batch():
    rng = np.random.default_rng(5)
    meas = pool_measure(rng.uniform(0, 1, size=(50, 3)), gamma=0.3)
    lam = np.array([0.2, -0.1, 0.0])
    reps = 3000
    var = {}
    for M in (1, 4, 16):
        draws = np.array([agent_stoch_grad(meas, lam, M, rng)
                          for _ in range(reps)])
        var[M] = draws.var(axis=0).sum()
    assert var[4] / var[1] == pytest.approx(0.25, rel=0.2)
    assert var[16] / var[1] == pytest.approx(1 / 16, rel=0.2)


def test_gaussian_measure_sampler_shape():
    meas = gaussian_measure(np.array([[0.0], [1.0]]), mean=np.array([0.5]),
                            std=0.2, gamma=0.5)
    costs = meas.sample_costs(np.random.default_rng(0), 7)
    assert costs.shape == (7, 2) and np.all(costs >= 0)
    with pytest.raises(InvalidInputError):
        meas.cost_bound()


# ---------------------------------------------------------------------------
# distributed run


def three_agent_instance(gamma=0.2, seed=42, pool_size=4):
    rng = np.random.default_rng(seed)
    pools = [rng.uniform(0, 1, size=(pool_size, 2)) for _ in range(3)]
    measures = [pool_measure(p, gamma) for p in pools]
    graph = laplacian([(0, 1), (1, 2)], 3)
    return graph, measures, pools


def test_run_input_validation():
    graph, measures, _ = three_agent_instance()
    with pytest.raises(InvalidInputError):
        barycenter_run(graph, measures[:2], 0.2, 0.1)
    with pytest.raises(InvalidInputError):
        barycenter_run(graph, measures, 0.3, 0.1)   # gamma mismatch
    disconnected = laplacian([(0, 1)], 3)
    with pytest.raises(InvalidInputError):
        barycenter_run(disconnected, measures, 0.2, 0.1)


def test_schedule_and_batch_rule_arithmetic():
    graph, measures, _ = three_agent_instance()
    eps, gamma = 0.1, 0.2
    res = barycenter_run(graph, measures, gamma, eps, R_estimate=1.0, rng=0,
                         N=6)
    expected = schedule_oracle(graph.lambda_max / gamma, graph.lambda_max,
                               eps, 6)
    for row, (alpha, tau, M) in zip(res.trace, expected):
        assert row["alpha"] == pytest.approx(alpha)
        assert row["tau"] == pytest.approx(tau)
        assert row["batch"] == M


def test_singleton_network_no_coupling():
    # a single agent with a one-atom pool: the dual never moves and the
    # primal is exactly the softmax of the (deterministic) costs
    gamma = 0.5
    costs = np.array([[0.3, 0.9, 0.1]])
    graph = laplacian([], 1)
    res = barycenter_run(graph, [pool_measure(costs, gamma)], gamma, 0.1,
                         R_estimate=1.0, rng=0, N=12)
    np.testing.assert_allclose(res.p_hat[0], softmax(-costs[0] / gamma),
                               atol=1e-12)
    assert res.messages == []


def test_identical_deterministic_agents_stay_in_consensus():
    # one-atom pools make sampling deterministic, so identical measures
    # on a symmetric cycle keep all blocks equal at every round
    gamma = 0.4
    costs = np.array([[0.2, 0.8]])
    measures = [pool_measure(costs, gamma) for _ in range(3)]
    graph = laplacian([(0, 1), (1, 2), (0, 2)], 3)
    res = barycenter_run(graph, measures, gamma, 0.1, R_estimate=1.0, rng=0,
                         N=10)
    for row in res.trace:
        assert row["consensus"] <= 1e-28
    assert np.ptp(res.p_hat, axis=0).max() <= 1e-15


def test_message_ledger_contains_only_graph_edges():
    graph, measures, _ = three_agent_instance()
    res = barycenter_run(graph, measures, 0.2, 0.1, R_estimate=1.0, rng=3,
                         N=5)
    edge_set = {(i, j) for (i, j) in graph.edges}
    edge_set |= {(j, i) for (i, j) in graph.edges}
    seen = set()
    for (k, i, j) in res.messages:
        assert (i, j) in edge_set
        seen.add((k, i, j))
    # every edge carries a message in both directions every round
    assert len(res.messages) == 5 * 2 * len(graph.edges)
    assert len(seen) == len(res.messages)


def test_primal_blocks_simplex_feasible():
    graph, measures, _ = three_agent_instance()
    res = barycenter_run(graph, measures, 0.2, 0.1, R_estimate=1.0, rng=0)
    assert np.all(res.p_hat >= 0)
    np.testing.assert_allclose(res.p_hat.sum(axis=1), 1.0, atol=1e-12)


def test_objective_matches_grid_search():
    gamma, eps = 0.2, 0.1
    graph, measures, pools = three_agent_instance(gamma=gamma)
    ts = np.linspace(0.0, 1.0, 2001)
    best = min(sum(transport_cost_exact(pool, np.array([t, 1.0 - t]), gamma)
                   for pool in pools) for t in ts)
    objs = []
    for seed in range(5):
        res = barycenter_run(graph, measures, gamma, eps, R_estimate=1.0,
                             rng=seed)
        objs.append(sum(transport_cost_exact(pools[i], res.p_hat[i], gamma)
                        for i in range(3)))
    assert abs(np.mean(objs) - best) <= 2 * eps


def test_consensus_residual_monotone_in_eps():
    gamma = 0.2
    graph, measures, _ = three_agent_instance(gamma=gamma)
    means = []
    for eps in (0.1, 0.05, 0.025):
        finals = [barycenter_run(graph, measures, gamma, eps, R_estimate=1.0,
                                 rng=seed).trace[-1]["consensus"]
                  for seed in range(5)]
        means.append(np.mean(finals))
    assert means[0] > means[1] > means[2]


def test_default_radius_heuristic():
    gamma = 0.5
    graph, measures, pools = three_agent_instance(gamma=gamma)
    res = barycenter_run(graph, measures, gamma, 0.5, rng=0, N=1)
    cmax = max(pool.max() for pool in pools)
    assert res.R == pytest.approx(2 * cmax / gamma)
    # continuous samplers have no cost envelope
    gauss = [gaussian_measure(np.array([[0.0], [1.0]]), np.array([0.5]),
                              0.2, gamma) for _ in range(3)]
    with pytest.raises(InvalidInputError):
        barycenter_run(graph, gauss, gamma, 0.5, rng=0, N=1)
