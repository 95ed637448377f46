"""Decentralized regularized Wasserstein barycenter over a simulated
agent network.

Each agent holds a measure (a finite sample pool or a Gaussian sampler)
and communicates only with its graph neighbors.  The consensus
constraint p_1 = ... = p_m is encoded as sqrt(W) p = 0 with
W = W_bar (x) I_n, W_bar the graph Laplacian, and the dual problem is
solved by an accelerated stochastic gradient scheme run in lockstep
rounds.  Agent gradients are softmax vectors over the sampled transport
costs, so every primal iterate is simplex-feasible by construction.

The round simulator keeps a message ledger: every gradient an agent
consumes must have arrived through an edge of the graph, which makes the
communication-locality claim checkable after the fact.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .errors import InvalidInputError

__all__ = [
    "NetworkGraph",
    "AgentMeasure",
    "BarycenterResult",
    "laplacian",
    "pool_measure",
    "gaussian_measure",
    "agent_stoch_grad",
    "consensus_residual",
    "barycenter_run",
]


# ---------------------------------------------------------------------------
# network


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected agent network with its Laplacian coupling matrix.

    ``lambda_max`` is the largest eigenvalue of W_bar, which equals the
    largest eigenvalue of the full coupling matrix W = W_bar (x) I_n.
    """

    m: int
    edges: tuple
    W_bar: np.ndarray
    lambda_max: float

    def neighbors(self, i):
        return sorted(j for (a, b) in self.edges for j in (a, b)
                      if i in (a, b) and j != i)

    def is_connected(self):
        if self.m == 1:
            return True
        seen = {0}
        frontier = [0]
        while frontier:
            nxt = []
            for i in frontier:
                for j in self.neighbors(i):
                    if j not in seen:
                        seen.add(j)
                        nxt.append(j)
            frontier = nxt
        return len(seen) == self.m


def laplacian(edges, m):
    """Build the :class:`NetworkGraph` for a simple undirected graph on
    m nodes given as a list of (i, j) pairs."""
    if m < 1:
        raise InvalidInputError("need at least one agent")
    canon = []
    for (i, j) in edges:
        if i == j:
            raise InvalidInputError(f"self-loop at node {i}")
        if not (0 <= i < m and 0 <= j < m):
            raise InvalidInputError(f"edge ({i},{j}) out of range")
        canon.append((min(i, j), max(i, j)))
    canon = tuple(sorted(set(canon)))
    W = np.zeros((m, m))
    for (i, j) in canon:
        W[i, j] = W[j, i] = -1.0
        W[i, i] += 1.0
        W[j, j] += 1.0
    lam_max = float(np.linalg.eigvalsh(W)[-1]) if m > 1 else 0.0
    return NetworkGraph(m=m, edges=canon, W_bar=W, lambda_max=max(lam_max, 0.0))


# ---------------------------------------------------------------------------
# measures


@dataclass
class AgentMeasure:
    """Sampling access to one agent's measure.

    ``pool_costs`` (S, n) holds the transport-cost rows c_l(Y) of a
    finite pool, in which case exact expectations are available;
    otherwise ``sampler(rng, M)`` must return an (M, n) array of cost
    rows drawn from the underlying continuous measure.
    """

    n: int
    gamma: float
    pool_costs: np.ndarray = None
    sampler: object = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")
        if (self.pool_costs is None) == (self.sampler is None):
            raise InvalidInputError(
                "exactly one of pool_costs / sampler is required")
        if self.pool_costs is not None:
            pool = np.asarray(self.pool_costs, dtype=float)
            if pool.ndim != 2 or pool.shape[1] != self.n:
                raise InvalidInputError("pool_costs must have shape (S, n)")
            if not np.all(np.isfinite(pool)) or np.any(pool < 0):
                raise InvalidInputError("costs must be finite nonnegative")
            self.pool_costs = pool

    @property
    def has_pool(self):
        return self.pool_costs is not None

    def sample_costs(self, rng, M):
        if self.has_pool:
            idx = rng.integers(0, self.pool_costs.shape[0], size=M)
            return self.pool_costs[idx]
        costs = np.asarray(self.sampler(rng, M), dtype=float)
        if costs.shape != (M, self.n):
            raise InvalidInputError("sampler must return shape (M, n)")
        return costs

    def cost_bound(self):
        if not self.has_pool:
            raise InvalidInputError(
                "no finite cost bound for a continuous sampler; "
                "pass R_estimate explicitly")
        return float(self.pool_costs.max())


def pool_measure(cost_rows, gamma):
    """Finite-pool measure from an (S, n) array of cost rows."""
    pool = np.atleast_2d(np.asarray(cost_rows, dtype=float))
    return AgentMeasure(n=pool.shape[1], gamma=gamma, pool_costs=pool)


def gaussian_measure(support, mean, std, gamma):
    """Gaussian measure on R^d with squared-distance costs to the fixed
    support points (rows of ``support``)."""
    support = np.atleast_2d(np.asarray(support, dtype=float))
    mean = np.asarray(mean, dtype=float)
    n, d = support.shape
    if mean.shape != (d,) or std <= 0:
        raise InvalidInputError("mean must have the support dimension, std > 0")

    def sampler(rng, M):
        Y = mean + std * rng.standard_normal((M, d))
        return ((support[None, :, :] - Y[:, None, :]) ** 2).sum(axis=2)

    return AgentMeasure(n=n, gamma=gamma, sampler=sampler)


def agent_stoch_grad(measure, lambda_block, M, rng):
    """Minibatch stochastic gradient of the agent's conjugate transport
    cost: the mean over M samples of softmax((lambda - c(Y)) / gamma).
    Always simplex-feasible."""
    if M < 1:
        raise InvalidInputError("batch size must be >= 1")
    costs = measure.sample_costs(rng, M)
    probs = softmax((lambda_block[None, :] - costs) / measure.gamma, axis=1)
    return probs.mean(axis=0)


# ---------------------------------------------------------------------------
# distributed solver


def consensus_residual(graph, p_stack):
    """p^T W p = sum over edges of ||p_i - p_j||^2 (zero iff all agent
    blocks agree on a connected graph)."""
    return float(sum(np.sum((p_stack[i] - p_stack[j]) ** 2)
                     for (i, j) in graph.edges))


@dataclass
class BarycenterResult:
    p_hat: np.ndarray           # (m, n), one simplex block per agent
    trace: list
    messages: list              # (round, sender, receiver) ledger
    N: int
    R: float
    samples: int


def _default_radius(measures, gamma):
    # crude envelope for the dual solution norm; documented heuristic,
    # not a certified bound
    n = measures[0].n
    cmax = max(meas.cost_bound() for meas in measures)
    return n * cmax / gamma if cmax > 0 else 1.0


def barycenter_run(graph, measures, gamma, eps, R_estimate=None, rng=None,
                   N=None):
    """Lockstep distributed barycenter approximation.

    Each round every agent draws a fresh minibatch, shares its gradient
    with its neighbors only, and applies the accelerated dual update;
    the primal blocks are the tau-weighted averages of the gradients.
    The returned ledger lists every (round, sender, receiver) message.
    """
    if len(measures) != graph.m:
        raise InvalidInputError("one measure per agent required")
    if not graph.is_connected():
        raise InvalidInputError("the agent graph must be connected")
    if eps <= 0 or gamma <= 0:
        raise InvalidInputError("eps and gamma must be positive")
    for meas in measures:
        if meas.gamma != gamma:
            raise InvalidInputError("measure gamma differs from run gamma")
    rng = np.random.default_rng(rng)
    m, n = graph.m, measures[0].n
    lam_max = graph.lambda_max
    R = float(R_estimate) if R_estimate is not None \
        else _default_radius(measures, gamma)
    L = lam_max / gamma
    if N is None:
        N = max(1, math.ceil(math.sqrt(16.0 * lam_max * R ** 2 / (eps * gamma))))

    zeta = np.zeros((m, n))
    eta = np.zeros((m, n))
    p_hat = np.zeros((m, n))
    C = 0.0
    trace, ledger = [], []
    total_samples = 0
    for k in range(N):
        if L > 0:
            alpha = (1.0 + math.sqrt(1.0 + 8.0 * L * C)) / (4.0 * L)
            C += alpha
            tau = alpha / C
            M = max(1, math.ceil(lam_max * C / (L * alpha * eps)))
        else:
            # singleton network: no coupling, plain uniform averaging
            alpha, tau, M = 0.0, 1.0 / (k + 1), 1
        lam_bar = tau * zeta + (1.0 - tau) * eta

        grads = np.empty((m, n))
        for i in range(m):
            grads[i] = agent_stoch_grad(measures[i], lam_bar[i], M, rng)
        total_samples += m * M

        # share gradients along edges; each agent's inbox holds only what
        # its neighbors sent this round
        inbox = [dict() for _ in range(m)]
        for (i, j) in graph.edges:
            inbox[j][i] = grads[i]
            inbox[i][j] = grads[j]
            ledger.append((k, i, j))
            ledger.append((k, j, i))
        for i in range(m):
            coupling = len(inbox[i]) * grads[i] - sum(inbox[i].values())
            zeta[i] = zeta[i] - alpha * coupling
        eta = tau * zeta + (1.0 - tau) * eta
        p_hat = tau * grads + (1.0 - tau) * p_hat

        res = consensus_residual(graph, p_hat)
        trace.append({"k": k, "alpha": alpha, "tau": tau, "batch": M,
                      "consensus": res, "gap_proxy": R * math.sqrt(res),
                      "messages": len(ledger), "samples": total_samples})
    return BarycenterResult(p_hat=p_hat, trace=trace, messages=ledger,
                            N=N, R=R, samples=total_samples)
