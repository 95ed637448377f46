"""Supervised PageRank: parametric random walks, truncated-series oracles,
pairwise square ranking loss, and the two learners built on them.

A query graph carries nonnegative node and edge features; the restart
distribution is proportional to <phi1, V_i> over the seed set and the
transition probabilities to <phi2, E_ij> over outgoing edges (dangling
rows fall back to the restart distribution).  The stationary distribution
pi solves pi = alpha pi0 + (1-alpha) P^T pi; both pi and its Jacobian
d pi / d phi^T are approximated by geometric truncated series whose depths
are chosen from target accuracies delta1 (loss) and delta2 (gradient).

Learning uses either a gradient-free projected scheme with a smoothed
two-point estimator, or an adaptive projected gradient method that doubles
its local constant M_k and requests oracle accuracy proportional to
eps / M_k.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedError, InvalidInputError, NotConvergedError

__all__ = [
    "QueryGraph",
    "RankingDataset",
    "random_query_graph",
    "random_dataset",
    "restart_vector",
    "transition_matrix",
    "stationary_exact",
    "stationary_approx",
    "stationary_jacobian_exact",
    "loss_exact",
    "grad_exact",
    "loss_approx",
    "grad_approx",
    "beta1_bound",
    "project_ball",
    "gfpgm_run",
    "gfpgm_params",
    "gfpgm_learn",
    "adaptive_pg_run",
    "adaptive_pg_learn",
]


# ---------------------------------------------------------------------------
# model


@dataclass
class QueryGraph:
    """Directed feature graph for one query.

    edges is a list of (i, j) pairs; edge_features has one row per edge in
    the same order.  seed is the restart support.
    """

    n_vertices: int
    edges: list
    seed: list
    node_features: np.ndarray   # (p, m1)
    edge_features: np.ndarray   # (len(edges), m2)
    alpha: float
    pairs: np.ndarray = None    # assessor rows: (row, higher, lower) pairs

    def __post_init__(self):
        self.node_features = np.atleast_2d(np.asarray(self.node_features, float))
        self.edge_features = np.asarray(self.edge_features, dtype=float)
        if self.edge_features.size == 0:
            self.edge_features = self.edge_features.reshape(0, self.m2 or 1)
        if np.any(self.node_features < 0) or np.any(self.edge_features < 0):
            raise InvalidInputError("features must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError("alpha must lie in (0, 1)")
        if not self.seed:
            raise InvalidInputError("seed set must be nonempty")

    @property
    def m1(self):
        return self.node_features.shape[1]

    @property
    def m2(self):
        return self.edge_features.shape[1] if self.edge_features.ndim == 2 else 0

    def assessor_matrix(self):
        """Rows with -1 at the more relevant page and +1 at the less one."""
        A = np.zeros((len(self.pairs), self.n_vertices))
        for row, (hi, lo) in enumerate(self.pairs):
            A[row, hi] = -1.0
            A[row, lo] = 1.0
        return A


@dataclass
class RankingDataset:
    """Query graphs with a shared parameter ball Phi = B(phi_hat, radius)."""

    graphs: list
    phi_hat: np.ndarray
    radius: float

    def __post_init__(self):
        self.phi_hat = np.asarray(self.phi_hat, dtype=float)
        alphas = {g.alpha for g in self.graphs}
        if len(alphas) != 1:
            raise InvalidInputError("all graphs must share the damping factor")
        self.alpha = alphas.pop()
        if np.any(self.phi_hat - self.radius <= 0):
            raise InvalidInputError("parameter ball must stay in the "
                                    "positive orthant")

    @property
    def r_max(self):
        return max(len(g.pairs) for g in self.graphs)

    @property
    def m(self):
        g = self.graphs[0]
        return g.m1 + g.m2


def _split(graph, phi):
    return phi[:graph.m1], phi[graph.m1:]


def restart_vector(graph, phi):
    phi1, _ = _split(graph, phi)
    weights = graph.node_features @ phi1
    pi0 = np.zeros(graph.n_vertices)
    denom = weights[graph.seed].sum()
    if denom <= 0:
        raise InvalidInputError("restart denominator is not positive")
    pi0[graph.seed] = weights[graph.seed] / denom
    return pi0


def transition_matrix(graph, phi):
    """Row-stochastic P with dangling rows replaced by the restart vector."""
    _, phi2 = _split(graph, phi)
    pi0 = restart_vector(graph, phi)
    p = graph.n_vertices
    P = np.zeros((p, p))
    weights = graph.edge_features @ phi2 if len(graph.edges) else np.zeros(0)
    for (i, j), w in zip(graph.edges, weights):
        P[i, j] = w
    for i in range(p):
        s = P[i].sum()
        if len(graph.edges) and any(e[0] == i for e in graph.edges):
            if s <= 0:
                raise InvalidInputError("transition denominator is not positive")
            P[i] /= s
        else:
            P[i] = pi0
    return P


def stationary_exact(graph, phi):
    """Dense linear solve of pi = alpha pi0 + (1 - alpha) P^T pi."""
    pi0 = restart_vector(graph, phi)
    P = transition_matrix(graph, phi)
    a = graph.alpha
    pi = np.linalg.solve(np.eye(graph.n_vertices) - (1 - a) * P.T, a * pi0)
    return pi


def stationary_approx(graph, phi, N):
    """Truncated geometric series, renormalized to the simplex exactly."""
    if N < 0:
        raise InvalidInputError("N must be nonnegative")
    pi0 = restart_vector(graph, phi)
    P = transition_matrix(graph, phi)
    a = graph.alpha
    acc = np.zeros_like(pi0)
    pik = pi0.copy()
    w = 1.0
    for _ in range(N + 1):
        acc += w * pik
        pik = P.T @ pik
        w *= 1 - a
    return a / (1 - (1 - a) ** (N + 1)) * acc


def _restart_jacobian(graph, phi):
    """d pi0 / d phi^T, shape (p, m)."""
    phi1, _ = _split(graph, phi)
    p, m = graph.n_vertices, graph.m1 + graph.m2
    weights = graph.node_features @ phi1
    S = weights[graph.seed].sum()
    T = graph.node_features[graph.seed].sum(axis=0)
    J = np.zeros((p, m))
    for i in graph.seed:
        J[i, :graph.m1] = graph.node_features[i] / S - (weights[i] / S) * T / S
    return J


def _transition_jacobians(graph, phi):
    """List of d p_i / d phi^T (columns of P^T), each of shape (p, m)."""
    _, phi2 = _split(graph, phi)
    p, m = graph.n_vertices, graph.m1 + graph.m2
    P = transition_matrix(graph, phi)
    J0 = _restart_jacobian(graph, phi)
    out_edges = {i: [] for i in range(p)}
    for idx, (i, j) in enumerate(graph.edges):
        out_edges[i].append((j, idx))
    jacs = []
    for i in range(p):
        J = np.zeros((p, m))
        if out_edges[i]:
            feats = graph.edge_features[[idx for _, idx in out_edges[i]]]
            S = float((feats @ phi2).sum())
            T = feats.sum(axis=0)
            for (j, idx) in out_edges[i]:
                w = float(graph.edge_features[idx] @ phi2)
                J[j, graph.m1:] = graph.edge_features[idx] / S - (w / S) * T / S
        else:
            J = J0.copy()
        jacs.append(J)
    return jacs


def stationary_jacobian_exact(graph, phi):
    """d pi / d phi^T by solving the fixed-point equation's derivative."""
    a = graph.alpha
    P = transition_matrix(graph, phi)
    pi = stationary_exact(graph, phi)
    rhs = a * _restart_jacobian(graph, phi)
    for i, J in enumerate(_transition_jacobians(graph, phi)):
        rhs += (1 - a) * J * pi[i]
    return np.linalg.solve(np.eye(graph.n_vertices) - (1 - a) * P.T, rhs)


# ---------------------------------------------------------------------------
# loss and inexact oracles


def _query_loss(graph, pi):
    margins = graph.assessor_matrix() @ pi
    return float(np.sum(np.maximum(margins, 0.0) ** 2))


def loss_exact(dataset, phi):
    return sum(_query_loss(g, stationary_exact(g, phi))
               for g in dataset.graphs) / len(dataset.graphs)


def grad_exact(dataset, phi):
    g_out = np.zeros_like(phi)
    for g in dataset.graphs:
        pi = stationary_exact(g, phi)
        A = g.assessor_matrix()
        J = stationary_jacobian_exact(g, phi)
        g_out += 2.0 * J.T @ A.T @ np.maximum(A @ pi, 0.0)
    return g_out / len(dataset.graphs)


def loss_approx(dataset, phi, delta1):
    """Series-truncated loss with |result - exact| <= delta1."""
    if delta1 <= 0:
        raise InvalidInputError("delta1 must be positive")
    a = dataset.alpha
    N = max(0, math.ceil(math.log(8.0 * dataset.r_max / delta1) / a) - 1)
    total = sum(_query_loss(g, stationary_approx(g, phi, N))
                for g in dataset.graphs)
    return total / len(dataset.graphs)


def beta1_bound(dataset):
    """Upper bound on alpha ||d pi0||_1 + (1-alpha) sum_i ||d p_i||_1 on Phi.

    Column sums of the restart Jacobian are at most 2 T_j / S where T_j
    sums feature j over the seed and S = <phi1, T>; minimizing S over the
    ball gives <phi_hat, T> - radius ||T||; same shape per transition row.
    """
    a = dataset.alpha
    m = dataset.m
    worst = 0.0
    for g in dataset.graphs:
        T = np.zeros(m)
        T[:g.m1] = g.node_features[g.seed].sum(axis=0)
        S_min = float(dataset.phi_hat @ T) - dataset.radius * float(
            np.linalg.norm(T))
        if S_min <= 0:
            raise InvalidInputError("restart denominator can vanish on Phi")
        restart_term = 2.0 * float(np.max(T)) / S_min
        trans = 0.0
        out_feats = {}
        for idx, (i, _) in enumerate(g.edges):
            out_feats.setdefault(i, []).append(idx)
        for i in range(g.n_vertices):
            if i in out_feats:
                Ti = np.zeros(m)
                Ti[g.m1:] = g.edge_features[out_feats[i]].sum(axis=0)
                Si = float(dataset.phi_hat @ Ti) - dataset.radius * float(
                    np.linalg.norm(Ti))
                if Si <= 0:
                    raise InvalidInputError(
                        "transition denominator can vanish on Phi")
                trans += 2.0 * float(np.max(Ti)) / Si
            else:
                trans += restart_term
        worst = max(worst, a * restart_term + (1 - a) * trans)
    return worst


def grad_approx(dataset, phi, delta2):
    """Series-truncated gradient with ||result - exact||_inf <= delta2."""
    if delta2 <= 0:
        raise InvalidInputError("delta2 must be positive")
    a = dataset.alpha
    beta1 = beta1_bound(dataset)
    r = dataset.r_max
    N1 = max(0, math.ceil(math.log(24.0 * beta1 * r / (a * delta2)) / a) - 1)
    N2 = max(0, math.ceil(math.log(8.0 * beta1 * r / (a * delta2)) / a) - 1)
    g_out = np.zeros_like(phi)
    for g in dataset.graphs:
        pi_t = stationary_approx(g, phi, N1)
        P = transition_matrix(g, phi)
        Pi = a * _restart_jacobian(g, phi)
        for i, J in enumerate(_transition_jacobians(g, phi)):
            Pi += (1 - a) * J * pi_t[i]
        acc = np.zeros_like(Pi)
        w = 1.0
        for _ in range(N2 + 1):
            acc += w * Pi
            Pi = P.T @ Pi
            w *= 1 - a
        Pi_t = acc / (1 - (1 - a) ** (N2 + 1))
        A = g.assessor_matrix()
        g_out += 2.0 * Pi_t.T @ A.T @ np.maximum(A @ pi_t, 0.0)
    return g_out / len(dataset.graphs)


# ---------------------------------------------------------------------------
# synthetic data


def random_query_graph(n_vertices, rng, m1=2, m2=2, alpha=0.15,
                       edge_prob=0.5, levels=3):
    edges = [(i, j) for i in range(n_vertices) for j in range(n_vertices)
             if i != j and rng.random() < edge_prob]
    seed_size = int(rng.integers(1, n_vertices + 1))
    seed = sorted(rng.choice(n_vertices, size=seed_size, replace=False).tolist())
    labels = rng.integers(0, levels, size=n_vertices)
    pairs = [(i, j) for i in range(n_vertices) for j in range(n_vertices)
             if labels[i] < labels[j]]  # label 0 = most relevant
    if not pairs:
        pairs = [(0, 1)]
    return QueryGraph(
        n_vertices=n_vertices,
        edges=edges,
        seed=seed,
        node_features=rng.uniform(0.1, 1.0, size=(n_vertices, m1)),
        edge_features=rng.uniform(0.1, 1.0, size=(len(edges), m2)),
        alpha=alpha,
        pairs=np.array(pairs))


def random_dataset(n_queries, n_vertices, rng, radius=0.3, **kw):
    graphs = [random_query_graph(n_vertices, rng, **kw) for _ in range(n_queries)]
    m = graphs[0].m1 + graphs[0].m2
    return RankingDataset(graphs=graphs, phi_hat=np.ones(m), radius=radius)


# ---------------------------------------------------------------------------
# gradient-free learner


def project_ball(x, center, radius):
    d = x - center
    nrm = np.linalg.norm(d)
    if nrm <= radius:
        return x
    return center + radius / nrm * d


def gfpgm_run(f_tilde, x0, h, M, tau, project, rng):
    """Projected descent on the two-point smoothed estimator.

    f_tilde must honor the accuracy its closure was built with; the
    returned iterate minimizes the recorded (inexact) values.
    Returns (best point, trace of per-step inexact values).
    """
    m = x0.size
    x = np.asarray(x0, dtype=float).copy()
    best_x, best_f = x.copy(), f_tilde(x)
    trace = [{"k": 0, "f": best_f}]
    for k in range(M):
        xi = rng.normal(size=m)
        xi /= np.linalg.norm(xi)
        f_plus = f_tilde(x + tau * xi)
        f_here = f_tilde(x)
        g = (m / tau) * (f_plus - f_here) * xi
        x = project(x - h * g)
        fx = f_tilde(x)
        trace.append({"k": k + 1, "f": fx})
        if fx < best_f:
            best_f, best_x = fx, x.copy()
    return best_x, trace


def gfpgm_params(m, L, R, eps):
    """Step-count, oracle accuracy and smoothing radius for target eps."""
    M = math.ceil(128.0 * m * L * R ** 2 / eps)
    delta = eps ** 1.5 * math.sqrt(2.0) / (16.0 * m * R * math.sqrt(L * (m + 8)))
    tau = math.sqrt(2.0 * eps / (L * (m + 8)))
    return M, delta, tau


def gfpgm_learn(dataset, phi0, L, eps, rng):
    """Gradient-free ranking-loss minimization over the parameter ball."""
    m = dataset.m
    M, delta, tau = gfpgm_params(m, L, dataset.radius, eps)
    return gfpgm_run(
        lambda phi: loss_approx(dataset, phi, delta),
        phi0, h=1.0 / (8.0 * m * L), M=M, tau=tau,
        project=lambda x: project_ball(x, dataset.phi_hat, dataset.radius),
        rng=rng)


# ---------------------------------------------------------------------------
# adaptive inexact projected gradient


def adaptive_pg_run(oracle, x0, L0, eps, project, max_outer=10 ** 5,
                    max_doublings=60):
    """Adaptive projected gradient with accuracy tied to the trial constant.

    oracle(x, M, need_grad) -> (f_tilde, g_tilde or None) must honor the
    inexactness policy for trial constant M (the caller fixes how delta
    scales with 1/M).
    Doubles M_k until the descent test with slack eps/(8 M_k) passes, then
    halves the starting constant for the next step.  Stops when the
    stationarity measure z = min_k ||M_k (x_k - x_{k+1})|| drops to eps.
    Returns (x_{K+1}, trace); trace rows carry M_k, z, and the cumulative
    inner-step count.
    """
    if L0 <= 0 or eps <= 0:
        raise InvalidInputError("need L0 > 0 and eps > 0")
    x = np.asarray(x0, dtype=float).copy()
    L = L0
    z = math.inf
    x_out = x.copy()
    inner_total = 0
    trace = []
    for k in range(max_outer):
        M = L
        for _ in range(max_doublings + 1):
            inner_total += 1
            fx, gx = oracle(x, M, True)
            w = project(x - gx / M)
            fw, _ = oracle(w, M, False)
            d = w - x
            if fw <= fx + float(gx @ d) + 0.5 * M * float(d @ d) + eps / (8 * M):
                break
            M *= 2.0
        else:
            raise DivergedError("descent test never passed", iteration=k)
        zk = M * float(np.linalg.norm(w - x))
        if zk < z:
            z = zk
            x_out = w.copy()
        trace.append({"k": k, "M": M, "z": z, "z_k": zk,
                      "inner": inner_total, "f": fx})
        x = w
        L = M / 2.0
        if z <= eps:
            return x_out, trace
    raise NotConvergedError("stationarity target not reached",
                            residuals={"z": z})


def adaptive_pg_learn(dataset, phi0, L0, eps, max_outer=10 ** 5):
    """Ranking-loss instantiation: delta1 = eps/(32 M), delta2 =
    eps/(64 M R sqrt(m))."""
    m = dataset.m
    R = dataset.radius

    def oracle(phi, M, need_grad):
        d1 = eps / (32.0 * M)
        d2 = eps / (64.0 * M * R * math.sqrt(m))
        grad = grad_approx(dataset, phi, d2) if need_grad else None
        return loss_approx(dataset, phi, d1), grad

    return adaptive_pg_run(
        oracle, phi0, L0, eps,
        project=lambda x: project_ball(x, dataset.phi_hat, dataset.radius),
        max_outer=max_outer)
