"""Entropic optimal transport at desk scale.

The regularized problem min { <C, X> - gamma H(X) : X 1 = r, X^T 1 = c,
X in Delta^{n^2} } is solved through its smooth dual (a log-partition
function of the 2n potentials), either by alternating marginal scalings
(Sinkhorn) or by the adaptive accelerated primal-dual method.  The
``approx_ot`` pipeline chooses gamma = eps / (3 ln n), rounds each primal
average to an exactly feasible plan and stops once both the rounding cost
and the duality gap drop below eps / 6, which certifies
<C, Xhat> <= OT* + eps.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp, xlogy

from .errors import (
    DivergedError,
    InvalidInputError,
    NotConvergedError,
    UnsupportedCombinationError,
)
from .primal_dual import LinConstrainedProblem, apdagd_run, dual_oracle

__all__ = [
    "TransportInstance",
    "random_transport_instance",
    "entropic_dual_oracle",
    "make_dual_problem",
    "sinkhorn_run",
    "round_to_feasible",
    "approx_ot",
    "ot_lp_exact",
]


@dataclass
class TransportInstance:
    """Cost matrix with marginals and an entropic regularization weight."""

    C: np.ndarray
    r: np.ndarray
    c: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n = self.C.shape[0]
        if self.C.shape != (n, n) or self.r.shape != (n,) or self.c.shape != (n,):
            raise InvalidInputError("C must be n-by-n with length-n marginals")
        if not np.all(np.isfinite(self.C)) or np.any(self.C < 0):
            raise InvalidInputError("cost matrix must be finite and nonnegative")
        for v in (self.r, self.c):
            if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
                raise InvalidInputError("marginals must lie on the simplex")
        if self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def cost_scale(self):
        return float(np.max(np.abs(self.C)))


def random_transport_instance(n, rng, gamma=1.0):
    """Seeded dense instance: uniform costs, interior Dirichlet marginals."""
    C = rng.uniform(0.0, 1.0, size=(n, n))
    r = rng.dirichlet(np.ones(n) * 5.0)
    c = rng.dirichlet(np.ones(n) * 5.0)
    return TransportInstance(C=C, r=r, c=c, gamma=gamma)


def _marginals(X):
    return X.sum(axis=1), X.sum(axis=0)


def primal_value(inst, X):
    """<C, X> - gamma H(X) with the 0 log 0 = 0 convention."""
    return float(np.sum(inst.C * X) + inst.gamma * np.sum(xlogy(X, X)))


def entropic_dual_oracle(inst, lam):
    """Dual oracle at lam = (y, z): (phi, grad, plan X(lam)).

    X(lam) is the softmax of (-C - y 1^T - 1 z^T) / gamma over all n^2
    entries (computed in log domain), phi(lam) = <lam, (r, c)> + gamma
    times the corresponding log-sum-exp, and grad phi = (r - X 1, c - X^T 1).
    """
    lam = np.asarray(lam, dtype=float)
    n = inst.n
    y, z = lam[:n], lam[n:]
    logits = (-inst.C - y[:, None] - z[None, :]) / inst.gamma
    lse = float(logsumexp(logits))
    X = np.exp(logits - lse)
    phi = float(np.dot(y, inst.r) + np.dot(z, inst.c)) + inst.gamma * lse
    row, col = _marginals(X)
    grad = np.concatenate([inst.r - row, inst.c - col])
    return phi, grad, X


def make_dual_problem(inst):
    """Wrap the instance as a linearly constrained problem on Delta^{n^2}."""
    n = inst.n

    def inner_solver(lam):
        return entropic_dual_oracle(inst, lam)[2].ravel()

    def max_term(lam):
        y, z = lam[:n], lam[n:]
        logits = (-inst.C - y[:, None] - z[None, :]) / inst.gamma
        return inst.gamma * float(logsumexp(logits))

    return LinConstrainedProblem(
        f=lambda x: primal_value(inst, x.reshape(n, n)),
        inner_solver=inner_solver,
        apply_A=lambda x: np.concatenate(_marginals(x.reshape(n, n))),
        apply_AT=lambda lam: (lam[:n, None] + lam[None, n:]).ravel(),
        b=np.concatenate([inst.r, inst.c]),
        gamma=inst.gamma,
        max_term=max_term,
    )


# ---------------------------------------------------------------------------
# Sinkhorn


def sinkhorn_run(inst, max_iter=10 ** 4, tol=1e-9, naive=False):
    """Alternating marginal scalings; returns (X, trace).

    The stabilized path keeps the potentials in log domain.  ``naive``
    forms K = exp(-C/gamma) directly and scales it, which underflows for
    small gamma; any non-finite iterate raises DivergedError, and hitting
    max_iter raises NotConvergedError carrying the final residuals.
    """
    n = inst.n
    with np.errstate(divide="ignore", invalid="ignore", over="ignore",
                     under="ignore"):
        log_r = np.log(inst.r)
        log_c = np.log(inst.c)
        if naive:
            K = np.exp(-inst.C / inst.gamma)
            v = np.ones(n)
            trace = []
            for it in range(max_iter):
                u = inst.r / (K @ v)
                v = inst.c / (K.T @ u)
                X = u[:, None] * K * v[None, :]
                if not np.all(np.isfinite(X)):
                    raise DivergedError("non-finite plan in unstabilized scaling",
                                        iteration=it)
                row, col = _marginals(X)
                res = float(np.abs(row - inst.r).sum() + np.abs(col - inst.c).sum())
                trace.append({"k": it + 1, "residual": res})
                if res <= tol:
                    return X, trace
        else:
            f = np.zeros(n)
            g = np.zeros(n)
            trace = []
            for it in range(max_iter):
                # row balancing then column balancing, all in log domain
                f = inst.gamma * (log_r - logsumexp(
                    (g[None, :] - inst.C) / inst.gamma, axis=1))
                g = inst.gamma * (log_c - logsumexp(
                    (f[:, None] - inst.C) / inst.gamma, axis=0))
                X = np.exp((f[:, None] + g[None, :] - inst.C) / inst.gamma)
                row, col = _marginals(X)
                res = float(np.abs(row - inst.r).sum() + np.abs(col - inst.c).sum())
                trace.append({"k": it + 1, "residual": res})
                if res <= tol:
                    return X, trace
    err = NotConvergedError("marginal scalings did not reach tolerance",
                            residuals={"l1": res})
    err.trace = trace
    err.X = X
    raise err


# ---------------------------------------------------------------------------
# rounding and the full pipeline


def round_to_feasible(X, r, c):
    """Project a nonnegative matrix onto the transportation polytope.

    Row-scale down, column-scale down, then add the rank-one correction
    err_r err_c^T / ||err_r||_1; the output meets both marginals exactly
    and moves at most 2(||X1 - r||_1 + ||X^T 1 - c||_1) in l1.
    """
    X = np.asarray(X, dtype=float)
    if np.any(X < 0):
        raise InvalidInputError("plan must be nonnegative")
    if X.sum() == 0.0:
        return np.outer(r, c)
    row = X.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale_r = np.where(row > 0, np.minimum(1.0, r / row), 1.0)
    X = scale_r[:, None] * X
    col = X.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale_c = np.where(col > 0, np.minimum(1.0, c / col), 1.0)
    X = X * scale_c[None, :]
    err_r = r - X.sum(axis=1)
    err_c = c - X.sum(axis=0)
    mass = err_r.sum()
    if mass > 0:
        X = X + np.outer(err_r, err_c) / mass
    return X


def approx_ot(C, r, c, eps, L0=1.0, max_iter=10 ** 6):
    """eps-approximation of the OT value by the accelerated dual method.

    Sets gamma = eps/(3 ln n), runs the adaptive primal-dual method on the
    entropic dual, rounds the running primal average every iteration, and
    stops when <C, Xhat - Xhat_k> <= eps/6 and the duality gap <= eps/6.
    Returns (Xhat, <C, Xhat>, trace).
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n < 2:
        raise InvalidInputError("need n >= 2")
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    gamma = eps / (3.0 * math.log(n))
    inst = TransportInstance(C=C, r=r, c=c, gamma=gamma)
    prob = make_dual_problem(inst)
    best = {}
    rounded = {}

    def stop(k, xhat, eta, gap, feas):
        Xk = xhat.reshape(n, n)
        Xr = round_to_feasible(Xk, inst.r, inst.c)
        move = float(np.sum(C * (Xr - Xk)))
        best["X"] = Xr
        best["value"] = float(np.sum(C * Xr))
        rounded[k] = (best["value"], move)
        return move <= eps / 6.0 and gap <= eps / 6.0

    _, eta, trace = apdagd_run(prob, L0=L0, eps_f=0.0, eps_eq=0.0,
                               max_iter=max_iter, stop_callback=stop)
    for row in trace:
        value, move = rounded[row["k"]]
        row["rounded_cost"] = value
        row["rounding_move"] = move
    return best["X"], best["value"], trace


def ot_lp_exact(C, r, c):
    """Exact OT value and optimal plan for desk-scale instances (n <= 8)."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n > 8:
        raise UnsupportedCombinationError("exact LP oracle limited to n <= 8")
    A_eq = np.zeros((2 * n, n * n))
    for i in range(n):
        A_eq[i, i * n:(i + 1) * n] = 1.0          # row sums
        A_eq[n + i, i::n] = 1.0                   # column sums
    b_eq = np.concatenate([r, c])
    res = linprog(C.ravel(), A_eq=A_eq[:-1], b_eq=b_eq[:-1],
                  bounds=(0, None), method="highs")
    if not res.success:
        raise NotConvergedError("LP solver failed: " + res.message)
    return float(res.fun), res.x.reshape(n, n)
