"""Two-player linear-dynamics games via the conjugate saddle problem.

A pursuer controls x' = A_x(t) x + B(t) u and an evader controls
y' = A_y(t) y + C(t) v on [0, theta]; the pursuer minimizes and the
evader maximizes a running cost plus a terminal cost.  Dualizing the two
terminal-state equalities turns the game into a finite-dimensional
saddle problem over multipliers (lambda, mu) whose inner subproblems

    psi1(lambda, mu) = min_u max_v [ F(u,v) - <mu, Bhat u> + <lambda, Chat v> ]
    psi2(lambda, mu) = min_x max_y [ Phi(x,y) + <mu, x> - <lambda, y> ]

decouple over time nodes (psi1) and are solved in closed form or by a
small LP.  Two outer methods are provided:

* ``sda_run`` -- simple dual averages for the convex-concave case with
  bounded control/state sets;
* ``dual_extrapolation_run`` -- for strongly convex-concave data, with
  step constant L computed from the problem moduli.

Both return averaged strategies with a computable duality-gap
certificate.  The dual level-set radii D entering the certificates are
estimated as twice the running maximum of the iterate prox values and
then frozen; the interior-solution margin r is not estimated, so
feasibility is reported as raw residuals.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import (
    InvalidInputError,
    OracleError,
    UnsupportedCombinationError,
)
from .geometry import project_ball, project_simplex

__all__ = [
    "ControlSet",
    "RunningCost",
    "TerminalCost",
    "GameSpec",
    "DiscretizedGame",
    "SaddleCertificate",
    "discretize",
    "psi1_solve",
    "psi2_solve",
    "sda_run",
    "dual_extrapolation_run",
    "beta_hat",
    "sda_gap_bound",
    "dual_extrapolation_constant",
    "prox_map",
    "refinement_diagnostic",
]


# ---------------------------------------------------------------------------
# sets and costs


@dataclass(frozen=True)
class ControlSet:
    """Closed convex constraint set: the full space, a centered
    Euclidean ball, a coordinate box or the standard simplex."""

    kind: str
    dim: int
    radius: float = 1.0
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("full", "ball", "box", "simplex"):
            raise InvalidInputError(f"unknown set kind {self.kind!r}")
        if self.kind == "ball" and self.radius <= 0:
            raise InvalidInputError("ball radius must be positive")
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise InvalidInputError("box bounds must have shape (dim,)")
            if np.any(lo > hi):
                raise InvalidInputError("box lower bounds exceed upper bounds")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)

    @property
    def bounded(self):
        return self.kind != "full"

    def diameter(self):
        if self.kind == "ball":
            return 2.0 * self.radius
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        if self.kind == "simplex":
            return math.sqrt(2.0)
        return math.inf

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "full":
            return v
        if self.kind == "ball":
            return project_ball(v, self.radius)
        if self.kind == "box":
            return np.clip(v, self.lo, self.hi)
        return project_simplex(v)

    def linear_argmin(self, c):
        """argmin <c, v> over the set (bounded kinds only)."""
        c = np.asarray(c, dtype=float)
        if self.kind == "ball":
            nrm = np.linalg.norm(c)
            return np.zeros(self.dim) if nrm == 0 else -self.radius * c / nrm
        if self.kind == "box":
            return np.where(c > 0, self.lo, self.hi).astype(float)
        if self.kind == "simplex":
            out = np.zeros(self.dim)
            out[int(np.argmin(c))] = 1.0
            return out
        raise UnsupportedCombinationError(
            "linear term unbounded below on the full space")

    def contains(self, v, tol=1e-8):
        v = np.asarray(v, dtype=float)
        if self.kind == "full":
            return bool(np.all(np.isfinite(v)))
        if self.kind == "ball":
            return bool(np.linalg.norm(v) <= self.radius + tol)
        if self.kind == "box":
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)


@dataclass(frozen=True)
class RunningCost:
    """Per-time running cost, one of two enumerated quadratic forms:

    * ``quad``:     (au/2)||u||^2 - (av/2)||v||^2
    * ``bilinear``: u^T M v   (matrix-game coupling)
    """

    kind: str
    au: float = 0.0
    av: float = 0.0
    M: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("quad", "bilinear"):
            raise InvalidInputError(f"unknown running cost {self.kind!r}")
        if self.kind == "quad" and (self.au < 0 or self.av < 0):
            raise InvalidInputError("quad moduli must be nonnegative")
        if self.kind == "bilinear":
            if self.M is None:
                raise InvalidInputError("bilinear cost needs a matrix M")
            object.__setattr__(self, "M", np.asarray(self.M, dtype=float))

    def value(self, u, v):
        if self.kind == "quad":
            return 0.5 * self.au * float(np.dot(u, u)) \
                - 0.5 * self.av * float(np.dot(v, v))
        return float(u @ self.M @ v)


@dataclass(frozen=True)
class TerminalCost:
    """Terminal cost (ax/2)||x||^2 - (ay/2)||y||^2 (ax = ay = 0 gives a
    pure matrix-game embedding)."""

    ax: float = 0.0
    ay: float = 0.0

    def __post_init__(self):
        if self.ax < 0 or self.ay < 0:
            raise InvalidInputError("terminal moduli must be nonnegative")

    def value(self, x, y):
        return 0.5 * self.ax * float(np.dot(x, x)) \
            - 0.5 * self.ay * float(np.dot(y, y))


def _as_callable(A, shape):
    if callable(A):
        return A
    mat = np.asarray(A, dtype=float)
    if mat.shape != shape:
        raise InvalidInputError(f"expected shape {shape}, got {mat.shape}")
    return lambda t: mat


@dataclass
class GameSpec:
    """Continuous-time game data.

    ``A_x``, ``A_y``, ``B``, ``C`` may be constant matrices or callables
    of t.  ``P``/``Q`` constrain the controls node-wise, ``X``/``Y`` the
    terminal states.
    """

    A_x: object
    A_y: object
    B: object
    C: object
    theta: float
    x0: np.ndarray
    y0: np.ndarray
    P: ControlSet
    Q: ControlSet
    X: ControlSet
    Y: ControlSet
    running: RunningCost
    terminal: TerminalCost

    def __post_init__(self):
        if self.theta <= 0:
            raise InvalidInputError("theta must be positive")
        self.x0 = np.asarray(self.x0, dtype=float)
        self.y0 = np.asarray(self.y0, dtype=float)
        n, m = self.x0.size, self.y0.size
        self.A_x = _as_callable(self.A_x, (n, n))
        self.A_y = _as_callable(self.A_y, (m, m))
        self.B = _as_callable(self.B, (n, self.P.dim))
        self.C = _as_callable(self.C, (m, self.Q.dim))

    @property
    def n(self):
        return self.x0.size

    @property
    def m(self):
        return self.y0.size


# ---------------------------------------------------------------------------
# discretization


def _transition_grid(A, theta, T, integrator):
    """V(theta, t_j) at the grid points t_j = j theta / T, computed by
    integrating dZ/dt = -Z A(t), Z(theta) = I backward over the grid."""
    n = A(0.0).shape[0]
    h = theta / T
    Z = np.eye(n)
    out = [None] * (T + 1)
    out[T] = Z.copy()
    f = lambda t, M: -M @ A(t)
    for j in range(T, 0, -1):
        t = j * h
        if integrator == "euler":
            Z = Z - h * f(t, Z)
        else:
            k1 = f(t, Z)
            k2 = f(t - h / 2, Z - (h / 2) * k1)
            k3 = f(t - h / 2, Z - (h / 2) * k2)
            k4 = f(t - h, Z - h * k3)
            Z = Z - (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[j - 1] = Z.copy()
    return out


def _quadrature(theta, T, integrator):
    """(nodes, weights): left-endpoint rule for euler, Simpson-type for
    rk4 (composite Simpson when T is even, trapezoid otherwise)."""
    h = theta / T
    if integrator == "euler":
        return h * np.arange(T), np.full(T, h)
    nodes = h * np.arange(T + 1)
    if T % 2 == 0:
        w = np.ones(T + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
    else:
        w = np.full(T + 1, h)
        w[0] = w[-1] = h / 2.0
    return nodes, w


@dataclass
class DiscretizedGame:
    """Finite-dimensional surrogate: terminal maps x(theta) = x0_free +
    Bhat u_flat, y(theta) = y0_free + Chat v_flat, with quadrature
    weights folded into the operator columns so matrix transposition is
    the exact adjoint."""

    Bhat: np.ndarray
    Chat: np.ndarray
    x0_free: np.ndarray
    y0_free: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    p: int
    q: int

    @property
    def J(self):
        return self.nodes.size

    def b_adjoint(self, mu):
        """Node values of the adjoint map applied to mu, shape (J, p)."""
        return (self.Bhat.T @ mu).reshape(self.J, self.p) / self.weights[:, None]

    def c_adjoint(self, lam):
        return (self.Chat.T @ lam).reshape(self.J, self.q) / self.weights[:, None]

    def b_norm(self):
        """Operator norm of the control-to-terminal-state map."""
        # Gram = sum_j w_j (V B)_j (V B)_j^T; recover V B from the
        # weighted columns
        n = self.Bhat.shape[0]
        G = np.zeros((n, n))
        for j in range(self.J):
            blk = self.Bhat[:, j * self.p:(j + 1) * self.p] / self.weights[j]
            G += self.weights[j] * blk @ blk.T
        return math.sqrt(max(np.linalg.eigvalsh(G).max(), 0.0))

    def c_norm(self):
        m = self.Chat.shape[0]
        G = np.zeros((m, m))
        for j in range(self.J):
            blk = self.Chat[:, j * self.q:(j + 1) * self.q] / self.weights[j]
            G += self.weights[j] * blk @ blk.T
        return math.sqrt(max(np.linalg.eigvalsh(G).max(), 0.0))


def discretize(spec, T, integrator="rk4"):
    """Build the finite-dimensional game on a uniform grid of T
    intervals.  ``integrator`` selects both the transition-matrix ODE
    scheme and the quadrature rule ("euler" or "rk4")."""
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    if integrator not in ("euler", "rk4"):
        raise InvalidInputError(f"unknown integrator {integrator!r}")
    nodes, weights = _quadrature(spec.theta, T, integrator)
    Vx = _transition_grid(spec.A_x, spec.theta, T, integrator)
    Vy = _transition_grid(spec.A_y, spec.theta, T, integrator)
    J = nodes.size
    p, q = spec.P.dim, spec.Q.dim

    bcols, ccols = [], []
    for j in range(J):
        bcols.append(weights[j] * Vx[j] @ spec.B(nodes[j]))
        ccols.append(weights[j] * Vy[j] @ spec.C(nodes[j]))
    return DiscretizedGame(
        Bhat=np.hstack(bcols), Chat=np.hstack(ccols),
        x0_free=Vx[0] @ spec.x0, y0_free=Vy[0] @ spec.y0,
        nodes=nodes, weights=weights, p=p, q=q)


# ---------------------------------------------------------------------------
# inner saddle solvers


def _node_saddle_quad(cost, P, Q, bu, cv):
    """Saddle of (au/2)||u||^2 - (av/2)||v||^2 + <bu,u> + <cv,v>."""
    u = P.project(-bu / cost.au) if cost.au > 0 else P.linear_argmin(bu)
    v = Q.project(cv / cost.av) if cost.av > 0 else Q.linear_argmin(-cv)
    return u, v


def _node_saddle_bilinear(M, bu, cv):
    """Saddle of u^T M v + <bu,u> + <cv,v> over simplex x simplex.

    Solved as the LP  min_u <bu,u> + t  s.t.  M^T u + cv <= t 1, u in
    simplex; the evader's strategy is the dual vector of the inequality
    block (it sums to one by the stationarity condition on t).
    """
    p, q = M.shape
    cvec = np.concatenate([bu, [1.0]])
    A_ub = np.hstack([M.T, -np.ones((q, 1))])
    b_ub = -cv
    A_eq = np.concatenate([np.ones(p), [0.0]])[None, :]
    res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * p + [(None, None)], method="highs")
    if not res.success:
        raise OracleError(f"node LP failed: {res.message}")
    u = res.x[:p]
    v = np.maximum(-np.asarray(res.ineqlin.marginals), 0.0)
    tot = v.sum()
    v = np.full(q, 1.0 / q) if tot <= 0 else v / tot
    return u, v


def psi1_solve(game, spec, lam, mu):
    """Inner control saddle, solved node by node.

    Returns ``(value, U, V)`` with U of shape (J, p) and V of shape
    (J, q); value approximates the time integral with the grid's
    quadrature weights.
    """
    bu_nodes = -game.b_adjoint(mu)
    cv_nodes = game.c_adjoint(lam)
    cost = spec.running
    U = np.empty((game.J, game.p))
    V = np.empty((game.J, game.q))
    total = 0.0
    for j in range(game.J):
        bu, cv = bu_nodes[j], cv_nodes[j]
        if cost.kind == "quad":
            u, v = _node_saddle_quad(cost, spec.P, spec.Q, bu, cv)
        else:
            if spec.P.kind != "simplex" or spec.Q.kind != "simplex":
                raise UnsupportedCombinationError(
                    "bilinear running cost requires simplex control sets")
            u, v = _node_saddle_bilinear(cost.M, bu, cv)
        U[j], V[j] = u, v
        total += game.weights[j] * (cost.value(u, v)
                                    + float(np.dot(bu, u)) + float(np.dot(cv, v)))
    return total, U, V


def psi2_solve(spec, lam, mu):
    """Terminal saddle min_x max_y [Phi(x,y) + <mu,x> - <lambda,y>]."""
    term = spec.terminal
    if term.ax > 0:
        x = spec.X.project(-mu / term.ax)
    else:
        x = spec.X.linear_argmin(mu)
    if term.ay > 0:
        y = spec.Y.project(-lam / term.ay)
    else:
        y = spec.Y.linear_argmin(lam)
    value = term.value(x, y) + float(np.dot(mu, x)) - float(np.dot(lam, y))
    return value, x, y


# ---------------------------------------------------------------------------
# averaged-strategy certificates


@dataclass
class SaddleCertificate:
    """Averaged strategies with a duality-gap certificate."""

    u_hat: np.ndarray
    v_hat: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray
    gap: float
    res_x: float
    res_y: float
    k: int
    D: float = field(default=math.nan)


def _running_integral(game, spec, U, V):
    w, rc = game.weights, spec.running
    if rc.kind == "quad":
        return float(0.5 * rc.au * w @ (U * U).sum(axis=1)
                     - 0.5 * rc.av * w @ (V * V).sum(axis=1))
    return float(w @ np.einsum("jp,pq,jq->j", U, rc.M, V))


def _phi_value(game, spec, U, x, V, y, R_lam, R_mu):
    rx = x - game.x0_free - game.Bhat @ U.ravel()
    ry = game.y0_free + game.Chat @ V.ravel() - y
    return (_running_integral(game, spec, U, V) + spec.terminal.value(x, y)
            + R_mu * float(np.linalg.norm(rx))
            - R_lam * float(np.linalg.norm(ry)))


def _safe_unit(r):
    nrm = float(np.linalg.norm(r))
    if nrm < 1e-14:
        return np.zeros_like(r), 0.0
    return r / nrm, nrm


def _running_grad_u(game, spec, U, V):
    rc, w = spec.running, game.weights[:, None]
    if rc.kind == "quad":
        return rc.au * w * U
    return w * (V @ rc.M.T)


def _running_grad_v(game, spec, U, V):
    rc, w = spec.running, game.weights[:, None]
    if rc.kind == "quad":
        return -rc.av * w * V
    return w * (U @ rc.M)


def _set_bounds_constraints(cset, J, dim, offset):
    """(bounds, constraints) entries for J node copies of a set inside a
    flat variable vector starting at ``offset``."""
    bounds, cons = [], []
    for j in range(J):
        sl = slice(offset + j * dim, offset + (j + 1) * dim)
        if cset.kind == "box":
            bounds.extend(zip(cset.lo, cset.hi))
        elif cset.kind == "simplex":
            bounds.extend([(0.0, None)] * dim)
            cons.append({"type": "eq",
                         "fun": (lambda w, sl=sl: w[sl].sum() - 1.0)})
        elif cset.kind == "ball":
            bounds.extend([(None, None)] * dim)
            cons.append({"type": "ineq",
                         "fun": (lambda w, sl=sl, r=cset.radius:
                                 r ** 2 - float(np.dot(w[sl], w[sl])))})
        else:
            bounds.extend([(None, None)] * dim)
    return bounds, cons


def _solve_nlp(fun, w0, bounds, cons, jac=None):
    res = minimize(fun, w0, method="SLSQP", jac=jac, bounds=bounds,
                   constraints=cons, options={"maxiter": 300, "ftol": 1e-12})
    best = fun(res.x) if res.x is not None else math.inf
    start = fun(w0)
    # the warm start is always feasible; never report a worse point
    return min(best, start)


def xi_value(game, spec, U, x, R_lam, R_mu, v0=None, y0=None):
    """max over admissible (v, y) of phi(u, x, v, y)."""
    J, q, m = game.J, game.q, game.y0_free.size
    v0 = np.zeros((J, q)) if v0 is None else v0
    y0 = np.zeros(m) if y0 is None else y0
    bounds_v, cons = _set_bounds_constraints(spec.Q, J, q, 0)
    bounds_y, cons_y = _set_bounds_constraints(spec.Y, 1, m, J * q)
    bounds = bounds_v + bounds_y
    cons = cons + cons_y

    def neg_phi(w):
        V = w[:J * q].reshape(J, q)
        y = w[J * q:]
        return -_phi_value(game, spec, U, x, V, y, R_lam, R_mu)

    def neg_phi_grad(w):
        V = w[:J * q].reshape(J, q)
        y = w[J * q:]
        unit, nrm = _safe_unit(game.y0_free + game.Chat @ V.ravel() - y)
        gV = _running_grad_v(game, spec, U, V)
        gV -= R_lam * (game.Chat.T @ unit).reshape(J, q)
        gy = -spec.terminal.ay * y + R_lam * unit
        return -np.concatenate([gV.ravel(), gy])

    w0 = np.concatenate([v0.ravel(), y0])
    return -_solve_nlp(neg_phi, w0, bounds, cons, jac=neg_phi_grad)


def eta_value(game, spec, V, y, R_lam, R_mu, u0=None, x0=None):
    """min over admissible (u, x) of phi(u, x, v, y)."""
    J, p, n = game.J, game.p, game.x0_free.size
    u0 = np.zeros((J, p)) if u0 is None else u0
    x0 = np.zeros(n) if x0 is None else x0
    bounds_u, cons = _set_bounds_constraints(spec.P, J, p, 0)
    bounds_x, cons_x = _set_bounds_constraints(spec.X, 1, n, J * p)
    bounds = bounds_u + bounds_x
    cons = cons + cons_x

    def phi(w):
        U = w[:J * p].reshape(J, p)
        x = w[J * p:]
        return _phi_value(game, spec, U, x, V, y, R_lam, R_mu)

    def phi_grad(w):
        U = w[:J * p].reshape(J, p)
        x = w[J * p:]
        unit, nrm = _safe_unit(x - game.x0_free - game.Bhat @ U.ravel())
        gU = _running_grad_u(game, spec, U, V)
        gU -= R_mu * (game.Bhat.T @ unit).reshape(J, p)
        gx = spec.terminal.ax * x + R_mu * unit
        return np.concatenate([gU.ravel(), gx])

    w0 = np.concatenate([u0.ravel(), x0])
    return _solve_nlp(phi, w0, bounds, cons, jac=phi_grad)


def _certificate(game, spec, avg, k, D_lam, D_mu, sigma_lam, sigma_mu,
                 kappa):
    U, V, x, y = avg
    R_lam = math.sqrt(2.0 * D_lam / sigma_lam)
    R_mu = math.sqrt(2.0 * D_mu / sigma_mu)
    xi = xi_value(game, spec, U, x, R_lam, R_mu, v0=V, y0=y)
    eta = eta_value(game, spec, V, y, R_lam, R_mu, u0=U, x0=x)
    res_x = float(np.linalg.norm(game.x0_free + game.Bhat @ U.ravel() - x))
    res_y = float(np.linalg.norm(game.y0_free + game.Chat @ V.ravel() - y))
    D = kappa * D_lam + (1.0 - kappa) * D_mu
    return SaddleCertificate(U.copy(), V.copy(), x.copy(), y.copy(),
                             gap=xi - eta, res_x=res_x, res_y=res_y, k=k, D=D)


# ---------------------------------------------------------------------------
# outer methods


def beta_hat(K):
    """First K values of the averaging sequence b0 = b1 = 1,
    b_{i+1} = b_i + 1/b_i (index i >= 1)."""
    out = np.empty(max(K, 2))
    out[0] = out[1] = 1.0
    for i in range(1, out.size - 1):
        out[i + 1] = out[i] + 1.0 / out[i]
    return out[:max(K, 2)] if K >= 2 else out[:K]


def prox_map(s, beta, kappa, sigma_lam, sigma_mu, m_dim):
    """argmin_z { -<s, z> + beta d(z) } for the block-quadratic
    d(z) = kappa (sigma_lam/2)||lam||^2 + (1-kappa)(sigma_mu/2)||mu||^2;
    ``s`` is the stacked (s_lam, s_mu) with lam of size ``m_dim``."""
    lam = s[:m_dim] / (beta * kappa * sigma_lam)
    mu = s[m_dim:] / (beta * (1.0 - kappa) * sigma_mu)
    return np.concatenate([lam, mu])


def _oracle(game, spec, lam, mu):
    """g(z) = (d psi / d lam, -d psi / d mu) plus saddle points."""
    _, U, V = psi1_solve(game, spec, lam, mu)
    _, x, y = psi2_solve(spec, lam, mu)
    g_lam = game.Chat @ V.ravel() + game.y0_free - y
    g_mu = game.x0_free + game.Bhat @ U.ravel() - x
    return np.concatenate([g_lam, g_mu]), (U, V, x, y)


class _Averager:
    def __init__(self, J, p, q, n, m):
        self.U = np.zeros((J, p))
        self.V = np.zeros((J, q))
        self.x = np.zeros(n)
        self.y = np.zeros(m)
        self.count = 0

    def add(self, U, V, x, y):
        self.count += 1
        w = 1.0 / self.count
        self.U += w * (U - self.U)
        self.V += w * (V - self.V)
        self.x += w * (x - self.x)
        self.y += w * (y - self.y)

    def snapshot(self):
        return (self.U.copy(), self.V.copy(), self.x.copy(), self.y.copy())


def _log_points(K, n_logs):
    if K <= n_logs:
        return list(range(K))
    pts = np.unique(np.geomspace(1, K, n_logs).astype(int) - 1)
    return sorted(set(pts) | {K - 1})


def sda_run(game, spec, gamma_step, K, kappa=0.5, sigma_lam=1.0, sigma_mu=1.0,
            n_logs=12):
    """Simple dual averages on the conjugate saddle problem.

    Requires bounded control and terminal sets.  Returns the final
    :class:`SaddleCertificate` and a trace; certificate gaps are
    evaluated at about ``n_logs`` geometrically spaced iterations after
    the run, using D_lam/D_mu frozen at twice the running max of the
    iterates' prox values.
    """
    if gamma_step <= 0 or not 0 < kappa < 1:
        raise InvalidInputError("need gamma_step > 0 and kappa in (0, 1)")
    for cset, name in ((spec.P, "P"), (spec.Q, "Q"), (spec.X, "X"), (spec.Y, "Y")):
        if not cset.bounded:
            raise InvalidInputError(f"sda_run needs bounded sets; {name} is not")
    m_dim, n_dim = game.y0_free.size, game.x0_free.size
    bh = beta_hat(K + 1)
    z = np.zeros(m_dim + n_dim)
    s = np.zeros_like(z)
    avg = _Averager(game.J, game.p, game.q, n_dim, m_dim)
    logs = _log_points(K, n_logs)
    snapshots = {}
    d_lam_max = d_mu_max = 0.0
    for k in range(K):
        lam, mu = z[:m_dim], z[m_dim:]
        d_lam_max = max(d_lam_max, 0.5 * sigma_lam * float(np.dot(lam, lam)))
        d_mu_max = max(d_mu_max, 0.5 * sigma_mu * float(np.dot(mu, mu)))
        g, pts = _oracle(game, spec, lam, mu)
        avg.add(*pts)
        s += g
        z = prox_map(-s, gamma_step * bh[k + 1], kappa, sigma_lam, sigma_mu,
                     m_dim)
        if k in logs:
            snapshots[k] = avg.snapshot()

    D_lam = 2.0 * max(d_lam_max, 1e-12)
    D_mu = 2.0 * max(d_mu_max, 1e-12)
    trace = []
    cert = None
    for k in sorted(snapshots):
        cert = _certificate(game, spec, snapshots[k], k, D_lam, D_mu,
                            sigma_lam, sigma_mu, kappa)
        bound = (bh[k + 1] / (k + 1)) * (
            gamma_step * cert.D
            + _sda_L2(game, spec, kappa, sigma_lam, sigma_mu) / (2 * gamma_step))
        trace.append({"k": k, "gap": cert.gap, "res_x": cert.res_x,
                      "res_y": cert.res_y, "beta_hat": bh[k + 1],
                      "bound": bound})
    return cert, trace


def _sda_L2(game, spec, kappa, sigma_lam, sigma_mu):
    """L^2 with L_lam, L_mu built from operator norms, set diameters and
    free-motion endpoints."""
    rt = math.sqrt
    th = game.nodes[-1] if game.nodes[-1] > 0 else 1.0
    L_lam = (rt(th) * game.c_norm() * spec.Q.diameter()
             + spec.Y.diameter() + float(np.linalg.norm(game.y0_free)))
    L_mu = (rt(th) * game.b_norm() * spec.P.diameter()
            + spec.X.diameter() + float(np.linalg.norm(game.x0_free)))
    return L_lam ** 2 / (kappa * sigma_lam) + L_mu ** 2 / ((1 - kappa) * sigma_mu)


def sda_gap_bound(game, spec, gamma_step, k, D, kappa=0.5, sigma_lam=1.0,
                  sigma_mu=1.0):
    """Certified gap bound (beta_hat_{k+1}/(k+1)) (gamma D + L^2/(2 gamma))."""
    bh = beta_hat(k + 2)
    L2 = _sda_L2(game, spec, kappa, sigma_lam, sigma_mu)
    return (bh[k + 1] / (k + 1)) * (gamma_step * D + L2 / (2 * gamma_step))


def dual_extrapolation_constant(game, spec, sigma_lam=1.0, sigma_mu=1.0):
    """Step constant L for the strongly convex-concave method, computed
    from the cost moduli and operator norms (cross-Lipschitz terms of
    the separable quadratic costs are zero)."""
    rc, tc = spec.running, spec.terminal
    if rc.kind != "quad" or rc.au <= 0 or rc.av <= 0 or tc.ax <= 0 or tc.ay <= 0:
        raise InvalidInputError(
            "dual extrapolation needs strongly convex-concave costs")
    bn, cn = game.b_norm(), game.c_norm()
    first = 2.0 * (cn ** 2 / rc.av + 1.0 / tc.ay)
    second = bn ** 2 / rc.au + 1.0 / tc.ax
    pref = (sigma_lam + sigma_mu) / (sigma_lam * sigma_mu)
    return pref * math.sqrt(first) * math.sqrt(second)


def dual_extrapolation_run(game, spec, K, sigma_lam=1.0, sigma_mu=1.0,
                           n_logs=12):
    """Dual extrapolation for the strongly convex-concave game.

    Uses kappa = sigma_mu / (sigma_mu + sigma_lam) and beta = L from
    :func:`dual_extrapolation_constant`.  Strategy averages are built
    from the saddle points at the z iterates.
    """
    kappa = sigma_mu / (sigma_mu + sigma_lam)
    L = dual_extrapolation_constant(game, spec, sigma_lam, sigma_mu)
    m_dim, n_dim = game.y0_free.size, game.x0_free.size

    def t_beta(z, svec):
        # argmax <s, x - z> - beta omega(z, x);  omega(z,.) = d(. - z)
        return z + prox_map(svec, L, kappa, sigma_lam, sigma_mu, m_dim)

    zbar = np.zeros(m_dim + n_dim)
    s = np.zeros_like(zbar)
    avg = _Averager(game.J, game.p, game.q, n_dim, m_dim)
    logs = _log_points(K, n_logs)
    snapshots = {}
    d_lam_max = d_mu_max = 1e-12
    for k in range(K):
        xk = t_beta(zbar, s)
        g_x, _ = _oracle(game, spec, xk[:m_dim], xk[m_dim:])
        zk = t_beta(xk, -g_x)
        g_z, pts = _oracle(game, spec, zk[:m_dim], zk[m_dim:])
        s = s - g_z
        avg.add(*pts)
        lam, mu = zk[:m_dim], zk[m_dim:]
        d_lam_max = max(d_lam_max, 0.5 * sigma_lam * float(np.dot(lam, lam)))
        d_mu_max = max(d_mu_max, 0.5 * sigma_mu * float(np.dot(mu, mu)))
        if k in logs:
            snapshots[k] = avg.snapshot()

    D_lam, D_mu = 2.0 * d_lam_max, 2.0 * d_mu_max
    trace = []
    cert = None
    for k in sorted(snapshots):
        cert = _certificate(game, spec, snapshots[k], k, D_lam, D_mu,
                            sigma_lam, sigma_mu, kappa)
        trace.append({"k": k, "gap": cert.gap, "res_x": cert.res_x,
                      "res_y": cert.res_y, "bound": L * cert.D / (k + 1)})
    return cert, trace


# ---------------------------------------------------------------------------
# diagnostics


def refinement_diagnostic(spec, T, method="sda", K=200, integrator="rk4",
                          **kwargs):
    """Grid-refinement check: solve at T and 2T intervals and report the
    distance between the predicted terminal states of the averaged
    strategies.  Surfaces the discretization error instead of hiding it.
    """
    ends = []
    for t_int in (T, 2 * T):
        game = discretize(spec, t_int, integrator=integrator)
        if method == "sda":
            cert, _ = sda_run(game, spec, gamma_step=kwargs.get("gamma_step", 1.0),
                              K=K, n_logs=1)
        else:
            cert, _ = dual_extrapolation_run(game, spec, K=K, n_logs=1)
        ends.append((game.x0_free + game.Bhat @ cert.u_hat.ravel(),
                     game.y0_free + game.Chat @ cert.v_hat.ravel()))
    (x1, y1), (x2, y2) = ends
    return float(np.linalg.norm(x1 - x2) + np.linalg.norm(y1 - y2))
