"""Primal-dual solvers for linearly constrained convex problems.

For min { f(x) : A x = b, x in Q } with gamma-strongly convex f, the dual

    phi(lambda) = <lambda, b> + max_{x in Q} ( -f(x) - <A^T lambda, x> )

is smooth with L <= ||A||^2 / gamma and grad phi(lambda) = b - A x(lambda).
Three solvers work on phi while reconstructing a primal solution from the
weighted average of the inner maximizers x(lambda_k):

* apdagd_run   -- accelerated gradient with adaptive backtracking on the
                  local smoothness constant M_k;
* apdsgm_run   -- accelerated stochastic gradient with minibatched dual
                  oracle under a per-iteration variance budget;
* pdugdsdr_run -- universal scheme whose only 1-D subproblems are exact
                  line searches, requiring no smoothness constants at all.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergedError,
    InvalidInputError,
    LineSearchError,
    NotConvergedError,
    OracleError,
)

__all__ = [
    "LinConstrainedProblem",
    "quadratic_problem",
    "dual_oracle",
    "dual_value",
    "apdagd_run",
    "apdsgm_run",
    "pdugdsdr_run",
]


# ---------------------------------------------------------------------------
# problems and dual oracle


@dataclass
class LinConstrainedProblem:
    """min { f(x) : A x = b, x in Q } accessed through its dual oracle.

    Parameters
    ----------
    f : callable
        Exact primal objective (used for stopping and traces).
    inner_solver : callable
        lambda -> x(lambda) = argmax_{x in Q} (-f(x) - <A^T lambda, x>).
    apply_A, apply_AT : callables
        The constraint operator and its adjoint (accepting 1-D arrays).
    b : ndarray
    gamma : float
        Strong convexity constant of f on Q.
    max_term : callable or None
        Optional stable evaluation of max_x (-f(x) - <A^T lambda, x>);
        defaults to plugging in x(lambda).
    stoch_x : callable or None
        Optional sampler (lambda, rng) -> one stochastic inner solution
        x(lambda, xi) for the stochastic solver.
    var_per_sample : float
        Bound on E||A x(lambda, xi) - A x(lambda)||_2^2 for one sample.
    """

    f: object
    inner_solver: object
    apply_A: object
    apply_AT: object
    b: np.ndarray
    gamma: float = 1.0
    max_term: object = None
    stoch_x: object = None
    var_per_sample: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")
        self.b = np.asarray(self.b, dtype=float)


def quadratic_problem(c, A, b, gamma=1.0):
    """f(x) = (gamma/2) ||x - c||_2^2 over Q = R^n with constraint Ax = b."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    return LinConstrainedProblem(
        f=lambda x: 0.5 * gamma * float(np.dot(x - c, x - c)),
        inner_solver=lambda lam: c - A.T @ lam / gamma,
        apply_A=lambda x: A @ x,
        apply_AT=lambda lam: A.T @ lam,
        b=b,
        gamma=gamma,
    )


def dual_value(problem, lam):
    """phi(lambda) without the gradient."""
    if problem.max_term is not None:
        mt = problem.max_term(lam)
        val = mt[0] if isinstance(mt, tuple) else mt
    else:
        x = problem.inner_solver(lam)
        val = -problem.f(x) - float(np.dot(problem.apply_AT(lam), x))
    out = float(np.dot(lam, problem.b)) + val
    if not np.isfinite(out):
        raise OracleError("non-finite dual value")
    return out


def dual_oracle(problem, lam):
    """Return (phi(lambda), grad phi(lambda), x(lambda))."""
    lam = np.asarray(lam, dtype=float)
    x = problem.inner_solver(lam)
    if problem.max_term is not None:
        mt = problem.max_term(lam)
        val = mt[0] if isinstance(mt, tuple) else mt
    else:
        val = -problem.f(x) - float(np.dot(problem.apply_AT(lam), x))
    phi = float(np.dot(lam, problem.b)) + val
    grad = problem.b - problem.apply_A(x)
    if not np.isfinite(phi) or not np.all(np.isfinite(grad)):
        raise OracleError("non-finite dual oracle output")
    return phi, np.asarray(grad, dtype=float), x


def _weak_duality_check(problem, xhat, eta, gap):
    # f(xhat) + phi(eta) >= -||eta|| * ||A xhat - b|| for xhat in Q
    res = float(np.linalg.norm(problem.apply_A(xhat) - problem.b))
    floor = -float(np.linalg.norm(eta)) * res
    if gap < floor - 1e-8 * (1.0 + abs(floor)):
        raise OracleError("weak-duality sandwich violated; inner solver inconsistent")


# ---------------------------------------------------------------------------
# APDAGD


def apdagd_run(problem, L0, eps_f, eps_eq, max_iter=10 ** 6, fixed_M=None,
               trace_every=1, max_doublings=60, stop_callback=None):
    """Adaptive primal-dual accelerated gradient descent.

    Line search multiplies the previous local constant by 2^(i_k - 1), so
    every outer iteration first tries half the previous M.  ``fixed_M``
    disables adaptivity (used by the zero-variance stochastic degeneracy).
    ``stop_callback(k, xhat, eta, gap, feas)`` replaces the default
    stopping test when given (truthy return stops the run).
    Returns (xhat, eta, trace); trace rows carry the duality gap
    f(xhat) + phi(eta), the feasibility residual, M_k and oracle calls.
    """
    if L0 <= 0:
        raise InvalidInputError("L0 must be positive")
    m = problem.b.size
    zeta = np.zeros(m)
    eta = np.zeros(m)
    beta = 0.0
    M = L0
    xhat = None
    calls = 0
    trace = []
    for k in range(max_iter):
        M_try = fixed_M if fixed_M is not None else M / 2.0
        for i in range(max_doublings + 1):
            alpha = (1.0 + math.sqrt(1.0 + 4.0 * M_try * beta)) / (2.0 * M_try)
            beta_new = beta + alpha
            tau = alpha / beta_new
            lam = tau * zeta + (1.0 - tau) * eta
            phi_lam, g_lam, x_lam = dual_oracle(problem, lam)
            zeta_new = zeta - alpha * g_lam
            eta_new = tau * zeta_new + (1.0 - tau) * eta
            phi_eta = dual_value(problem, eta_new)
            calls += 2
            d = eta_new - lam
            rhs = phi_lam + float(np.dot(g_lam, d)) + 0.5 * M_try * float(np.dot(d, d))
            if phi_eta <= rhs + 1e-12 * (1.0 + abs(rhs)) or fixed_M is not None:
                break
            M_try *= 2.0
        else:
            raise DivergedError("line search exceeded doubling cap", iteration=k)
        zeta, eta, beta, M = zeta_new, eta_new, beta_new, M_try
        xhat = x_lam if xhat is None else tau * x_lam + (1.0 - tau) * xhat
        fx = problem.f(xhat)
        gap = fx + phi_eta
        feas = float(np.linalg.norm(problem.apply_A(xhat) - problem.b))
        _weak_duality_check(problem, xhat, eta, gap)
        if stop_callback is not None:
            stop = bool(stop_callback(k + 1, xhat, eta, gap, feas))
        else:
            stop = gap <= eps_f and feas <= eps_eq
        if (k + 1) % trace_every == 0 or stop:
            trace.append({"k": k + 1, "dual": phi_eta, "primal": fx, "gap": gap,
                          "feas": feas, "M": M, "calls": calls})
        if stop:
            return xhat, eta, trace
    err = NotConvergedError("APDAGD hit the iteration cap",
                            residuals={"gap": gap, "feas": feas})
    err.trace = trace
    err.xhat = xhat
    raise err


# ---------------------------------------------------------------------------
# APDSGM


def apdsgm_run(problem, L, eps, N, rng, trace_every=1):
    """Accelerated primal-dual stochastic gradient method.

    The dual gradient at lambda_{k+1} is estimated by a minibatch of
    problem.stoch_x samples sized so that the per-iteration variance budget
    eps * L * alpha_k / C_k holds (given problem.var_per_sample); with
    var_per_sample = 0 it degenerates to the deterministic method with
    fixed constant 2L.
    """
    if L <= 0 or eps <= 0:
        raise InvalidInputError("need L > 0 and eps > 0")
    mdim = problem.b.size
    zeta = np.zeros(mdim)
    eta = np.zeros(mdim)
    C = 0.0
    xhat = None
    calls = 0
    trace = []
    for k in range(N):
        alpha = (1.0 + math.sqrt(1.0 + 8.0 * L * C)) / (4.0 * L)
        C_new = C + alpha
        tau = alpha / C_new
        lam = tau * zeta + (1.0 - tau) * eta
        if problem.var_per_sample > 0.0 and problem.stoch_x is not None:
            budget = eps * L * alpha / C_new
            batch = max(1, math.ceil(problem.var_per_sample / budget))
            xs = np.mean([problem.stoch_x(lam, rng) for _ in range(batch)], axis=0)
            calls += batch
        else:
            xs = problem.inner_solver(lam)
            calls += 1
        grad = problem.b - problem.apply_A(xs)
        if not np.all(np.isfinite(grad)):
            raise DivergedError("non-finite stochastic dual gradient", iteration=k)
        zeta = zeta - alpha * grad
        eta = tau * zeta + (1.0 - tau) * eta
        xhat = xs if xhat is None else tau * xs + (1.0 - tau) * xhat
        C = C_new
        if (k + 1) % trace_every == 0 or k + 1 == N:
            fx = problem.f(xhat)
            phi_eta = dual_value(problem, eta)
            feas = float(np.linalg.norm(problem.apply_A(xhat) - problem.b))
            trace.append({"k": k + 1, "dual": phi_eta, "primal": fx,
                          "gap": fx + phi_eta, "feas": feas, "alpha": alpha,
                          "C": C, "batch": calls, "calls": calls})
    return xhat, eta, trace


# ---------------------------------------------------------------------------
# PDUGDsDR


def _golden_section(fun, lo, hi, tol=1e-12, max_steps=80):
    """Exact-enough 1-D minimization of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_steps):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def _argmin_ray(fun, h0=1.0, max_expansions=80):
    """min over h >= 0 of a convex fun; brackets by doubling then refines."""
    f0 = fun(0.0)
    h = h0
    fh = fun(h)
    if fh >= f0:
        # minimum within [0, h]
        return _golden_section(fun, 0.0, h)
    for _ in range(max_expansions):
        h2 = 2.0 * h
        f2 = fun(h2)
        if f2 >= fh:
            return _golden_section(fun, 0.0, h2)
        h, fh = h2, f2
    raise LineSearchError("ray search failed to bracket a minimum")


def pdugdsdr_run(problem, eps_f, eps_eq, max_iter=10 ** 5, trace_every=1,
                 eps=None):
    """Primal-dual universal gradient method with exact line searches.

    Needs no Lipschitz or Hölder constants: all step sizes come from three
    exact one-dimensional minimizations per iteration and the quadratic
    equation for a_{k+1}.  ``eps`` is the inexactness slack in that
    equation (defaults to eps_f).  Returns (xhat, eta, trace).
    """
    m = problem.b.size
    zeta = np.zeros(m)
    eta = np.zeros(m)
    A = 0.0
    xhat = None
    calls = 0
    if eps is None:
        eps = eps_f
    trace = []
    for k in range(max_iter):
        # exact segment search for lambda^k between zeta^k and eta^k
        if A == 0.0:
            lam = zeta.copy()
        else:
            seg = eta - zeta
            bstar, _ = _golden_section(
                lambda t: dual_value(problem, zeta + t * seg), 0.0, 1.0)
            lam = zeta + bstar * seg
        phi_lam, g_lam, x_lam = dual_oracle(problem, lam)
        calls += 1
        # sign condition of the listing (holds automatically for exact search)
        if float(np.dot(g_lam, zeta - lam)) < -1e-6 * (1.0 + np.linalg.norm(g_lam)):
            raise LineSearchError("segment search violated the sign condition")
        g2 = float(np.dot(g_lam, g_lam))
        if g2 == 0.0:
            eta_new, phi_eta = lam, phi_lam
            a = 1.0 if A == 0.0 else A  # arbitrary positive weight at optimum
        else:
            hstar, phi_eta = _argmin_ray(
                lambda h: dual_value(problem, lam - h * g_lam),
                h0=1.0 / math.sqrt(g2))
            eta_new = lam - hstar * g_lam
            # a_{k+1} from phi(eta) = phi(lam) - a^2 g2 / (2 A_{k+1}) + eps a/(2 A_{k+1})
            drop = max(phi_lam - phi_eta, 0.0)
            half = drop + eps / 2.0
            a = (half + math.sqrt(half * half + 2.0 * g2 * drop * A)) / g2
        A_new = A + a
        zeta = zeta - a * g_lam
        xhat = x_lam if xhat is None else (a * x_lam + A * xhat) / A_new
        eta, A = eta_new, A_new
        fx = problem.f(xhat)
        phi_eta = dual_value(problem, eta)
        gap = fx + phi_eta
        feas = float(np.linalg.norm(problem.apply_A(xhat) - problem.b))
        _weak_duality_check(problem, xhat, eta, gap)
        if (k + 1) % trace_every == 0 or (abs(gap) <= eps_f and feas <= eps_eq):
            trace.append({"k": k + 1, "dual": phi_eta, "primal": fx,
                          "gap": gap, "feas": feas, "A": A, "a": a,
                          "calls": calls})
        if abs(gap) <= eps_f and feas <= eps_eq:
            return xhat, eta, trace
    err = NotConvergedError("PDUGDsDR hit the iteration cap",
                            residuals={"gap": gap, "feas": feas})
    err.trace = trace
    err.xhat = xhat
    raise err
