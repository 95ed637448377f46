"""Stochastic intermediate gradient method and its strongly convex restarts.

The base method minimizes phi = f + h over a closed convex set Q, where f is
equipped with a stochastic (delta, L) oracle and h is a simple composite term
(zero or an l1 penalty in the supported geometry combinations).  With the
canonical coefficient schedules the expected gap after k steps is bounded by

    C1 L R^2 / k^p  +  C2 sigma R / sqrt(k)  +  C3 k^(p-1) delta

with C1 = 4 sqrt(2), C2 = 16 sqrt(2), C3 = 48.  The parameter p in [1, 2]
interpolates between the robust dual-averaging regime (p = 1) and the fully
accelerated regime (p = 2).

Two restart variants for mu-strongly convex phi are provided: one with
guarantees in expectation, and one whose batch sizes depend on a confidence
level and whose inner runs are confined to shrinking balls.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedError, InvalidInputError
from .geometry import FeasibleSet, mirror_step

__all__ = [
    "C1", "C2", "C3", "C4",
    "SigmSchedule", "make_schedule",
    "CompositeProblem", "SigmRun",
    "sigm_run", "sigm_bound",
    "RestartConfig", "sigm_restart_run", "sigm_restart_confidence_run",
    "restart_bound",
]

C1 = 4.0 * math.sqrt(2.0)
C2 = 16.0 * math.sqrt(2.0)
C3 = 48.0
C4 = 4.0 * math.sqrt(3.0)


# ---------------------------------------------------------------------------
# coefficient schedules


@dataclass
class SigmSchedule:
    """Coefficient sequences alpha, beta, B, A, tau.

    alpha_i = (1/a) ((i+p)/p)^(p-1)
    beta_i  = L + (b sigma / R) (i+p+1)^((2p-1)/2)
    B_i     = a alpha_i^2
    A_k     = sum_{i<=k} alpha_i,   tau_i = alpha_{i+1} / B_{i+1}

    with a = 2^((2p-1)/2) and b = 2^((5-2p)/4) p^((1-2p)/2).
    """

    p: float
    L: float
    sigma: float
    R: float
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if not 1.0 <= self.p <= 2.0:
            raise InvalidInputError("p must lie in [1, 2]")
        if self.L <= 0 or self.R <= 0 or self.sigma < 0:
            raise InvalidInputError("need L > 0, R > 0, sigma >= 0")
        self.a = 2.0 ** ((2.0 * self.p - 1.0) / 2.0)
        self.b = 2.0 ** ((5.0 - 2.0 * self.p) / 4.0) * self.p ** ((1.0 - 2.0 * self.p) / 2.0)
        self._A = [self.alpha(0)]

    def alpha(self, i):
        return (1.0 / self.a) * ((i + self.p) / self.p) ** (self.p - 1.0)

    def beta(self, i):
        return self.L + (self.b * self.sigma / self.R) * (i + self.p + 1.0) ** ((2.0 * self.p - 1.0) / 2.0)

    def B(self, i):
        return self.a * self.alpha(i) ** 2

    def A(self, k):
        while len(self._A) <= k:
            self._A.append(self._A[-1] + self.alpha(len(self._A)))
        return self._A[k]

    def tau(self, i):
        return self.alpha(i + 1) / self.B(i + 1)

    def validate(self, n=10 ** 4):
        """Assert the admissibility conditions for indices < n.

        With sigma = 0 the canonical schedule sits on the boundary
        beta_i = L of the strict inequality, which the convergence proof
        tolerates as a limit case; we therefore check beta_i >= L.
        """
        a0 = self.alpha(0)
        if not (0.0 < a0 <= 1.0):
            raise InvalidInputError("alpha_0 outside (0, 1]")
        for i in range(n):
            ai, Bi, bi = self.alpha(i), self.B(i), self.beta(i)
            if not (0.0 <= ai <= Bi * (1 + 1e-12)):
                raise InvalidInputError(f"alpha_{i} > B_{i}")
            if bi < self.L - 1e-12 * self.L:
                raise InvalidInputError(f"beta_{i} < L")
            if i >= 1:
                bprev = self.beta(i - 1)
                if bi < bprev - 1e-12 * bprev:
                    raise InvalidInputError("beta not nondecreasing")
                if ai ** 2 * bi > Bi * bprev * (1 + 1e-9):
                    raise InvalidInputError(f"alpha_{i}^2 beta_{i} > B_{i} beta_{i-1}")
                if Bi > self.A(i) * (1 + 1e-9):
                    raise InvalidInputError(f"B_{i} > A_{i}")
            t = self.tau(i)
            if not (0.0 <= t <= 1.0 + 1e-12):
                raise InvalidInputError(f"tau_{i} outside [0, 1]")
        return True


def make_schedule(p, L, sigma, R):
    """Canonical schedule for given inexactness model; see SigmSchedule."""
    return SigmSchedule(p=float(p), L=float(L), sigma=float(sigma), R=float(R))


def sigm_bound(k, p, L, R, sigma=0.0, delta=0.0):
    """Theoretical expected-gap bound after k >= 1 iterations."""
    return C1 * L * R ** 2 / k ** p + C2 * sigma * R / math.sqrt(k) + C3 * k ** (p - 1.0) * delta


# ---------------------------------------------------------------------------
# the base method


@dataclass
class CompositeProblem:
    """min over Q of f(x) + l1_weight ||x||_1 with a stochastic (delta, L)
    value/gradient oracle for f.

    oracle : callable x -> (F, G).
    exact_f : optional exact objective for trace/gap reporting.
    """

    oracle: object
    setup: object
    feas: FeasibleSet = None
    l1_weight: float = 0.0
    exact_f: object = None
    f_star: float = None

    def __post_init__(self):
        if self.feas is None:
            self.feas = FeasibleSet("simplex" if self.setup.kind == "entropy" else "full")

    def phi(self, x):
        if self.exact_f is None:
            return None
        v = float(self.exact_f(x))
        if self.l1_weight:
            v += self.l1_weight * float(np.abs(x).sum())
        return v


@dataclass
class SigmRun:
    y: np.ndarray
    trace: list
    oracle_calls: int
    stages: list = field(default_factory=list)


def _query(oracle, x, batch):
    if batch == 1:
        return oracle(x)
    try:
        return oracle(x, batch=batch)
    except TypeError:
        fs, gs = zip(*(oracle(x) for _ in range(batch)))
        return float(np.mean(fs)), np.mean(gs, axis=0)


def sigm_run(problem, schedule, K, batch=1, prox_scale=1.0, trace_every=1,
             stage=0, check_feasible=True):
    """Run the intermediate gradient method for K iterations.

    ``prox_scale`` multiplies the distance generating function (the restart
    variants pass 1/R_k^2 to realize d((x - u_k)/R_k) for 2-homogeneous d).
    Returns a SigmRun whose trace rows carry (k, gap or objective if exact f
    is available, cumulative oracle calls, stage).
    """
    setup, feas = problem.setup, problem.feas
    sch = schedule
    x0 = setup.center if feas.kind == "full" else feas.project(setup.center)
    calls = 0

    def beta_eff(i):
        return sch.beta(i) * prox_scale

    def record(trace, k, y):
        v = problem.phi(y)
        gap = None if (v is None or problem.f_star is None) else v - problem.f_star
        trace.append({"k": k, "value": v, "gap": gap, "calls": calls, "stage": stage})

    _, G = _query(problem.oracle, x0, batch)
    calls += batch
    S = sch.alpha(0) * G          # running dual sum of alpha_i G_i
    y = mirror_step(setup, x0, S, beta_eff(0), feas,
                    l1_weight=sch.alpha(0) * problem.l1_weight)
    trace = []
    record(trace, 0, y)
    for k in range(K):
        z = mirror_step(setup, x0, S, beta_eff(k), feas,
                        l1_weight=sch.A(k) * problem.l1_weight)
        tau = sch.tau(k)
        x = tau * z + (1.0 - tau) * y
        _, G = _query(problem.oracle, x, batch)
        calls += batch
        a_next = sch.alpha(k + 1)
        xhat = mirror_step(setup, z, a_next * G, beta_eff(k), feas,
                           l1_weight=a_next * problem.l1_weight)
        w = tau * xhat + (1.0 - tau) * y
        A1, B1 = sch.A(k + 1), sch.B(k + 1)
        y = ((A1 - B1) / A1) * y + (B1 / A1) * w
        S = S + a_next * G
        if not np.all(np.isfinite(y)):
            raise DivergedError("non-finite iterate", iterate=y, iteration=k + 1)
        if check_feasible and not feas.contains(y, tol=1e-8):
            raise DivergedError("iterate left the feasible set", iterate=y,
                                iteration=k + 1)
        if (k + 1) % trace_every == 0 or k + 1 == K:
            record(trace, k + 1, y)
    return SigmRun(y=y, trace=trace, oracle_calls=calls)


# ---------------------------------------------------------------------------
# restarts for strongly convex problems


@dataclass
class RestartConfig:
    """Parameters of the strongly convex restart schemes."""

    mu: float
    R0: float
    L: float
    sigma: float = 0.0
    delta: float = 0.0
    p: float = 2.0
    V: float = 1.0
    Lambda: float = None       # confidence level; second variant only
    target_eps: float = None   # optional, used for the delta admissibility warning

    def __post_init__(self):
        if self.mu <= 0 or self.R0 <= 0 or self.L <= 0:
            raise InvalidInputError("need mu, R0, L > 0")
        if not 1.0 <= self.p <= 2.0:
            raise InvalidInputError("p must lie in [1, 2]")


def _delta_admissible(cfg, inner_factor):
    """Largest oracle bias for which the restart scheme can still reach
    cfg.target_eps (inner_factor = 4e or 6e for the two variants)."""
    lead = inner_factor * C1 * cfg.L * cfg.V ** 2 / cfg.mu
    return (cfg.target_eps * (math.e - 1.0) / (2.0 ** cfg.p * C3 * math.e)
            * lead ** ((1.0 - cfg.p) / cfg.p))


def restart_bound(k, cfg, inner_factor=4.0 * math.e):
    """Bound on E ||u_k - x*||^2 after k outer stages."""
    lead = inner_factor * C1 * cfg.L * cfg.V ** 2 / cfg.mu
    dterm = (C3 * math.e * 2.0 ** cfg.p * cfg.delta / (cfg.mu * (math.e - 1.0))
             * lead ** ((cfg.p - 1.0) / cfg.p))
    return cfg.R0 ** 2 * math.exp(-k) + dterm * (1.0 - math.exp(-k))


def _restart_stages(problem, cfg, outer_N, confidence=False, N_outer_total=None):
    """Shared staging loop of the two restart schemes."""
    if problem.setup.kind == "entropy":
        raise InvalidInputError("restarts need a recenterable (2-homogeneous) setup")
    inner = 6.0 * math.e if confidence else 4.0 * math.e
    Nk = math.ceil((inner * C1 * cfg.L * cfg.V ** 2 / cfg.mu) ** (1.0 / cfg.p))
    u = np.asarray(problem.setup.center, dtype=float).copy()
    trace, total_calls = [], 0
    if cfg.target_eps is not None and cfg.delta > _delta_admissible(cfg, inner):
        trace.append({"k": -1, "warning": "delta exceeds the admissible restart bound",
                      "calls": 0, "stage": -1})
    for k in range(outer_N):
        if confidence:
            lg = math.log(3.0 * N_outer_total / cfg.Lambda)
            m1 = 36.0 * math.e ** (k + 2) * C2 ** 2 * cfg.sigma ** 2 * cfg.V ** 2 \
                * (1.0 + lg) ** 2 / (cfg.mu ** 2 * cfg.R0 ** 2 * Nk)
            m2 = 144.0 * math.e ** (k + 2) * C4 ** 2 * cfg.sigma ** 2 * lg \
                / (cfg.mu ** 2 * cfg.R0 ** 2 * Nk)
            mk = max(1, math.ceil(m1), math.ceil(m2))
        else:
            mk = max(1, math.ceil(16.0 * math.e ** (k + 2) * C2 ** 2 * cfg.sigma ** 2
                                  * cfg.V ** 2 / (cfg.mu ** 2 * cfg.R0 ** 2 * Nk)))
        lead = inner * C1 * cfg.L * cfg.V ** 2 / cfg.mu
        Rk2 = cfg.R0 ** 2 * math.exp(-k) + \
            (2.0 ** cfg.p * math.e * C3 * cfg.delta / (cfg.mu * (math.e - 1.0))) \
            * lead ** ((cfg.p - 1.0) / cfg.p) * (1.0 - math.exp(-k))
        setup_k = problem.setup.recenter(u)
        feas_k = problem.feas
        if confidence:
            if problem.feas.kind != "full":
                raise InvalidInputError(
                    "confidence restarts implemented over the full space")
            feas_k = FeasibleSet("ball", center=u.copy(), radius=math.sqrt(Rk2))
        sub = CompositeProblem(oracle=problem.oracle, setup=setup_k, feas=feas_k,
                               l1_weight=problem.l1_weight,
                               exact_f=problem.exact_f, f_star=problem.f_star)
        sch = make_schedule(cfg.p, cfg.L, cfg.sigma / math.sqrt(mk), cfg.V)
        run = sigm_run(sub, sch, Nk, batch=mk, prox_scale=1.0 / Rk2, stage=k,
                       trace_every=max(1, Nk))
        u = run.y
        total_calls += run.oracle_calls
        trace.append({"k": k + 1, "value": problem.phi(u),
                      "gap": None if problem.f_star is None or problem.phi(u) is None
                      else problem.phi(u) - problem.f_star,
                      "calls": total_calls, "stage": k, "m_k": mk, "N_k": Nk,
                      "R_k2": Rk2})
    return SigmRun(y=u, trace=trace, oracle_calls=total_calls)


def sigm_restart_run(problem, cfg, outer_N):
    """Restart scheme with expectation guarantees: after k stages,
    E ||u_k - x*||^2 <= R0^2 e^(-k) + O(delta)."""
    if outer_N == 0:
        return SigmRun(y=np.asarray(problem.setup.center, float).copy(),
                       trace=[], oracle_calls=0)
    return _restart_stages(problem, cfg, outer_N, confidence=False)


def sigm_restart_confidence_run(problem, cfg, outer_N, Lambda=None):
    """Restart scheme with a large-deviation guarantee at confidence Lambda;
    inner runs are confined to the shrinking balls around u_k."""
    if Lambda is not None:
        cfg.Lambda = Lambda
    if cfg.Lambda is None or cfg.Lambda <= 0:
        raise InvalidInputError("confidence level Lambda > 0 required")
    if outer_N == 0:
        return SigmRun(y=np.asarray(problem.setup.center, float).copy(),
                       trace=[], oracle_calls=0)
    return _restart_stages(problem, cfg, outer_N, confidence=True,
                           N_outer_total=outer_N)
