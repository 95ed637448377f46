"""Randomized directional-derivative methods.

Four solvers built on the inexact directional-derivative oracle
(:class:`accopt.oracles.DirDerivOracle`):

* ``ardd_run``  -- accelerated three-sequence scheme, O(1/N^2) rate;
* ``rdd_run``   -- plain mirror-descent scheme returning the averaged
  iterate, O(1/N) rate;
* ``arddsc_run`` / ``rddsc_run`` -- restart wrappers for mu-strongly
  convex objectives with a halving error schedule and growing batches.

Geometry is controlled by ``p`` in {1, 2}: p = 2 uses the Euclidean
prox-function, p = 1 the scaled squared kappa-norm (see
:func:`accopt.geometry.pnorm_setup`).  The gradient-style step on the y
sequence is always a plain Euclidean step; only the mirror step on the z
sequence carries the l1 geometry.

``select_params`` exposes the parameter rules that make the convergence
bounds smaller than a target accuracy.  The rules are stated up to
numerical constants; the constants used here (``_C_N = 20``, all others
1) were calibrated once on the quadratic testbed and then frozen.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedError, InvalidInputError
from .geometry import euclidean_setup, mirror_step, pnorm_setup
from .oracles import minibatch_dirderiv_grad, sample_sphere

__all__ = [
    "ArddConfig",
    "ardd_run",
    "rdd_run",
    "arddsc_run",
    "rddsc_run",
    "select_params",
]

# Frozen calibration constant for the iteration counts returned by
# select_params.  The parameter tables fix rates only up to constants;
# this value was tuned once on the quadratic testbed and is quoted by
# every table-derived test.
_C_N = 20.0


@dataclass
class ArddConfig:
    """Problem description shared by the four solvers.

    Parameters
    ----------
    p : int
        Geometry selector, 1 or 2.
    n : int
        Dimension.
    L2 : float
        Smoothness constant of f w.r.t. the Euclidean norm.
    sigma : float
        Gradient-sample variance bound.
    Delta_zeta, Delta_eta : float
        Stochastic (second moment) and bounded noise levels of the
        directional-derivative oracle.
    rho_n : float or None
        Proximal-setup constant entering the step sizes.  Defaults to 1
        for p = 2 and 16 ln(n)/n for p = 1; both defaults are
        implementation choices, exposed so callers can pin them.
    Theta_p : float or None
        Bound on V[x0](x*) for the chosen prox-function (used by
        select_params only).
    mu_p : float
        Strong convexity modulus w.r.t. the p-norm (sc variants).
    R_p : float
        Initial distance bound ||x0 - x*||_p <= R_p (sc variants).
    Omega_p : float or None
        Growth constant of the prox-function on the unit ball; defaults
        to 1 for p = 2 and e n^((kappa-1)(2-kappa)/kappa) ln n for p = 1.
    """

    p: int
    n: int
    L2: float
    sigma: float = 0.0
    Delta_zeta: float = 0.0
    Delta_eta: float = 0.0
    rho_n: float = None
    Theta_p: float = None
    mu_p: float = 0.0
    R_p: float = 0.0
    Omega_p: float = None

    def __post_init__(self):
        if self.p not in (1, 2):
            raise InvalidInputError("p must be 1 or 2")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if self.p == 1 and self.n < 3:
            raise InvalidInputError("p = 1 geometry needs n >= 3")
        if self.L2 <= 0:
            raise InvalidInputError("L2 must be positive")
        for name in ("sigma", "Delta_zeta", "Delta_eta", "mu_p", "R_p"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be nonnegative")
        if self.rho_n is None:
            self.rho_n = 1.0 if self.p == 2 else 16.0 * math.log(self.n) / self.n
        if self.rho_n <= 0:
            raise InvalidInputError("rho_n must be positive")
        if self.Omega_p is None:
            if self.p == 2:
                self.Omega_p = 1.0
            else:
                kappa = 1.0 + 1.0 / math.log(self.n)
                expo = (kappa - 1.0) * (2.0 - kappa) / kappa
                self.Omega_p = math.e * self.n ** expo * math.log(self.n)

    @property
    def q(self):
        """Conjugate exponent of p."""
        return 2.0 if self.p == 2 else math.inf

    def make_setup(self, center=None):
        if self.p == 2:
            return euclidean_setup(self.n, center=center)
        return pnorm_setup(self.n, center=center)


def _check_finite(x, k):
    if not np.all(np.isfinite(x)):
        raise DivergedError("iterate became non-finite", iterate=x, iteration=k)


def _gap(f, f_star, x):
    if f is None:
        return None
    v = float(f(x))
    return v - f_star if f_star is not None else v


def ardd_run(oracle, config, x0, N, m=1, rng=None, setup=None, f=None, f_star=None):
    """Accelerated randomized directional-derivative method.

    Runs N iterations of the three-sequence scheme

        x_{k+1} = tau_k z_k + (1 - tau_k) y_k,
        y_{k+1} = x_{k+1} - (1/(2 L2)) g_m,
        z_{k+1} = argmin  alpha_{k+1} n <g_m, z - z_k> + V[z_k](z),

    with alpha_{k+1} = (k+2)/(96 n^2 rho_n L2), tau_k = 2/(k+2) and g_m
    the batched directional estimate at x_{k+1}.

    Returns ``(y_N, trace)``; trace rows carry k, alpha, tau, cumulative
    oracle calls and -- when ``f`` is given -- the value gap at y_{k+1}.
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    if N < 0:
        raise InvalidInputError("N must be >= 0")
    rng = np.random.default_rng(rng)
    if setup is None:
        setup = config.make_setup(center=np.asarray(x0, float))
    n, L2, rho = config.n, config.L2, config.rho_n

    y = np.asarray(x0, dtype=float).copy()
    z = y.copy()
    trace = []
    calls = 0
    for k in range(N):
        alpha = (k + 2) / (96.0 * n ** 2 * rho * L2)
        tau = 2.0 / (k + 2)
        x = tau * z + (1.0 - tau) * y
        e = sample_sphere(rng, n)
        g = minibatch_dirderiv_grad(oracle, x, e, m)
        calls += m
        y = x - g / (2.0 * L2)
        z = mirror_step(setup, z, alpha * n * g, 1.0)
        _check_finite(y, k)
        _check_finite(z, k)
        trace.append({"k": k, "alpha": alpha, "tau": tau,
                      "gap": _gap(f, f_star, y), "calls": calls})
    return y, trace


def rdd_run(oracle, config, x0, N, m=1, rng=None, setup=None, f=None, f_star=None):
    """Non-accelerated randomized directional-derivative method.

    Performs mirror steps with the constant weight
    alpha = 1/(48 n rho_n L2) and returns the uniform average of
    x_0, ..., x_{N-1} together with a trace (gap is logged for the
    running average).
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    rng = np.random.default_rng(rng)
    if setup is None:
        setup = config.make_setup(center=np.asarray(x0, float))
    n, L2, rho = config.n, config.L2, config.rho_n
    alpha = 1.0 / (48.0 * n * rho * L2)

    x = np.asarray(x0, dtype=float).copy()
    acc = np.zeros_like(x)
    trace = []
    calls = 0
    for k in range(N):
        acc += x
        e = sample_sphere(rng, n)
        g = minibatch_dirderiv_grad(oracle, x, e, m)
        calls += m
        x = mirror_step(setup, x, alpha * n * g, 1.0)
        _check_finite(x, k)
        trace.append({"k": k, "alpha": alpha, "tau": None,
                      "gap": _gap(f, f_star, acc / (k + 1)), "calls": calls})
    return acc / N, trace


# ---------------------------------------------------------------------------
# restart versions for strongly convex objectives


def _sc_common(config):
    if config.mu_p <= 0:
        raise InvalidInputError("mu_p must be positive for the sc variants")
    if config.R_p <= 0:
        raise InvalidInputError("R_p must be positive for the sc variants")


def _restart_loop(inner, config, x0, K, rng, n0, m_rule, f, f_star):
    """Shared outer loop of the sc variants.

    The prox-function of stage k is R_k^2 d((x - u_k)/R_k); because d is
    a squared norm the radius scaling cancels and only the recentering
    at u_k survives.
    """
    rng = np.random.default_rng(rng)
    u = np.asarray(x0, dtype=float).copy()
    mu, R2 = config.mu_p, config.R_p ** 2
    trace = []
    calls = 0
    for k in range(K):
        m_k = m_rule(k)
        r_k2 = R2 * 2.0 ** (-k)
        setup = config.make_setup(center=u)
        u, _ = inner(config, u, n0, m_k, rng, setup)
        calls += n0 * m_k
        trace.append({"k": k, "N0": n0, "m_k": m_k, "R_k2": r_k2,
                      "gap": _gap(f, f_star, u), "calls": calls})
    return u, trace


def arddsc_run(oracle, config, x0, K, rng=None, f=None, f_star=None):
    """Restarted accelerated method for mu_p-strongly convex objectives.

    Each of the K stages runs ``ardd_run`` for N0 = ceil(sqrt(8 a L2
    Omega_p / mu_p)) iterations (a = 384 n^2 rho_n) from the previous
    stage's output, with batch m_k = max(1, ceil(32 sigma^2 N0 2^k /
    (n L2 mu_p R_p^2))).  Returns ``(u_K, trace)`` with one trace row per
    stage.
    """
    _sc_common(config)
    if K < 0:
        raise InvalidInputError("K must be >= 0")
    a = 384.0 * config.n ** 2 * config.rho_n
    n0 = math.ceil(math.sqrt(8.0 * a * config.L2 * config.Omega_p / config.mu_p))

    def m_rule(k):
        raw = 32.0 * config.sigma ** 2 * n0 * 2.0 ** k / (
            config.n * config.L2 * config.mu_p * config.R_p ** 2)
        return max(1, math.ceil(raw))

    def inner(cfg, u, steps, m_k, rng, setup):
        return ardd_run(oracle, cfg, u, steps, m_k, rng, setup=setup)

    return _restart_loop(inner, config, x0, K, rng, n0, m_rule, f, f_star)


def rddsc_run(oracle, config, x0, K, rng=None, f=None, f_star=None):
    """Restarted non-accelerated method for strongly convex objectives.

    N0 = ceil(8 a L2 Omega_p / mu_p) with a = 384 n rho_n and batch
    m_k = max(1, ceil(16 sigma^2 2^k / (L2 mu_p R_p^2))).  Each stage
    restarts from the averaged iterate of the previous one.
    """
    _sc_common(config)
    if K < 0:
        raise InvalidInputError("K must be >= 0")
    a = 384.0 * config.n * config.rho_n
    n0 = math.ceil(8.0 * a * config.L2 * config.Omega_p / config.mu_p)

    def m_rule(k):
        raw = 16.0 * config.sigma ** 2 * 2.0 ** k / (
            config.L2 * config.mu_p * config.R_p ** 2)
        return max(1, math.ceil(raw))

    def inner(cfg, u, steps, m_k, rng, setup):
        return rdd_run(oracle, cfg, u, steps, m_k, rng, setup=setup)

    return _restart_loop(inner, config, x0, K, rng, n0, m_rule, f, f_star)


# ---------------------------------------------------------------------------
# parameter selection tables


def select_params(goal_eps, config, variant):
    """Parameter rules achieving target accuracy ``goal_eps``.

    Returns a dict.  For "ardd"/"rdd": iteration count ``N``, batch size
    ``m``, admissible oracle noise levels ``Delta_zeta``/``Delta_eta``
    and the total call count ``calls`` = N * m.  For "arddsc"/"rddsc":
    stage count ``K``, inner length ``N0``, the stage batch rule ``m_k``
    (a callable) and the noise levels; ``calls`` sums N0 * m_k over the
    stages.

    The rules fix rates only up to constants; N carries the frozen
    calibration factor ``_C_N``, every other constant is 1.
    """
    if goal_eps <= 0:
        raise InvalidInputError("goal_eps must be positive")
    variant = variant.lower()
    n, L2, sigma, eps = config.n, config.L2, config.sigma, float(goal_eps)
    lg = math.log(n) if n > 1 else 1.0

    if variant in ("ardd", "rdd"):
        theta = config.Theta_p
        if theta is None or theta <= 0:
            raise InvalidInputError("Theta_p must be set for ardd/rdd rules")
        if variant == "ardd":
            if config.p == 2:
                n_raw = math.sqrt(n ** 2 * L2 * theta / eps)
                m_raw = sigma ** 2 * eps ** -1.5 * math.sqrt(theta / L2)
                dz = min(n ** 3 * L2 ** 2 * theta, eps ** 2 / (n * theta),
                         eps ** 1.5 / n * math.sqrt(L2 / theta))
                de = min(n ** 1.5 * L2 * math.sqrt(theta),
                         eps / math.sqrt(n * theta),
                         eps ** 0.75 / math.sqrt(n) * (L2 / theta) ** 0.25)
            else:
                n_raw = math.sqrt(n * lg * L2 * theta / eps)
                m_raw = math.sqrt(lg / n) * sigma ** 2 * eps ** -1.5 * math.sqrt(theta / L2)
                dz = min(n * lg ** 2 * L2 ** 2 * theta, eps ** 2 / (n * theta),
                         eps ** 1.5 / math.sqrt(n * lg) * math.sqrt(L2 / theta))
                de = min(math.sqrt(n) * lg * L2 * math.sqrt(theta),
                         eps / math.sqrt(n * theta),
                         eps ** 0.75 / (n * lg) ** 0.25 * (L2 / theta) ** 0.25)
        else:
            if config.p == 2:
                n_raw = n * L2 * theta / eps
                dz = min(n * L2 ** 2 * theta, eps ** 2 / (n * theta), eps * L2 / n)
                de = min(math.sqrt(n) * L2 * math.sqrt(theta),
                         eps / math.sqrt(n * theta), math.sqrt(eps * L2 / n))
            else:
                n_raw = L2 * theta * lg / eps
                dz = min(lg ** 2 / n * L2 ** 2 * theta, eps ** 2 / (n * theta),
                         eps * L2 / n)
                de = min(lg / math.sqrt(n) * L2 * math.sqrt(theta),
                         eps / math.sqrt(n * theta), math.sqrt(eps * L2 / n))
            m_raw = sigma ** 2 / (eps * L2)
        N = max(1, math.ceil(_C_N * n_raw))
        m = max(1, math.ceil(m_raw))
        return {"N": N, "m": m, "Delta_zeta": dz, "Delta_eta": de,
                "calls": N * m}

    if variant not in ("arddsc", "rddsc"):
        raise InvalidInputError(f"unknown variant {variant!r}")

    _sc_common(config)
    mu, R, omega = config.mu_p, config.R_p, config.Omega_p
    K = max(1, math.ceil(math.log2(max(mu * R ** 2 / eps, 2.0))))
    if variant == "arddsc":
        a = 384.0 * n ** 2 * config.rho_n
        n0 = math.ceil(math.sqrt(8.0 * a * L2 * omega / mu))
        if config.p == 2:
            dz = min(eps * math.sqrt(L2 * mu / (n ** 2 * omega)),
                     eps ** 2 * n ** 3 * L2 ** 2 * omega / (R ** 2 * mu ** 2),
                     eps * mu / (n * omega))
            de = min(math.sqrt(eps) * (L2 * mu / (n ** 2 * omega)) ** 0.25,
                     eps * n ** 1.5 * L2 * math.sqrt(omega) / (R * mu),
                     math.sqrt(eps * mu / (n * omega)))
        else:
            dz = min(eps * math.sqrt(L2 * mu / (n * lg * omega)),
                     eps ** 2 * n * lg ** 2 * L2 ** 2 * omega / (R ** 2 * mu ** 2),
                     eps * mu / (n * omega))
            de = min(math.sqrt(eps) * (L2 * mu / (n * lg * omega)) ** 0.25,
                     eps * math.sqrt(n) * lg * L2 * math.sqrt(omega) / (R * mu),
                     math.sqrt(eps * mu / (n * omega)))

        def m_k(k):
            raw = 32.0 * sigma ** 2 * n0 * 2.0 ** k / (n * L2 * mu * R ** 2)
            return max(1, math.ceil(raw))
    else:
        a = 384.0 * n * config.rho_n
        n0 = math.ceil(8.0 * a * L2 * omega / mu)
        if config.p == 2:
            dz = min(eps * L2 / n, eps ** 2 * n * L2 ** 2 / (R ** 2 * mu ** 2),
                     eps * mu / (n * omega))
            de = min(math.sqrt(eps * L2 / n),
                     eps * math.sqrt(n) * L2 / (R * mu),
                     math.sqrt(eps * mu / (n * omega)))
        else:
            dz = min(eps * L2 / n,
                     eps ** 2 * lg ** 2 * L2 ** 2 / (n * R ** 2 * mu ** 2),
                     eps * mu / (n * omega))
            de = min(math.sqrt(eps * L2 / n),
                     eps * lg * L2 / (math.sqrt(n) * R * mu),
                     math.sqrt(eps * mu / (n * omega)))

        def m_k(k):
            raw = 16.0 * sigma ** 2 * 2.0 ** k / (L2 * mu * R ** 2)
            return max(1, math.ceil(raw))

    calls = sum(n0 * m_k(k) for k in range(K))
    return {"K": K, "N0": n0, "m_k": m_k, "Delta_zeta": dz, "Delta_eta": de,
            "calls": calls}
