"""Inexact first-order, zero-order and directional-derivative oracles.

The central abstraction is the (delta, L) oracle: at a query point x it
returns a pair (f_val, g) such that for all y

    0 <= f(y) - f_val - <g, y - x> <= (L/2) ||y - x||^2 + delta.

Stochastic variants return an unbiased-up-to-delta gradient sample G with
E ||G - g||_*^2 <= sigma^2.  All randomness is drawn from numpy Generators
keyed by (seed, query_index), so two oracles with equal seeds replay the
same noise.
"""

import numpy as np

from .errors import InvalidInputError, OracleError

__all__ = [
    "DeltaLOracle",
    "StochasticDeltaLOracle",
    "ZeroOrderOracle",
    "DirDerivOracle",
    "sample_sphere",
    "gradient_free_estimate",
    "minibatch_dirderiv_grad",
]


class DeltaLOracle:
    """Deterministic (delta, L) oracle built from exact callables.

    Parameters
    ----------
    func, grad : callables
        Exact objective value and gradient.
    delta, L : float
        Declared inexactness and smoothness constants.
    bias : callable or None
        Optional additive perturbation of the reported value; must satisfy
        ``-delta <= bias(x) <= 0`` so the oracle pair stays admissible.
        Defaults to no perturbation.
    """

    def __init__(self, func, grad, L, delta=0.0, bias=None):
        if L <= 0:
            raise InvalidInputError("L must be positive")
        if delta < 0:
            raise InvalidInputError("delta must be nonnegative")
        self.func = func
        self.grad = grad
        self.L = float(L)
        self.delta = float(delta)
        self.bias = bias
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        f = float(self.func(x))
        g = np.asarray(self.grad(x), dtype=float)
        if self.bias is not None:
            b = float(self.bias(x))
            if b > 1e-12 or b < -self.delta - 1e-12:
                raise OracleError("bias outside [-delta, 0]")
            f += b
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise OracleError("oracle returned non-finite output")
        return f, g


class StochasticDeltaLOracle:
    """Stochastic (delta, L) oracle: adds zero-mean gradient noise with
    E ||G - g||_2^2 = sigma^2 (isotropic Gaussian, scaled by sigma/sqrt(n)).

    Noise is keyed by (seed, query index): replaying with the same seed
    reproduces the samples bit-for-bit.
    """

    def __init__(self, base, sigma, seed=0):
        if sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")
        self.base = base
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.calls = 0

    @property
    def delta(self):
        return self.base.delta

    @property
    def L(self):
        return self.base.L

    def __call__(self, x, batch=1):
        """Return (f, G) with G averaged over ``batch`` i.i.d. samples."""
        if batch < 1:
            raise InvalidInputError("batch must be >= 1")
        self.calls += batch
        f, g = self.base(x)
        if self.sigma == 0.0:
            return f, g
        rng = np.random.default_rng([self.seed, self.calls])
        n = g.size
        s = self.sigma / np.sqrt(n)
        noise = rng.normal(0.0, s, size=(batch, n)).mean(axis=0)
        return f, g + noise


class ZeroOrderOracle:
    """Function values with a bounded deterministic perturbation:
    returns f(x) + b(x) with |b(x)| <= delta.

    The default perturbation is delta * cos(<w, x>) for a fixed seed-keyed
    direction w, which is deterministic, adversarially non-smooth in scale,
    and exactly bounded.
    """

    def __init__(self, func, delta=0.0, bias=None, seed=0, dim=None):
        if delta < 0:
            raise InvalidInputError("delta must be nonnegative")
        self.func = func
        self.delta = float(delta)
        self.calls = 0
        if bias is not None:
            self._bias = bias
        elif delta == 0.0:
            self._bias = lambda x: 0.0
        else:
            if dim is None:
                raise InvalidInputError("dim required for the default bias")
            w = np.random.default_rng(seed).normal(size=dim) * 10.0
            self._bias = lambda x: self.delta * np.cos(float(np.dot(w, x)))

    def __call__(self, x):
        self.calls += 1
        v = float(self.func(x)) + float(self._bias(x))
        if abs(float(self._bias(x))) > self.delta + 1e-12:
            raise OracleError("bias exceeds delta")
        if not np.isfinite(v):
            raise OracleError("oracle returned non-finite value")
        return v


class DirDerivOracle:
    """Inexact directional derivative oracle.

    Returns  <g(x, xi), e> + zeta + eta  where

    * g(x, xi) = grad f(x) + gradient noise with E||.||_2^2 <= sigma^2,
    * zeta is stochastic with E zeta^2 <= Delta_zeta,
    * eta is bounded, |eta| <= Delta_eta almost surely.

    Queries are keyed by (seed, query index).
    """

    def __init__(self, grad, L2, sigma=0.0, Delta_zeta=0.0, Delta_eta=0.0, seed=0):
        for name, v in (("sigma", sigma), ("Delta_zeta", Delta_zeta),
                        ("Delta_eta", Delta_eta)):
            if v < 0:
                raise InvalidInputError(f"{name} must be nonnegative")
        if L2 <= 0:
            raise InvalidInputError("L2 must be positive")
        self.grad = grad
        self.L2 = float(L2)
        self.sigma = float(sigma)
        self.Delta_zeta = float(Delta_zeta)
        self.Delta_eta = float(Delta_eta)
        self.seed = int(seed)
        self.calls = 0

    def __call__(self, x, e):
        self.calls += 1
        g = np.asarray(self.grad(x), dtype=float)
        rng = np.random.default_rng([self.seed, self.calls])
        val = float(np.dot(g, e))
        if self.sigma > 0.0:
            noise = rng.normal(0.0, self.sigma / np.sqrt(g.size), size=g.size)
            val += float(np.dot(noise, e))
        if self.Delta_zeta > 0.0:
            val += rng.normal(0.0, np.sqrt(self.Delta_zeta))
        if self.Delta_eta > 0.0:
            val += self.Delta_eta * float(rng.uniform(-1.0, 1.0))
        return val


def sample_sphere(rng, n):
    """A point uniformly distributed on the unit sphere in R^n."""
    v = rng.normal(size=n)
    nrm = np.linalg.norm(v)
    while nrm == 0.0:          # pragma: no cover - probability zero
        v = rng.normal(size=n)
        nrm = np.linalg.norm(v)
    return v / nrm


def gradient_free_estimate(oracle, x, tau, e):
    """Two-point gradient estimate (n/tau) (f~(x + tau e) - f~(x)) e."""
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    n = x.size
    return (n / tau) * (oracle(x + tau * e) - oracle(x)) * e


def minibatch_dirderiv_grad(oracle, x, e, m=1):
    """Minibatched directional estimate (1/m) sum_i f~'(x, xi_i, e) * e."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    acc = 0.0
    for _ in range(m):
        acc += oracle(x, e)
    return (acc / m) * np.asarray(e, dtype=float)
