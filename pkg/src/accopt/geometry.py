"""Proximal setups, Bregman divergences and mirror steps.

Supported geometries:

* ``euclidean`` -- d(x) = ||x - c||_2^2 / 2, squared 2-norm distance to a
  prox-center ``c``.  Works over the full space, the simplex and Euclidean
  balls.
* ``entropy`` -- negative-entropy distance generating function on the
  probability simplex, d(x) = ln n + sum_i x_i ln x_i, 1-strongly convex
  with respect to ||.||_1.
* ``pnorm`` -- scaled squared kappa-norm with kappa = 1 + 1/ln n,
  d(x) = (a/2) ||x - c||_kappa^2 with a = e n^((kappa-1)(2-kappa)/kappa) ln n,
  also 1-strongly convex with respect to ||.||_1 but defined on the whole
  space.  Mirror steps are available over the full space only.

All mirror steps solve

    argmin_{x in Q}  <g, x> + beta * V[z](x) + w * ||x||_1

where ``V[z]`` is the Bregman divergence of the setup's d.  The l1 term is
only supported for the euclidean full-space combination (soft threshold).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInputError, UnsupportedCombinationError

__all__ = [
    "FeasibleSet",
    "ProxSetup",
    "euclidean_setup",
    "entropy_setup",
    "pnorm_setup",
    "project_simplex",
    "project_ball",
    "mirror_step",
]


# ---------------------------------------------------------------------------
# feasible sets and projections


@dataclass(frozen=True)
class FeasibleSet:
    """Descriptor of a feasible set: the full space, the standard simplex
    or a Euclidean ball of given center and radius."""

    kind: str = "full"           # "full" | "simplex" | "ball"
    center: np.ndarray | None = None
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("full", "simplex", "ball"):
            raise InvalidInputError(f"unknown feasible set kind {self.kind!r}")
        if self.kind == "ball" and self.radius <= 0:
            raise InvalidInputError("ball radius must be positive")

    def contains(self, x, tol=1e-9):
        if self.kind == "full":
            return bool(np.all(np.isfinite(x)))
        if self.kind == "simplex":
            return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= max(tol, 1e-12 * x.size))
        c = 0.0 if self.center is None else self.center
        return bool(np.linalg.norm(x - c) <= self.radius + tol)

    def project(self, x):
        if self.kind == "full":
            return np.asarray(x, dtype=float)
        if self.kind == "simplex":
            return project_simplex(x)
        c = 0.0 if self.center is None else self.center
        return c + project_ball(x - c, self.radius)


def project_simplex(v):
    """Euclidean projection of ``v`` onto the standard simplex.

    Standard sort-based algorithm; O(n log n).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError("project_simplex expects a vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_ball(v, radius=1.0):
    """Euclidean projection onto the centered 2-norm ball of given radius."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= radius:
        return v.copy()
    return v * (radius / nrm)


# ---------------------------------------------------------------------------
# proximal setups

_ENTROPY_FLOOR = 1e-300


@dataclass
class ProxSetup:
    """A distance generating function together with its norm.

    Attributes
    ----------
    kind : str
        "euclidean", "entropy" or "pnorm".
    dim : int
        Ambient dimension.
    center : ndarray
        Prox-center (the minimizer of d).  For the entropy setup this is
        fixed to the uniform distribution.
    scale : float
        Multiplier ``a`` in d(x) = (a/2)||x - c||_kappa^2 for the pnorm
        setup; 1.0 otherwise.
    kappa : float
        Norm exponent of the pnorm setup (1 < kappa <= 2).
    """

    kind: str
    dim: int
    center: np.ndarray = field(default=None)
    scale: float = 1.0
    kappa: float = 2.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "entropy", "pnorm"):
            raise InvalidInputError(f"unknown prox setup kind {self.kind!r}")
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        if self.center is None:
            if self.kind == "entropy":
                self.center = np.full(self.dim, 1.0 / self.dim)
            else:
                self.center = np.zeros(self.dim)
        self.center = np.asarray(self.center, dtype=float)

    # -- norms --------------------------------------------------------

    @property
    def norm_tag(self):
        return "l2" if self.kind == "euclidean" else "l1"

    def norm(self, x):
        """Norm with respect to which d is 1-strongly convex."""
        if self.kind == "euclidean":
            return float(np.linalg.norm(x))
        return float(np.abs(x).sum())

    def dual_norm(self, s):
        if self.kind == "euclidean":
            return float(np.linalg.norm(s))
        return float(np.abs(s).max())

    # -- distance generating function ---------------------------------

    def d(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return 0.5 * float(np.dot(x - self.center, x - self.center))
        if self.kind == "entropy":
            xp = np.maximum(x, _ENTROPY_FLOOR)
            return float(math.log(self.dim) + np.dot(x, np.log(xp)))
        u = x - self.center
        return 0.5 * self.scale * _pnorm(u, self.kappa) ** 2

    def grad_d(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return x - self.center
        if self.kind == "entropy":
            return 1.0 + np.log(np.maximum(x, _ENTROPY_FLOOR))
        u = x - self.center
        nrm = _pnorm(u, self.kappa)
        if nrm == 0.0:
            return np.zeros_like(u)
        return self.scale * nrm ** (2.0 - self.kappa) * np.sign(u) * np.abs(u) ** (self.kappa - 1.0)

    def bregman(self, x, z):
        """V[z](x) = d(x) - d(z) - <grad d(z), x - z>."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "entropy":
            # KL divergence; handle zeros of x gracefully.
            zp = np.maximum(z, _ENTROPY_FLOOR)
            xp = np.maximum(x, _ENTROPY_FLOOR)
            return float(np.dot(x, np.log(xp) - np.log(zp)) + z.sum() - x.sum())
        return float(self.d(x) - self.d(z) - np.dot(self.grad_d(z), x - z))

    def recenter(self, u):
        """A copy of the setup with prox-center moved to ``u``."""
        if self.kind == "entropy":
            raise UnsupportedCombinationError("entropy setup cannot be recentered")
        return ProxSetup(self.kind, self.dim, center=np.asarray(u, float),
                         scale=self.scale, kappa=self.kappa)

    def grad_d_inverse(self, s):
        """Solve grad d(x) = s for x (euclidean and pnorm setups)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "euclidean":
            return self.center + s
        if self.kind == "pnorm":
            # inverse via the conjugate: x - c = grad d*(s) with
            # d*(s) = ||s||_{kappa*}^2 / (2 a), kappa* = kappa/(kappa-1)
            ks = self.kappa / (self.kappa - 1.0)
            nrm = _pnorm(s, ks)
            if nrm == 0.0:
                return self.center.copy()
            u = (nrm ** (2.0 - ks) / self.scale) * np.sign(s) * np.abs(s) ** (ks - 1.0)
            return self.center + u
        raise UnsupportedCombinationError("no gradient inverse for entropy setup")


def _pnorm(x, p):
    a = np.abs(x)
    m = a.max(initial=0.0)
    if m == 0.0:
        return 0.0
    return float(m * ((a / m) ** p).sum() ** (1.0 / p))


def euclidean_setup(dim, center=None):
    return ProxSetup("euclidean", dim, center=center)


def entropy_setup(dim):
    return ProxSetup("entropy", dim)


def pnorm_setup(dim, center=None):
    """The l1-friendly setup on R^n: kappa = 1 + 1/ln n and
    a = e n^((kappa-1)(2-kappa)/kappa) ln n."""
    if dim < 3:
        raise InvalidInputError("pnorm setup needs dim >= 3 (ln n > 1)")
    kappa = 1.0 + 1.0 / math.log(dim)
    expo = (kappa - 1.0) * (2.0 - kappa) / kappa
    scale = math.e * dim ** expo * math.log(dim)
    return ProxSetup("pnorm", dim, center=center, scale=scale, kappa=kappa)


# ---------------------------------------------------------------------------
# mirror steps


def mirror_step(setup, z, g, beta, feas=None, l1_weight=0.0):
    """argmin_{x in Q} <g, x> + beta * V[z](x) + l1_weight * ||x||_1.

    Parameters
    ----------
    setup : ProxSetup
    z : ndarray
        Current point (the Bregman center of the step).
    g : ndarray
        Dual vector (scaled gradient, or a running weighted sum).
    beta : float
        Positive step scaling.
    feas : FeasibleSet or None
        Defaults to the full space for euclidean/pnorm and the simplex for
        entropy.
    l1_weight : float
        Weight of an additive l1 term; euclidean full-space only.
    """
    if beta <= 0 or not np.isfinite(beta):
        raise InvalidInputError("beta must be positive and finite")
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if z.shape != g.shape:
        raise InvalidInputError("z and g must have the same shape")
    if feas is None:
        feas = FeasibleSet("simplex" if setup.kind == "entropy" else "full")

    if setup.kind == "euclidean":
        y = z - g / beta
        if l1_weight > 0.0:
            if feas.kind != "full":
                raise UnsupportedCombinationError(
                    "l1 composite term only supported over the full space")
            return _soft_threshold(y, l1_weight / beta)
        if feas.kind == "full":
            return y
        return feas.project(y)

    if setup.kind == "entropy":
        if feas.kind != "simplex":
            raise UnsupportedCombinationError(
                "entropy setup only supports the simplex")
        if l1_weight > 0.0:
            raise UnsupportedCombinationError(
                "l1 composite term not supported on the simplex")
        logits = np.log(np.maximum(z, _ENTROPY_FLOOR)) - g / beta
        return np.exp(logits - logsumexp(logits))

    # pnorm
    if feas.kind != "full" or l1_weight > 0.0:
        raise UnsupportedCombinationError(
            "pnorm setup only supports plain full-space steps")
    return setup.grad_d_inverse(setup.grad_d(z) - g / beta)


def _soft_threshold(y, t):
    return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)
