import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accopt.errors import InvalidInputError, UnsupportedCombinationError
from accopt.geometry import (
    FeasibleSet,
    entropy_setup,
    euclidean_setup,
    mirror_step,
    pnorm_setup,
    project_ball,
    project_simplex,
)


def random_simplex(rng, n):
    x = rng.exponential(size=n)
    return x / x.sum()


# ---------------------------------------------------------------------------
# projections


def test_project_simplex_variational_inequality():
    # optimality oracle: p is the projection of v iff <v - p, x - p> <= 0
    # for every x in the simplex; checking all vertices suffices.
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.integers(2, 12)
        v = rng.normal(size=n) * rng.uniform(0.1, 10)
        p = project_simplex(v)
        assert p.min() >= 0 and abs(p.sum() - 1) < 1e-12
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            assert np.dot(v - p, e - p) <= 1e-9


def test_project_simplex_fixed_point():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = random_simplex(rng, 6)
        assert np.allclose(project_simplex(x), x, atol=1e-12)


def test_project_ball():
    assert np.allclose(project_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    v = np.array([0.3, 0.1])
    assert np.allclose(project_ball(v, 1.0), v)


# ---------------------------------------------------------------------------
# Bregman divergences


def test_entropy_bregman_is_kl():
    rng = np.random.default_rng(2)
    s = entropy_setup(5)
    for _ in range(25):
        x = random_simplex(rng, 5)
        z = random_simplex(rng, 5)
        kl = float(np.sum(x * np.log(x / z)))
        assert s.bregman(x, z) == pytest.approx(kl, abs=1e-10)


def test_entropy_d_zero_at_center():
    s = entropy_setup(7)
    assert s.d(s.center) == pytest.approx(0.0, abs=1e-12)
    assert s.bregman(s.center, s.center) == pytest.approx(0.0, abs=1e-14)


def test_three_point_identity():
    # V[z](x) - V[w](x) - V[z](w) = <grad d(w) - grad d(z), x - w>
    rng = np.random.default_rng(3)
    for setup, sampler in [
        (entropy_setup(6), lambda: random_simplex(rng, 6)),
        (euclidean_setup(6), lambda: rng.normal(size=6)),
        (pnorm_setup(6), lambda: rng.normal(size=6)),
    ]:
        for _ in range(10):
            x, z, w = sampler(), sampler(), sampler()
            lhs = setup.bregman(x, z) - setup.bregman(x, w) - setup.bregman(w, z)
            rhs = np.dot(setup.grad_d(w) - setup.grad_d(z), x - w)
            assert lhs == pytest.approx(rhs, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=8),
       st.lists(st.floats(-5, 5), min_size=3, max_size=8))
def test_bregman_nonnegative_property(xs, zs):
    n = min(len(xs), len(zs))
    x, z = np.array(xs[:n]), np.array(zs[:n])
    for setup in (euclidean_setup(n),) + ((pnorm_setup(n),) if n >= 3 else ()):
        assert setup.bregman(x, z) >= -1e-9


def test_pnorm_strong_convexity_vs_l1():
    # 1-strong convexity w.r.t. ||.||_1: V[z](x) >= ||x - z||_1^2 / 2
    rng = np.random.default_rng(4)
    for n in (5, 20, 100):
        s = pnorm_setup(n)
        for _ in range(20):
            x = rng.normal(size=n)
            z = rng.normal(size=n)
            assert s.bregman(x, z) >= 0.5 * np.abs(x - z).sum() ** 2 * (1 - 1e-9)


def test_entropy_strong_convexity_vs_l1():
    rng = np.random.default_rng(5)
    s = entropy_setup(8)
    for _ in range(30):
        x = random_simplex(rng, 8)
        z = random_simplex(rng, 8)
        assert s.bregman(x, z) >= 0.5 * np.abs(x - z).sum() ** 2 * (1 - 1e-9)


def test_pnorm_constants():
    n = 50
    s = pnorm_setup(n)
    kappa = 1 + 1 / math.log(n)
    assert s.kappa == pytest.approx(kappa)
    assert s.scale == pytest.approx(
        math.e * n ** ((kappa - 1) * (2 - kappa) / kappa) * math.log(n))


# ---------------------------------------------------------------------------
# mirror steps


def grid_search_simplex(obj, n, m=120):
    """Independent oracle: dense random search over the simplex, refined by
    local perturbations around the incumbent."""
    rng = np.random.default_rng(99)
    best, best_v = None, np.inf
    pts = [random_simplex(rng, n) for _ in range(m)]
    pts.append(np.full(n, 1.0 / n))
    for _ in range(60):
        for p in pts:
            v = obj(p)
            if v < best_v:
                best, best_v = p, v
        pts = [project_simplex(best + rng.normal(size=n) * 0.05) for _ in range(m)]
    return best, best_v


def test_entropy_mirror_step_against_grid_search():
    rng = np.random.default_rng(6)
    n = 4
    s = entropy_setup(n)
    for _ in range(3):
        z = random_simplex(rng, n)
        g = rng.normal(size=n)
        beta = rng.uniform(0.5, 3.0)
        x = mirror_step(s, z, g, beta)
        obj = lambda p: np.dot(g, p) + beta * s.bregman(p, z)
        _, v = grid_search_simplex(obj, n)
        assert obj(x) <= v + 1e-6
        assert FeasibleSet("simplex").contains(x)


def test_entropy_mirror_step_closed_form():
    rng = np.random.default_rng(7)
    n = 9
    s = entropy_setup(n)
    z = random_simplex(rng, n)
    g = rng.normal(size=n) * 5
    x = mirror_step(s, z, g, 2.0)
    w = z * np.exp(-g / 2.0)
    assert np.allclose(x, w / w.sum(), atol=1e-12)


def test_entropy_mirror_step_log_domain_stable():
    # huge dual vectors must not overflow
    n = 6
    s = entropy_setup(n)
    z = np.full(n, 1 / n)
    g = np.array([1e6, -1e6, 0.0, 3.0, -2.0, 1e5])
    x = mirror_step(s, z, g, 1.0)
    assert np.all(np.isfinite(x)) and abs(x.sum() - 1) < 1e-9
    assert x[1] == pytest.approx(1.0)


def test_euclidean_mirror_steps():
    rng = np.random.default_rng(8)
    n = 5
    s = euclidean_setup(n)
    z = rng.normal(size=n)
    g = rng.normal(size=n)
    assert np.allclose(mirror_step(s, z, g, 2.0), z - g / 2.0)
    x = mirror_step(s, z, g, 2.0, FeasibleSet("simplex"))
    assert np.allclose(x, project_simplex(z - g / 2.0))
    x = mirror_step(s, z, g, 2.0, FeasibleSet("ball", radius=0.5))
    assert np.linalg.norm(x) <= 0.5 + 1e-12


def test_euclidean_l1_composite_step_soft_threshold():
    # argmin <g,x> + (beta/2)||x-z||^2 + w||x||_1, verified against a
    # coordinate-wise scalar grid oracle.
    rng = np.random.default_rng(9)
    n = 6
    s = euclidean_setup(n)
    z = rng.normal(size=n)
    g = rng.normal(size=n)
    beta, w = 1.7, 0.6
    x = mirror_step(s, z, g, beta, l1_weight=w)
    grid = np.linspace(-5, 5, 200001)
    for i in range(n):
        vals = g[i] * grid + 0.5 * beta * (grid - z[i]) ** 2 + w * np.abs(grid)
        assert x[i] == pytest.approx(grid[np.argmin(vals)], abs=1e-4)


def test_pnorm_mirror_step_roundtrip():
    # mirror step followed by the forward gradient map recovers the dual
    # target within 1e-6
    rng = np.random.default_rng(10)
    for n in (5, 40):
        s = pnorm_setup(n)
        for _ in range(10):
            z = rng.normal(size=n)
            g = rng.normal(size=n)
            beta = rng.uniform(0.3, 4.0)
            x = mirror_step(s, z, g, beta)
            target = s.grad_d(z) - g / beta
            assert np.linalg.norm(s.grad_d(x) - target) <= 1e-6 * max(
                1.0, np.linalg.norm(target))


def test_pnorm_inverse_norm_via_scalar_bisection():
    # independent scalar route: ||grad d(x)||_{kappa*} = a ||x||_kappa, so
    # the primal norm solves a monotone scalar equation; bisection on it
    # must agree with the closed-form inverse.
    n = 12
    s = pnorm_setup(n)
    rng = np.random.default_rng(11)
    sdual = rng.normal(size=n)
    x = s.grad_d_inverse(sdual)
    ks = s.kappa / (s.kappa - 1)
    snorm = np.sum(np.abs(sdual) ** ks) ** (1 / ks)
    lo, hi = 0.0, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if s.scale * mid < snorm:
            lo = mid
        else:
            hi = mid
    xnorm = np.sum(np.abs(x) ** s.kappa) ** (1 / s.kappa)
    assert xnorm == pytest.approx(0.5 * (lo + hi), rel=1e-6)


def test_unsupported_combinations_raise():
    s = entropy_setup(4)
    with pytest.raises(UnsupportedCombinationError):
        mirror_step(s, np.full(4, 0.25), np.zeros(4), 1.0, FeasibleSet("full"))
    sp = pnorm_setup(4)
    with pytest.raises(UnsupportedCombinationError):
        mirror_step(sp, np.zeros(4), np.zeros(4), 1.0, FeasibleSet("simplex"))
    with pytest.raises(InvalidInputError):
        mirror_step(euclidean_setup(3), np.zeros(3), np.zeros(3), 0.0)
    with pytest.raises(InvalidInputError):
        FeasibleSet("ball", radius=-1.0)
    with pytest.raises(InvalidInputError):
        euclidean_setup(0)


def test_recenter():
    s = euclidean_setup(3).recenter(np.array([1.0, 2.0, 3.0]))
    assert s.d(np.array([1.0, 2.0, 3.0])) == 0.0
    with pytest.raises(UnsupportedCombinationError):
        entropy_setup(3).recenter(np.zeros(3))
