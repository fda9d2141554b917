import numpy as np
import pytest

from aircomp.optim import (
    BisectionSettings,
    EllipsoidSettings,
    IterationLimitError,
    NoRootError,
    NonMonotoneError,
    bisect_decreasing,
    bisect_decreasing_batch,
    ellipsoid_maximize,
)


def test_bisect_hyperbola():
    x = bisect_decreasing(lambda t: 1.0 / (1.0 + t), 0.5)
    assert x == pytest.approx(1.0, abs=1e-9)


def test_bisect_boundary_root():
    assert bisect_decreasing(lambda t: np.exp(-t), 1.0) == 0.0


def test_bisect_target_above_range():
    with pytest.raises(NoRootError):
        bisect_decreasing(lambda t: 1.0 / (1.0 + t), 2.0)


def test_bisect_target_below_infimum():
    with pytest.raises(NoRootError):
        bisect_decreasing(lambda t: 1.0 + 1.0 / (1.0 + t), 0.5)


def test_bisect_detects_increasing_function():
    with pytest.raises(NonMonotoneError):
        bisect_decreasing(lambda t: 1.0 + t, 0.5)


def test_bisect_residual_contract(rng):
    settings = BisectionSettings()
    for _ in range(25):
        a = rng.uniform(0.2, 3.0)
        c = rng.uniform(0.1, 5.0)
        f = lambda t: c / (a + t) ** 2
        target = rng.uniform(f(50.0), f(0.0))
        x = bisect_decreasing(f, target, settings)
        assert x >= 0
        # either the value matched or the bracket collapsed; both imply a
        # residual at the curvature-times-width scale
        assert abs(f(x) - target) <= 1e-8 * max(1.0, target)


def test_bisect_batch_brackets(rng):
    a = rng.uniform(0.5, 2.0, 8)
    target = rng.uniform(0.05, 0.9, 8)
    lo, hi = bisect_decreasing_batch(lambda x: 1.0 / (1.0 + a * x), target, iters=80)
    root = (1.0 / target - 1.0) / a
    assert np.all(lo <= root + 1e-9)
    assert np.all(hi >= root - 1e-9)
    assert np.all(hi - lo <= 1e-9 * np.maximum(1.0, root))


def test_ellipsoid_smooth_quadratic_1d():
    settings = EllipsoidSettings(stop_norm=1e-14)
    res = ellipsoid_maximize(lambda m: (-(m[0] - 1.0) ** 2, np.array([-2 * (m[0] - 1.0)])), 1, settings)
    assert res.mu[0] == pytest.approx(1.0, abs=1e-6)
    assert res.value == pytest.approx(0.0, abs=1e-6)


def test_ellipsoid_piecewise_kink_1d():
    def g(m):
        x = m[0]
        if x < 1.0:
            return x, np.array([1.0])
        return 2.0 - x, np.array([-1.0])

    res = ellipsoid_maximize(g, 1)
    assert res.mu[0] == pytest.approx(1.0, abs=1e-5)


def test_ellipsoid_separable_quadratic_2d():
    target = np.array([1.0, 2.0])

    def g(m):
        return -float(np.sum((m - target) ** 2)), -2.0 * (m - target)

    res = ellipsoid_maximize(g, 2)
    assert np.allclose(res.mu, target, atol=1e-5)


def test_ellipsoid_respects_nonnegativity():
    # unconstrained max at (-1, 3): the constrained optimum clips to (0, 3)
    target = np.array([-1.0, 3.0])

    def g(m):
        return -float(np.sum((m - target) ** 2)), -2.0 * (m - target)

    res = ellipsoid_maximize(g, 2, EllipsoidSettings(initial_radius=20.0))
    assert np.all(res.mu >= 0)
    assert np.allclose(res.mu, [0.0, 3.0], atol=1e-4)


def test_ellipsoid_iteration_limit_carries_best():
    def g(m):
        return -float(np.sum((m - 3.0) ** 2)), -2.0 * (m - 3.0)

    with pytest.raises(IterationLimitError) as info:
        ellipsoid_maximize(g, 2, EllipsoidSettings(max_iters=5))
    assert info.value.best_mu.shape == (2,)
    assert info.value.iterations == 5


def test_ellipsoid_best_value_monotone(rng):
    # best-so-far dual value never decreases over the run
    seen = []

    def g(m):
        val = -float(np.sum((m - 2.0) ** 2))
        seen.append(val)
        return val, -2.0 * (m - 2.0)

    ellipsoid_maximize(g, 2)
    best = np.maximum.accumulate(seen)
    assert np.all(np.diff(best) >= 0)
