import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sculptor.errors import InputError
from sculptor.optimize import SimplexConfig, nelder_mead

from oracles import random_quadratic, rosenbrock


def test_one_dimensional_quadratic():
    r = nelder_mead(lambda x: (x[0] - 3) ** 2, [0.0], SimplexConfig(f_tol=1e-14, x_tol=1e-8, initial_step=1.0))
    assert r.converged and abs(r.x_best[0] - 3) <= 1e-6


def test_rosenbrock():
    cfg = SimplexConfig(max_iters=500, f_tol=1e-12, x_tol=1e-8)
    r = nelder_mead(rosenbrock, [-1.2, 1.0], cfg)
    np.testing.assert_allclose(r.x_best, [1, 1], atol=1e-4)
    assert r.iterations <= 500


def test_constant_objective_stops_at_once():
    r = nelder_mead(lambda x: 4.0, [1.0, 2.0])
    assert r.converged and r.iterations == 0 and r.f_best == 4.0
    np.testing.assert_array_equal(r.x_best, [1.0, 2.0])


def test_convex_quadratics_50_seeds():
    cfg = SimplexConfig(max_iters=5000, f_tol=1e-16, x_tol=1e-9, initial_step=1.0)
    for seed in range(50):
        n, h, x_star, x0 = random_quadratic(seed)
        r = nelder_mead(lambda x: 0.5 * (x - x_star) @ h @ (x - x_star), x0, cfg)
        np.testing.assert_allclose(r.x_best, x_star, atol=1e-5, err_msg=f"seed {seed}")


def test_trace_best_non_increasing():
    r = nelder_mead(rosenbrock, [-1.2, 1.0], SimplexConfig(max_iters=300))
    fs = [f for _, f in r.trace]
    assert all(b <= a for a, b in zip(fs, fs[1:]))
    assert r.f_best == pytest.approx(rosenbrock(r.x_best), abs=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), iters=st.integers(1, 80))
def test_evaluation_bound(seed, iters):
    n, h, x_star, x0 = random_quadratic(seed)
    r = nelder_mead(lambda x: float((x - x_star) @ h @ (x - x_star)), x0, SimplexConfig(max_iters=iters))
    assert r.iterations <= iters
    # n + 1 initial evaluations, then at most 2 + n per (shrink) iteration.
    assert r.evaluations <= (n + 1) + r.iterations * (n + 2)


def test_non_finite_values_are_avoided():
    def f(x):
        return np.inf if x[0] > 2 else (x[0] - 2) ** 2 + x[1] ** 2

    r = nelder_mead(f, [0.0, 1.0], SimplexConfig(initial_step=0.5))
    assert np.isfinite(r.f_best) and r.x_best[0] <= 2


def test_deterministic():
    a = nelder_mead(rosenbrock, [-1.2, 1.0])
    b = nelder_mead(rosenbrock, [-1.2, 1.0])
    assert np.array_equal(a.x_best, b.x_best) and a.evaluations == b.evaluations


def test_input_errors():
    with pytest.raises(InputError):
        nelder_mead(rosenbrock, [np.nan, 1.0])
    with pytest.raises(InputError):
        nelder_mead(rosenbrock, [])
    for kw in (dict(alpha=0), dict(gamma=1), dict(rho=1), dict(sigma=0), dict(max_iters=0), dict(f_tol=0)):
        with pytest.raises(InputError):
            SimplexConfig(**kw)


def test_runtime_budget():
    t0 = time.perf_counter()
    nelder_mead(rosenbrock, [-1.2, 1.0], SimplexConfig(max_iters=500, f_tol=1e-12, x_tol=1e-8))
    assert time.perf_counter() - t0 < 1.0
