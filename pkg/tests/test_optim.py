import numpy as np
import pytest
from scipy.optimize import minimize

from surkit.optim import nelder_mead, nelder_mead_batch, multistart


def rosen(pts):
    x, y = pts[..., 0], pts[..., 1]
    return (1 - x) ** 2 + 100 * (y - x * x) ** 2


def quad_form(center):
    def fn(pts):
        d = pts - center
        return np.sum(d * d, axis=-1)
    return fn


def test_rosenbrock_matches_scipy():
    x, f, converged, _ = nelder_mead(rosen, [-1.2, 1.0])
    ref = minimize(lambda v: float(rosen(np.asarray(v)[None, :])[0]), [-1.2, 1.0],
                   method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 50_000})
    assert converged
    assert np.allclose(x, ref.x, atol=1e-6)
    assert f < 1e-12


def test_batch_equals_per_problem_runs():
    rng = np.random.default_rng(0)
    centers = rng.normal(size=(7, 3)) * 4
    x0 = rng.normal(size=(7, 3))

    def fn(points):
        d = points - centers[:, None, :]
        return np.sum(d * d, axis=-1)

    res = nelder_mead_batch(fn, x0)
    assert res.converged.all()
    assert np.allclose(res.x, centers, atol=1e-7)

    for i in range(7):
        xi, fi, ci, _ = nelder_mead(quad_form(centers[i]), x0[i])
        assert ci
        assert np.allclose(xi, res.x[i], atol=1e-7)


def test_infeasible_region_respected():
    # +inf left of x = 1 forces the minimum onto the feasible side
    def fn(points):
        v = (points[..., 0] - 3.0) ** 2
        return np.where(points[..., 0] < 1.0, np.inf, v)

    x, f, converged, _ = nelder_mead(fn, np.array([5.0]))
    assert converged
    assert abs(x[0] - 3.0) < 1e-7


def test_all_infeasible_start_reports_not_converged():
    def fn(points):
        return np.full(points.shape[:-1], np.inf)

    res = nelder_mead_batch(fn, np.array([[0.5, 0.5]]), max_iter=50)
    assert not res.converged[0]
    assert np.isinf(res.fun[0])


def test_max_iter_bound_holds():
    res = nelder_mead_batch(lambda pts: rosen(pts), np.array([[-1.2, 1.0]]), max_iter=5)
    assert res.iterations <= 5


def test_multistart_picks_best_basin():
    # double well: f(x) = (x^2 - 1)^2 + 0.5 x has global minimum near x = -1
    def fn(points):
        x = points[..., 0]
        return (x * x - 1) ** 2 + 0.5 * x

    x, f, converged, _ = multistart(fn, np.array([[0.9], [-0.9]]))
    assert converged
    assert x[0] < 0


def test_deterministic_given_inputs():
    a = nelder_mead_batch(lambda p: rosen(p), np.array([[2.0, 2.0], [0.0, 3.0]]))
    b = nelder_mead_batch(lambda p: rosen(p), np.array([[2.0, 2.0], [0.0, 3.0]]))
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.fun, b.fun)
