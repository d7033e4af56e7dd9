"""Derivative-free simplex minimization, vectorized over a batch of problems.

The bootstrap goodness-of-fit machinery refits hundreds of small
maximum-likelihood problems per test.  Running those through a per-problem
optimizer is Python-loop bound, so the Nelder-Mead update is applied to a
whole batch of simplexes in lockstep using masked numpy arithmetic.  The
objective may return +inf for infeasible points (support violations,
non-positive scales); no parameter transforms are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Standard Nelder-Mead coefficients: reflection, expansion, contraction, shrink.
_ALPHA = 1.0
_GAMMA = 2.0
_RHO = 0.5
_SIGMA = 0.5


@dataclass
class BatchResult:
    x: np.ndarray          # (B, d) best vertex per problem
    fun: np.ndarray        # (B,) objective at x
    iterations: int        # shared iteration count of the batch loop
    converged: np.ndarray  # (B,) simplex diameter < xatol with finite objective
    diameter: np.ndarray   # (B,) final simplex diameter


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    # scipy-style construction: bump each coordinate by 5% (absolute 2.5e-4 at zero).
    b, d = x0.shape
    simplex = np.repeat(x0[:, None, :], d + 1, axis=1)
    for j in range(d):
        step = 0.05 * x0[:, j]
        step = np.where(np.abs(step) < 2.5e-4, 2.5e-4, step)
        simplex[:, j + 1, j] += step
    return simplex


def nelder_mead_batch(fn, x0, xatol: float = 1e-9, max_iter: int = 10_000) -> BatchResult:
    """Minimize ``fn`` from every row of ``x0`` simultaneously.

    ``fn`` maps a (B, k, d) array of candidate points to a (B, k) array of
    objective values; axis 0 is the problem index, so objectives with
    per-problem data align on that axis.  Termination per problem is a
    simplex diameter (max coordinate spread) below ``xatol``; the batch
    stops when every problem has terminated or at ``max_iter`` sweeps.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    b, d = x0.shape
    simplex = _initial_simplex(x0)
    fvals = np.asarray(fn(simplex), dtype=float)

    it = 0
    while True:
        order = np.argsort(fvals, axis=1, kind="stable")
        fvals = np.take_along_axis(fvals, order, axis=1)
        simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)

        diameter = np.max(np.abs(simplex[:, 1:, :] - simplex[:, :1, :]), axis=(1, 2))
        active = diameter >= xatol
        if not active.any() or it >= max_iter:
            break
        it += 1

        worst = simplex[:, -1, :]
        centroid = simplex[:, :-1, :].mean(axis=1)

        f_best = fvals[:, 0]
        f_second = fvals[:, -2]
        f_worst = fvals[:, -1]

        xr = centroid + _ALPHA * (centroid - worst)
        fr = np.asarray(fn(xr[:, None, :]), dtype=float)[:, 0]

        # Pick the one follow-up candidate each problem needs (expansion,
        # outside or inside contraction) and evaluate them in a single
        # batched call; problems that accept the reflection get a dummy.
        want_expand = fr < f_best
        want_ic = fr >= f_worst
        want_oc = ~want_expand & ~want_ic & (fr >= f_second)
        xe = centroid + _GAMMA * (xr - centroid)
        xoc = centroid + _RHO * (xr - centroid)
        xic = centroid + _RHO * (worst - centroid)
        second = np.where(want_expand[:, None], xe,
                          np.where(want_oc[:, None], xoc,
                                   np.where(want_ic[:, None], xic, xr)))
        fsecond = np.asarray(fn(second[:, None, :]), dtype=float)[:, 0]

        take_expand = want_expand & (fsecond < fr)
        take_reflect = (fr < f_second) & ~take_expand
        take_oc = want_oc & (fsecond <= fr)
        take_ic = want_ic & (fsecond < f_worst)
        shrink = ~(take_expand | take_reflect | take_oc | take_ic)

        use_second = take_expand | take_oc | take_ic
        new_vertex = np.where(use_second[:, None], second,
                              np.where(take_reflect[:, None], xr, worst))
        new_f = np.where(use_second, fsecond,
                         np.where(take_reflect, fr, f_worst))

        replace = active & ~shrink
        simplex[replace, -1, :] = new_vertex[replace]
        fvals[replace, -1] = new_f[replace]

        do_shrink = active & shrink
        if do_shrink.any():
            shrunk = simplex[:, :1, :] + _SIGMA * (simplex[:, 1:, :] - simplex[:, :1, :])
            fshr = np.asarray(fn(shrunk), dtype=float)
            simplex[do_shrink, 1:, :] = shrunk[do_shrink]
            fvals[do_shrink, 1:] = fshr[do_shrink]

    best = simplex[:, 0, :]
    fbest = fvals[:, 0]
    converged = (diameter < xatol) & np.isfinite(fbest)
    return BatchResult(x=best, fun=fbest, iterations=it, converged=converged, diameter=diameter)


def nelder_mead(fn, x0, xatol: float = 1e-9, max_iter: int = 10_000):
    """Single-problem convenience wrapper; ``fn`` maps (k, d) -> (k,)."""

    def batched(points):
        return fn(points[0])[None, :]

    res = nelder_mead_batch(batched, np.asarray(x0, dtype=float)[None, :], xatol, max_iter)
    return res.x[0], float(res.fun[0]), bool(res.converged[0]), res.iterations


def multistart(fn, starts, xatol: float = 1e-9, max_iter: int = 10_000):
    """Run one simplex per start (batched) and keep the best terminal point.

    Returns (x, fun, converged, iterations) of the winner; ``fn`` has the
    batched (B, k, d) -> (B, k) signature with shared data across starts.
    """
    res = nelder_mead_batch(fn, np.asarray(starts, dtype=float), xatol, max_iter)
    k = int(np.argmin(res.fun))
    return res.x[k], float(res.fun[k]), bool(res.converged[k]), res.iterations
