"""Derivative-free and epigraph local searches shared by the dynamics and
the optimum oracle.

Objectives are expressed as *margins* (reciprocal prices) to be maximized
or as costs to be minimized; each caller says which.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .geometry import ConvexRegion, interior_margins
from .pricing import PriceKind

# (boundary weight, pairwise weight) such that price = 1 / min{a*bd, b*nn}
MAXMIN_WEIGHTS = {PriceKind.USTAR_LOCAL: (1.0, 0.5), PriceKind.V: (0.5, 1.0)}


def candidate_margins(kind: PriceKind, m: int, others: np.ndarray, ys: np.ndarray, q: ConvexRegion) -> np.ndarray:
    """Margin of a car placed at each row of ``ys`` with the other cars fixed.

    Points outside ``q`` get ``-inf``.
    """
    ys = np.asarray(ys, dtype=float).reshape(-1, 2)
    bd = interior_margins(ys, q)
    if len(others):
        diff = ys[:, None, :] - others[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
    else:
        dist = np.empty((len(ys), 0))
    if kind is PriceKind.W:
        near = np.partition(dist, m - 1, axis=1)[:, :m] if m < dist.shape[1] else dist
        out = 0.5 * bd + near.sum(axis=1)
    else:
        a, b = MAXMIN_WEIGHTS[kind]
        out = a * bd
        if dist.shape[1]:
            out = np.minimum(out, b * dist.min(axis=1))
    return out


def pattern_search(
    f: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    step: float,
    tol: float,
    max_iters: int,
    directions: np.ndarray | None = None,
    max_evals: int | None = None,
) -> tuple[np.ndarray, float, int]:
    """Minimize ``f`` by polling a fixed direction set, halving on failure.

    ``f`` maps an ``(m, n)`` batch of points to ``m`` values. Returns the best
    point, its value and the number of points evaluated.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    if directions is None:
        eye = np.eye(n)
        directions = np.vstack([eye, -eye])
    fx = float(f(x[None])[0])
    evals = 1
    it = 0
    while step >= tol and it < max_iters:
        if max_evals is not None and evals + len(directions) > max_evals:
            break
        it += 1
        trial = x + step * directions
        ft = f(trial)
        evals += len(trial)
        j = int(np.argmin(ft))
        if ft[j] < fx:
            x, fx = trial[j], float(ft[j])
        else:
            step *= 0.5
    return x, fx, evals


def compass_directions_2d() -> np.ndarray:
    s = math.sqrt(0.5)
    return np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [s, s], [-s, -s], [s, -s], [-s, s]], dtype=float)


def polish_maxmin_single(
    kind: PriceKind, others: np.ndarray, y0: np.ndarray, q: ConvexRegion, tol: float, max_iters: int
) -> np.ndarray:
    """Local maximizer of ``min{a*bd(y), b*min_v |y - x_v|}`` near ``y0``.

    Epigraph form: max r s.t. ``a*(n_e.y - c_e) >= r`` for every edge line and
    ``|y - x_v|^2 >= (r/b)^2`` for every other car.
    """
    a, b = MAXMIN_WEIGHTS[kind]
    normals, offsets = q.halfplanes()
    inv_b2 = 1.0 / (b * b)

    def lin(z):
        return a * (normals @ z[:2] - offsets) - z[2]

    def lin_jac(z):
        return np.hstack([a * normals, -np.ones((len(normals), 1))])

    cons = [{"type": "ineq", "fun": lin, "jac": lin_jac}]
    if len(others):

        def pair(z):
            d = z[:2] - others
            return np.einsum("ij,ij->i", d, d) - inv_b2 * z[2] ** 2

        def pair_jac(z):
            d = z[:2] - others
            return np.hstack([2.0 * d, np.full((len(others), 1), -2.0 * inv_b2 * z[2])])

        cons.append({"type": "ineq", "fun": pair, "jac": pair_jac})

    y0 = np.asarray(y0, dtype=float)
    r0 = float(candidate_margins(kind, 1, others, y0, q)[0])
    z0 = np.array([y0[0], y0[1], max(r0, 0.0)])
    res = minimize(
        lambda z: -z[2],
        z0,
        jac=lambda z: np.array([0.0, 0.0, -1.0]),
        method="SLSQP",
        constraints=cons,
        bounds=[(None, None), (None, None), (0.0, None)],
        options={"ftol": min(tol, 1e-14), "maxiter": max_iters},
    )
    return np.asarray(res.x[:2], dtype=float)
