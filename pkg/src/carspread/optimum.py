"""Social optimum: analytic grids on the unit square and a multi-start
global-search oracle for arbitrary convex regions.

The oracle's result is an upper bound on the true minimum ("best found").
It is certified only against the analytic grid constructions.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .geometry import ConvexRegion, boundary_distances, contains_many, format_points, interior_margins
from .pricing import FleetState, PriceKind, PriceSpec, price, social_cost
from .search import pattern_search


class Objective(str, enum.Enum):
    SOCIAL_MAX = "social_max"
    SUM_USTAR = "sum_ustar"
    SUM_V = "sum_v"
    SUM_W = "sum_w"

    @classmethod
    def parse(cls, name) -> "Objective":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            names = ", ".join(o.value for o in cls)
            raise ValueError(f"unknown objective {name!r}; expected one of {names}") from None


@dataclass(frozen=True)
class OptimumResult:
    state: FleetState
    cost: float
    objective: Objective
    search_budget: int
    neighborhood: int = 1


def analytic_square_grid(i: int) -> FleetState:
    """``i*i`` cars at the centres of an ``i x i`` partition of ``[0,1]^2``."""
    if i < 1:
        raise ValueError("i must be >= 1")
    c = (2.0 * np.arange(i) + 1.0) / (2.0 * i)
    return FleetState([(a, b) for a in c for b in c])


def analytic_square_optimum_cost(i: int) -> float:
    if i < 1:
        raise ValueError("i must be >= 1")
    return 2.0 * i


def _pairwise(batch: np.ndarray) -> np.ndarray:
    diff = batch[:, :, None, :] - batch[:, None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    k = batch.shape[1]
    d[:, np.arange(k), np.arange(k)] = np.inf
    return d


def batch_objective(objective: Objective, q: ConvexRegion, k: int, neighborhood: int = 1):
    """Vectorized objective over an ``(m, 2k)`` batch of flattened configurations.

    Infeasible rows (a car outside ``q``) evaluate to ``inf``.
    """

    def f(flat: np.ndarray) -> np.ndarray:
        batch = np.asarray(flat, dtype=float).reshape(-1, k, 2)
        m = len(batch)
        bd = interior_margins(batch.reshape(-1, 2), q).reshape(m, k)
        inside = np.isfinite(bd).all(axis=1)
        if k > 1:
            dist = _pairwise(batch)
            nn = dist.min(axis=2)
        else:
            dist = np.full((m, 1, 1), np.inf)
            nn = np.full((m, k), np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            if objective is Objective.SOCIAL_MAX or objective is Objective.SUM_USTAR:
                per_car = 1.0 / np.minimum(bd, 0.5 * nn)
            elif objective is Objective.SUM_V:
                per_car = 1.0 / np.minimum(0.5 * bd, nn)
            else:
                near = np.sort(dist, axis=2)[:, :, :neighborhood]
                per_car = 1.0 / (0.5 * bd + near.sum(axis=2))
        out = per_car.max(axis=1) if objective is Objective.SOCIAL_MAX else per_car.sum(axis=1)
        return np.where(inside, out, np.inf)

    return f


def evaluate_objective(objective: Objective, state, q: ConvexRegion, neighborhood: int = 1) -> float:
    """Exact (scalar) objective value, using the pricing functions directly."""
    objective = Objective.parse(objective)
    pos = state.positions if isinstance(state, FleetState) else np.asarray(state, dtype=float)
    if objective is Objective.SOCIAL_MAX:
        return social_cost(pos, q)
    kind = {
        Objective.SUM_USTAR: PriceKind.USTAR_LOCAL,
        Objective.SUM_V: PriceKind.V,
        Objective.SUM_W: PriceKind.W,
    }[objective]
    spec = PriceSpec(kind, neighborhood)
    return math.fsum(price(spec, pos, u, q) for u in range(len(pos)))


def _polish_epigraph(objective: Objective, q: ConvexRegion, x0: np.ndarray, k: int, max_iters: int = 200):
    """SLSQP on the epigraph form of a max-min / sum-of-reciprocal objective.

    Variables are the positions and a margin ``r_u`` per car (one shared
    margin for SOCIAL_MAX); ``r_u <= a*(n_e.x_u - c_e)`` for every edge and
    ``|x_u - x_v|^2 >= (r_u/b)^2`` for every pair.
    """
    a, b = (0.5, 1.0) if objective is Objective.SUM_V else (1.0, 0.5)
    normals, offsets = q.halfplanes()
    shared = objective is Objective.SOCIAL_MAX
    nr = 1 if shared else k
    iu, iv = np.triu_indices(k, 1)
    inv_b2 = 1.0 / (b * b)
    ne = len(normals)

    def split(z):
        return z[: 2 * k].reshape(k, 2), (np.full(k, z[-1]) if shared else z[2 * k :])

    def edge_con(z):
        x, r = split(z)
        return (a * (x @ normals.T - offsets) - r[:, None]).ravel()

    def edge_jac(z):
        jac = np.zeros((k * ne, 2 * k + nr))
        for u in range(k):
            rows = slice(u * ne, (u + 1) * ne)
            jac[rows, 2 * u : 2 * u + 2] = a * normals
            jac[rows, 2 * k + (0 if shared else u)] = -1.0
        return jac

    def pair_con(z):
        x, r = split(z)
        d = x[iu] - x[iv]
        lhs = np.einsum("ij,ij->i", d, d)
        if shared:
            return lhs - inv_b2 * r[0] ** 2
        return np.concatenate([lhs - inv_b2 * r[iu] ** 2, lhs - inv_b2 * r[iv] ** 2])

    def pair_jac(z):
        x, r = split(z)
        d = x[iu] - x[iv]
        npair = len(iu)
        blocks = 1 if shared else 2
        jac = np.zeros((blocks * npair, 2 * k + nr))
        for blk in range(blocks):
            rows = np.arange(npair) + blk * npair
            jac[rows, 2 * iu] = 2 * d[:, 0]
            jac[rows, 2 * iu + 1] = 2 * d[:, 1]
            jac[rows, 2 * iv] = -2 * d[:, 0]
            jac[rows, 2 * iv + 1] = -2 * d[:, 1]
            if shared:
                jac[rows, 2 * k] = -2 * inv_b2 * r[0]
            else:
                owner = iu if blk == 0 else iv
                jac[rows, 2 * k + owner] = -2 * inv_b2 * r[owner]
        return jac

    x = x0.reshape(k, 2)
    bd = boundary_distances(x, q)
    nn = _pairwise(x[None])[0].min(axis=1) if k > 1 else np.full(k, np.inf)
    r0 = np.minimum(a * bd, b * nn)
    z0 = np.concatenate([x0, [r0.min()] if shared else r0])
    z0[2 * k :] = np.maximum(z0[2 * k :], 1e-6)

    if shared:
        fun, jac = (lambda z: -z[-1]), (lambda z: np.concatenate([np.zeros(2 * k), [-1.0]]))
    else:
        fun = lambda z: float(np.sum(1.0 / z[2 * k :]))  # noqa: E731
        jac = lambda z: np.concatenate([np.zeros(2 * k), -1.0 / z[2 * k :] ** 2])  # noqa: E731

    cons = [{"type": "ineq", "fun": edge_con, "jac": edge_jac}]
    if k > 1:
        cons.append({"type": "ineq", "fun": pair_con, "jac": pair_jac})
    with warnings.catch_warnings():
        # SLSQP may step slightly past the margin bound; it clips and carries on
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            fun,
            z0,
            jac=jac,
            method="SLSQP",
            constraints=cons,
            bounds=[(None, None)] * (2 * k) + [(1e-9, None)] * nr,
            options={"ftol": 1e-14, "maxiter": max_iters},
        )
    return res.x[: 2 * k], int(res.nfev + res.njev)


def _seed_configuration(q: ConvexRegion, k: int, rng: np.random.Generator, perturbed_grid: bool) -> np.ndarray:
    x0, y0, x1, y1 = q.bbox
    if perturbed_grid:
        # lattice fine enough to hold k points inside q, jittered, k picked at random
        n = max(1, math.ceil(math.sqrt(k * (x1 - x0) * (y1 - y0) / q.area)))
        while True:
            c = (np.arange(n) + 0.5) / n
            g = np.array([(x0 + a * (x1 - x0), y0 + b * (y1 - y0)) for a in c for b in c])
            g = g[contains_many(q, g, eps=0.0)]
            if len(g) >= k:
                break
            n += 1
        jitter = rng.uniform(-0.25, 0.25, size=(len(g), 2)) * np.array([x1 - x0, y1 - y0]) / n
        cand = g + jitter
        cand = np.where(contains_many(q, cand, eps=0.0)[:, None], cand, g)
        return cand[rng.choice(len(cand), size=k, replace=False)].ravel()
    out = np.empty((0, 2))
    while len(out) < k:
        pts = rng.uniform([x0, y0], [x1, y1], size=(2 * k, 2))
        out = np.vstack([out, pts[contains_many(q, pts, eps=0.0)]])
    return out[:k].ravel()


def global_search_optimum(
    objective,
    q: ConvexRegion,
    k: int,
    budget: int = 200_000,
    seed: int = 0,
    neighborhood: int = 1,
    restart_evals: int = 20_000,
    tol: float = 1e-9,
) -> OptimumResult:
    """Multi-start pattern search over all ``2k`` coordinates.

    Restart ``j`` is seeded from ``(seed, j)`` alone, alternating random and
    perturbed-grid seeds, so a larger budget only appends restarts and the
    result never gets worse. The budget is checked between restarts.
    For the max-min and sum-of-reciprocal objectives each restart ends with
    an SLSQP polish of the epigraph form; the polished point is kept only if
    it is feasible and better.
    """
    objective = Objective.parse(objective)
    if k < 1:
        raise ValueError("k must be >= 1")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if objective in (Objective.SUM_V, Objective.SUM_W) and k < 2:
        raise ValueError("neighbourhood prices need at least two cars")
    neighborhood = min(neighborhood, max(k - 1, 1))
    f = batch_objective(objective, q, k, neighborhood)
    x0, y0, x1, y1 = q.bbox
    h0 = 0.25 * max(x1 - x0, y1 - y0) / math.sqrt(k)

    best_x, best_f = None, math.inf
    used = 0
    j = 0
    while used < budget:
        rng = np.random.default_rng([seed, j])
        start = _seed_configuration(q, k, rng, perturbed_grid=(j % 2 == 1))
        x, fx, ev = pattern_search(f, start, step=h0, tol=tol, max_iters=10**6, max_evals=restart_evals)
        used += ev
        if objective is not Objective.SUM_W:
            xp, ev = _polish_epigraph(objective, q, x, k)
            used += ev
            fp = float(f(xp[None])[0])
            used += 1
            if fp < fx:
                x, fx = xp, fp
        if fx < best_f:
            best_x, best_f = x, fx
        j += 1

    state = FleetState(best_x.reshape(k, 2))
    cost = evaluate_objective(objective, state, q, neighborhood)
    return OptimumResult(state, cost, objective, used, neighborhood)


def evaluate_best_possible(objective, q: ConvexRegion, k: int, budget: int = 200_000, seed: int = 0, neighborhood: int = 1) -> OptimumResult:
    """Best found configuration for a summed-price objective."""
    objective = Objective.parse(objective)
    if objective is Objective.SOCIAL_MAX:
        raise ValueError("evaluate_best_possible takes one of sum_ustar, sum_v, sum_w")
    return global_search_optimum(objective, q, k, budget, seed, neighborhood)


def format_result(result: OptimumResult, q: ConvexRegion) -> tuple[str, str]:
    """Summary line and a region-file-compatible position list."""
    summary = (
        f"objective={result.objective.value} cost={result.cost:.17g} "
        f"social_cost={social_cost(result.state, q):.17g} budget={result.search_budget}"
    )
    return summary, format_points(result.state.positions)
