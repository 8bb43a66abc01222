import itertools
import math

import numpy as np
import pytest

from carspread.dynamics import is_fixed_point
from carspread.geometry import ConvexRegion, chebyshev_center, rectangle, unit_square
from carspread.optimum import (
    Objective,
    analytic_square_grid,
    analytic_square_optimum_cost,
    batch_objective,
    evaluate_best_possible,
    evaluate_objective,
    format_result,
    global_search_optimum,
)
from carspread.pricing import FleetState, PriceSpec, social_cost

SQ = unit_square()


def test_grid_examples():
    assert np.allclose(analytic_square_grid(1).positions, [(0.5, 0.5)])
    got = sorted(map(tuple, analytic_square_grid(2).positions))
    assert got == [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]
    g3 = analytic_square_grid(3).positions
    pair = min(math.dist(a, b) for a, b in itertools.combinations(g3, 2))
    assert pair == pytest.approx(1 / 3, abs=1e-15)
    assert np.min(np.minimum(g3, 1 - g3)) == pytest.approx(1 / 6, abs=1e-15)


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_analytic_cost_matches_grid(i):
    assert analytic_square_optimum_cost(i) == 2 * i
    assert social_cost(analytic_square_grid(i), SQ) == pytest.approx(2 * i, rel=1e-12)


def test_grid_rejects_nonpositive():
    with pytest.raises(ValueError):
        analytic_square_grid(0)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_grid_is_a_fixed_point(i):
    assert is_fixed_point(PriceSpec("ustar"), analytic_square_grid(i), SQ, eps=1e-6)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_social_optimum_on_square(i):
    res = global_search_optimum(Objective.SOCIAL_MAX, SQ, i * i, budget=200_000, seed=0)
    assert 2 * i - 1e-6 <= res.cost <= 1.02 * 2 * i
    assert res.search_budget >= 200_000
    assert res.cost == pytest.approx(evaluate_objective(Objective.SOCIAL_MAX, res.state, SQ), abs=1e-9)


def test_single_car_lands_on_centre():
    res = global_search_optimum("social_max", SQ, 1, budget=20_000)
    assert np.allclose(res.state.positions[0], (0.5, 0.5), atol=1e-3)


def test_single_car_in_triangle_matches_chebyshev():
    tri = ConvexRegion([(0, 0), (2, 0), (0.6, 1.4)])
    res = global_search_optimum("social_max", tri, 1, budget=20_000)
    assert res.cost == pytest.approx(1 / chebyshev_center(tri).radius, rel=1e-6)


def test_monotone_in_budget():
    q = rectangle(0, 0, 1.5, 1)
    costs = [global_search_optimum("social_max", q, 5, budget=b, seed=3).cost for b in (5_000, 25_000, 80_000)]
    assert costs[0] >= costs[1] >= costs[2]


def test_deterministic_given_seed():
    a = global_search_optimum("social_max", SQ, 3, budget=30_000, seed=4)
    b = global_search_optimum("social_max", SQ, 3, budget=30_000, seed=4)
    assert a.state == b.state and a.cost == b.cost


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scale_covariance(lam):
    g = analytic_square_grid(3)
    q = SQ.scaled(lam)
    assert evaluate_objective("social_max", g.positions * lam, q) == pytest.approx(
        evaluate_objective("social_max", g, SQ) / lam, rel=1e-12
    )


def test_batch_matches_scalar_objective():
    rng = np.random.default_rng(1)
    for obj in Objective:
        f = batch_objective(obj, SQ, 6, 2)
        xs = rng.uniform(0.01, 0.99, size=(50, 12))
        batch = f(xs)
        for x, v in zip(xs, batch):
            assert v == pytest.approx(evaluate_objective(obj, x.reshape(6, 2), SQ, 2), rel=1e-12)


def test_batch_marks_outside_points_infeasible():
    f = batch_objective(Objective.SOCIAL_MAX, SQ, 2)
    assert f(np.array([[0.2, 0.2, 1.5, 0.5]]))[0] == math.inf


def test_sum_ustar_single_car():
    res = evaluate_best_possible("sum_ustar", SQ, 1, budget=20_000)
    assert res.cost == pytest.approx(2.0, rel=0.02)
    assert np.allclose(res.state.positions[0], (0.5, 0.5), atol=1e-2)


def test_sum_ustar_nine_cars_matches_grid_cost():
    res = evaluate_best_possible("sum_ustar", SQ, 9, budget=200_000)
    assert social_cost(res.state, SQ) <= 1.1 * 6.0


def test_sum_w_nine_cars_is_far_from_optimal():
    res = evaluate_best_possible("sum_w", SQ, 9, budget=200_000, neighborhood=1)
    assert social_cost(res.state, SQ) > 6.0


def test_best_possible_rejects_max_objective():
    with pytest.raises(ValueError):
        evaluate_best_possible("social_max", SQ, 4)


@pytest.mark.parametrize("kwargs", [dict(k=0), dict(k=3, budget=0), dict(k=1, objective="sum_v")])
def test_argument_errors(kwargs):
    args = dict(objective="social_max", q=SQ, k=1, budget=1000) | kwargs
    with pytest.raises(ValueError):
        global_search_optimum(**args)


def test_unknown_objective():
    with pytest.raises(ValueError):
        Objective.parse("sum_z")


def test_format_result_is_region_file_compatible(tmp_path):
    res = global_search_optimum("social_max", SQ, 4, budget=10_000)
    summary, text = format_result(res, SQ)
    assert "objective=social_max" in summary and "cost=" in summary
    rows = [tuple(map(float, line.split())) for line in text.splitlines() if line.strip()]
    assert FleetState(rows) == res.state
