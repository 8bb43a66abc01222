import math

import numpy as np
import pytest

from carspread.geometry import boundary_distance, unit_square
from carspread.optimum import analytic_square_grid
from carspread.pricing import (
    FleetState,
    PriceKind,
    PriceSpec,
    inconvenience_ustar,
    nearest_neighbor_distances,
    price,
    price_v,
    price_w,
    safety_margin,
    social_cost,
    ustar_from_distances,
    v_from_distances,
    w_from_distances,
)

SQ = unit_square()
PAIR = [(0.25, 0.5), (0.75, 0.5)]
GRID3 = analytic_square_grid(3)


def random_states(rng, count, kmin=2, kmax=20):
    for _ in range(count):
        k = int(rng.integers(kmin, kmax + 1))
        yield FleetState(rng.uniform(1e-3, 1 - 1e-3, size=(k, 2)))


def oracle_ustar(pos, u):
    """Direct transcription of the inconvenience definition, independent of the library."""
    x, y = pos[u]
    bd = min(x, y, 1 - x, 1 - y)
    nn = min(math.dist(pos[u], pos[v]) for v in range(len(pos)) if v != u) if len(pos) > 1 else math.inf
    return max(1 / bd if bd > 0 else math.inf, 2 / nn if nn > 0 else math.inf)


# ---- nearest neighbours -------------------------------------------------

def test_nearest_neighbor_examples():
    line = [(0.1, 0.5), (0.3, 0.5), (0.7, 0.5)]
    assert nearest_neighbor_distances(line, 0, 2) == pytest.approx([0.2, 0.6], abs=1e-15)
    assert nearest_neighbor_distances(PAIR, 0, 1) == pytest.approx([0.5])
    assert nearest_neighbor_distances(GRID3, 4, 4) == pytest.approx([1 / 3] * 4, abs=1e-15)


@pytest.mark.parametrize("m", [0, 3])
def test_nearest_neighbor_out_of_range(m):
    with pytest.raises(ValueError):
        nearest_neighbor_distances(PAIR + [(0.5, 0.9)], 0, m)


# ---- fleet state --------------------------------------------------------

def test_fleet_state_rejects_coincident_and_nonfinite():
    with pytest.raises(ValueError):
        FleetState([(0.2, 0.2), (0.2, 0.2)])
    with pytest.raises(ValueError):
        FleetState([(0.2, math.nan)])


def test_fleet_state_is_read_only():
    s = FleetState(PAIR)
    with pytest.raises(ValueError):
        s.positions[0, 0] = 0.0
    moved = s.moved(0, (0.1, 0.1))
    assert tuple(moved[0]) == (0.1, 0.1)
    assert tuple(s[0]) == (0.25, 0.5)


# ---- U*, sm, V, W examples ----------------------------------------------

def test_ustar_examples():
    assert inconvenience_ustar(PAIR, 0, SQ) == pytest.approx(4.0, abs=1e-12)
    assert inconvenience_ustar([(0.5, 0.5)], 0, SQ) == 2.0
    for u in range(9):
        assert inconvenience_ustar(GRID3, u, SQ) == pytest.approx(6.0, abs=1e-12)


def test_ustar_degenerate_is_infinite():
    assert inconvenience_ustar([(0.0, 0.4), (0.5, 0.5)], 0, SQ) == math.inf


def test_safety_margin_examples():
    assert safety_margin(PAIR, 0, SQ) == pytest.approx(0.25, abs=1e-15)
    for u in range(9):
        assert safety_margin(GRID3, u, SQ) == pytest.approx(1 / 6, abs=1e-15)
    assert safety_margin([(1.0, 0.3), (0.5, 0.5)], 0, SQ) == 0.0


def test_price_v_examples():
    spec = PriceSpec(PriceKind.V, 1)
    assert price_v([(0.5, 0.5), (0.6, 0.5)], 0, SQ, spec) == pytest.approx(10.0, abs=1e-12)
    assert price_v([(0.5, 0.5), (0.5, 0.9)], 0, SQ, spec) == pytest.approx(4.0, abs=1e-12)
    assert price_v([(0.0, 0.5), (0.5, 0.5)], 0, SQ, spec) == math.inf


def test_price_w_examples():
    assert price_w([(0.5, 0.5), (0.6, 0.5)], 0, SQ, PriceSpec("w", 1)) == pytest.approx(1 / 0.35, abs=1e-12)
    two = [(0.5, 0.5), (0.6, 0.5), (0.5, 0.3)]
    assert price_w(two, 0, SQ, PriceSpec("w", 2)) == pytest.approx(1 / 0.55, abs=1e-12)
    assert price_w([(0.0, 0.5), (0.5, 0.5)], 0, SQ, PriceSpec("w", 1)) == pytest.approx(2.0, abs=1e-12)


def test_price_dispatch():
    assert price(PriceSpec("ustar"), PAIR, 0, SQ) == pytest.approx(4.0)
    assert price(PriceSpec("v", 1), PAIR, 0, SQ) == pytest.approx(8.0)
    assert price(PriceSpec("w", 1), PAIR, 0, SQ) == pytest.approx(1.6)


def test_neighbourhood_is_clamped_to_fleet():
    wide = PriceSpec("w", 5)
    assert wide.effective_neighborhood(3) == 2
    three = [(0.5, 0.5), (0.6, 0.5), (0.5, 0.3)]
    assert price(wide, three, 0, SQ) == price(PriceSpec("w", 2), three, 0, SQ)


def test_price_spec_validation():
    with pytest.raises(ValueError):
        PriceSpec("ustar", 0)
    with pytest.raises(ValueError):
        PriceSpec("nope")
    assert PriceSpec("USTAR_LOCAL").kind is PriceKind.USTAR_LOCAL


def test_social_cost_examples():
    assert social_cost(GRID3, SQ) == pytest.approx(6.0, abs=1e-12)
    assert social_cost([(0.5, 0.5)], SQ) == 2.0
    assert social_cost(PAIR, SQ) == pytest.approx(4.0, abs=1e-12)


# ---- properties ---------------------------------------------------------

def test_ustar_matches_direct_oracle():
    rng = np.random.default_rng(2)
    for s in random_states(rng, 200):
        pos = s.positions.tolist()
        for u in range(len(pos)):
            assert inconvenience_ustar(s, u, SQ) == pytest.approx(oracle_ustar(pos, u), rel=1e-12)


def test_duality_identity():
    rng = np.random.default_rng(0)
    for s in random_states(rng, 1000):
        k = len(s)
        assert abs(social_cost(s, SQ) * min(safety_margin(s, u, SQ) for u in range(k)) - 1) <= 1e-9


def test_safety_margin_is_reciprocal_of_ustar():
    rng = np.random.default_rng(4)
    for s in random_states(rng, 100):
        for u in range(len(s)):
            assert safety_margin(s, u, SQ) * inconvenience_ustar(s, u, SQ) == pytest.approx(1.0, rel=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(6)
    for s in random_states(rng, 100):
        perm = rng.permutation(len(s))
        assert social_cost(s.positions[perm], SQ) == social_cost(s, SQ)


DIHEDRAL = [
    lambda p: p,
    lambda p: np.column_stack([1 - p[:, 0], p[:, 1]]),
    lambda p: np.column_stack([p[:, 0], 1 - p[:, 1]]),
    lambda p: 1 - p,
    lambda p: p[:, ::-1],
    lambda p: 1 - p[:, ::-1],
    lambda p: np.column_stack([p[:, 1], 1 - p[:, 0]]),
    lambda p: np.column_stack([1 - p[:, 1], p[:, 0]]),
]


@pytest.mark.parametrize("g", range(8))
def test_dihedral_invariance(g):
    rng = np.random.default_rng(8)
    for s in random_states(rng, 100):
        assert social_cost(DIHEDRAL[g](s.positions), SQ) == pytest.approx(social_cost(s, SQ), rel=1e-9)


def test_monotone_when_moving_towards_neighbour():
    rng = np.random.default_rng(10)
    for s in random_states(rng, 300):
        pos = s.positions.copy()
        d = np.hypot(*(pos[1:] - pos[0]).T)
        v = 1 + int(np.argmin(d))
        before = inconvenience_ustar(pos, 0, SQ)
        pos[0] = pos[0] + rng.uniform(0.05, 0.95) * (pos[v] - pos[0])
        # moving along the segment keeps the car inside; only accept cases
        # where the boundary distance did not grow
        if boundary_distance(pos[0], SQ) > boundary_distance(s.positions[0], SQ):
            continue
        assert inconvenience_ustar(pos, 0, SQ) >= before


@pytest.mark.parametrize("kind", ["v", "w"])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_locality_bit_identical(kind, m):
    rng = np.random.default_rng(12)
    spec = PriceSpec(kind, m)
    fn = v_from_distances if kind == "v" else w_from_distances
    for s in random_states(rng, 100, kmin=m + 1):
        for u in range(len(s)):
            scalars = (boundary_distance(s[u], SQ), nearest_neighbor_distances(s, u, m))
            assert fn(*scalars) == price(spec, s, u, SQ)


def test_ustar_from_distances_k1():
    assert ustar_from_distances(0.5, None) == 2.0
    assert ustar_from_distances(0.25, 0.5) == 4.0


def test_w_not_above_v_single_neighbour():
    rng = np.random.default_rng(14)
    for s in random_states(rng, 300):
        for u in range(len(s)):
            assert price_w(s, u, SQ, PriceSpec("w", 1)) <= price_v(s, u, SQ, PriceSpec("v", 1))
