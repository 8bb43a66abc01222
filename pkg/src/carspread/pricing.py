"""Inconvenience, neighbourhood prices and social cost.

Every price here is the reciprocal of a nonnegative "margin" measured in
region units. A zero margin prices at ``math.inf`` rather than raising, so
the dynamics can evaluate (and move away from) degenerate positions.

Car indices are 0-based.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import ConvexRegion, boundary_distance

log = logging.getLogger(__name__)


class PriceKind(str, enum.Enum):
    USTAR_LOCAL = "ustar"
    V = "v"
    W = "w"

    @classmethod
    def parse(cls, name: str) -> "PriceKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"ustar_local": "ustar", "u*": "ustar", "ustar-local": "ustar"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown price kind {name!r}; expected one of ustar, v, w") from None


@dataclass(frozen=True)
class PriceSpec:
    kind: PriceKind = PriceKind.USTAR_LOCAL
    neighborhood: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", PriceKind.parse(self.kind))
        if int(self.neighborhood) < 1:
            raise ValueError("neighborhood must be >= 1")
        object.__setattr__(self, "neighborhood", int(self.neighborhood))

    def effective_neighborhood(self, k: int) -> int:
        if self.neighborhood > k - 1:
            log.debug("neighborhood %d clamped to %d", self.neighborhood, k - 1)
            return k - 1
        return self.neighborhood

    def label(self) -> str:
        if self.kind is PriceKind.USTAR_LOCAL:
            return "ustar"
        return f"{self.kind.value}(|D|={self.neighborhood})"


class FleetState:
    """Positions of ``k`` parked cars, pairwise distinct.

    Containment in the region is checked by the simulators, which know the
    region; this class only enforces shape, finiteness and distinctness.
    """

    __slots__ = ("_pos",)

    def __init__(self, positions):
        pos = np.array(positions, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if len(pos) >= 2:
            diff = pos[:, None, :] - pos[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            np.fill_diagonal(d2, np.inf)
            if d2.min() == 0.0:
                i, j = np.unravel_index(np.argmin(d2), d2.shape)
                raise ValueError(f"cars {i} and {j} occupy the same position")
        pos.setflags(write=False)
        self._pos = pos

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def k(self) -> int:
        return len(self._pos)

    def __len__(self):
        return len(self._pos)

    def __getitem__(self, u):
        return self._pos[u]

    def __eq__(self, other):
        return isinstance(other, FleetState) and np.array_equal(self._pos, other._pos)

    def __repr__(self):
        return f"FleetState({self._pos.tolist()!r})"

    def moved(self, u: int, new_position) -> "FleetState":
        pos = self._pos.copy()
        pos[u] = new_position
        return FleetState(pos)


def _as_positions(state) -> np.ndarray:
    return state.positions if isinstance(state, FleetState) else np.asarray(state, dtype=float)


def _distances_from(pos: np.ndarray, u: int) -> np.ndarray:
    diff = np.delete(pos, u, axis=0) - pos[u]
    return np.hypot(diff[:, 0], diff[:, 1])


def nearest_neighbor_distances(state, u: int, m: int) -> list[float]:
    pos = _as_positions(state)
    k = len(pos)
    if not 1 <= m <= k - 1:
        raise ValueError(f"neighbour count {m} out of range 1..{k - 1}")
    return [float(d) for d in np.sort(_distances_from(pos, u))[:m]]


def _recip(margin: float) -> float:
    return math.inf if margin <= 0.0 else 1.0 / margin


def ustar_from_distances(boundary: float, nearest: float | None) -> float:
    """``max{1/boundary, 2/nearest}``; ``nearest=None`` means a lone car."""
    a = _recip(boundary)
    if nearest is None:
        return a
    b = math.inf if nearest <= 0.0 else 2.0 / nearest
    return max(a, b)


def v_from_distances(boundary: float, neighbors: Sequence[float]) -> float:
    return _recip(min(0.5 * boundary, min(neighbors)))


def w_from_distances(boundary: float, neighbors: Sequence[float]) -> float:
    return _recip(0.5 * boundary + math.fsum(neighbors))


def inconvenience_ustar(state, u: int, q: ConvexRegion) -> float:
    pos = _as_positions(state)
    bd = boundary_distance(pos[u], q)
    nearest = float(_distances_from(pos, u).min()) if len(pos) > 1 else None
    return ustar_from_distances(bd, nearest)


def safety_margin(state, u: int, q: ConvexRegion) -> float:
    pos = _as_positions(state)
    bd = boundary_distance(pos[u], q)
    if len(pos) == 1:
        return bd
    return min(bd, 0.5 * float(_distances_from(pos, u).min()))


def _local_inputs(state, u: int, q: ConvexRegion, spec: PriceSpec) -> tuple[float, list[float]]:
    pos = _as_positions(state)
    if len(pos) < 2:
        raise ValueError("neighbourhood prices need at least two cars")
    m = spec.effective_neighborhood(len(pos))
    return boundary_distance(pos[u], q), nearest_neighbor_distances(pos, u, m)


def price_v(state, u: int, q: ConvexRegion, spec: PriceSpec) -> float:
    return v_from_distances(*_local_inputs(state, u, q, spec))


def price_w(state, u: int, q: ConvexRegion, spec: PriceSpec) -> float:
    return w_from_distances(*_local_inputs(state, u, q, spec))


def price(spec: PriceSpec, state, u: int, q: ConvexRegion) -> float:
    if spec.kind is PriceKind.USTAR_LOCAL:
        return inconvenience_ustar(state, u, q)
    if spec.kind is PriceKind.V:
        return price_v(state, u, q, spec)
    return price_w(state, u, q, spec)


def social_cost(state, q: ConvexRegion) -> float:
    pos = _as_positions(state)
    return max(inconvenience_ustar(pos, u, q) for u in range(len(pos)))
