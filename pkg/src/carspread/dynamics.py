"""Best-response dynamics of drivers reacting to a drop-off price.

One step moves a single car toward the global minimizer of its own price
(the other cars held fixed), clipped to a maximum step length. The
asynchronous simulator moves one car per step according to a schedule; the
synchronous simulator moves every car at once against the same snapshot,
an explicit-step stand-in for the continuous-time flow.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import ConvexRegion, contains, contains_many, unit_square
from .pricing import FleetState, PriceKind, PriceSpec, price, social_cost
from .search import candidate_margins, compass_directions_2d, pattern_search, polish_maxmin_single

log = logging.getLogger(__name__)


class DegenerateStateError(RuntimeError):
    """Raised when cars coincide or leave the region during a run."""


class ScheduleKind(str, enum.Enum):
    PERMUTED = "permuted"
    IID = "iid"
    CYCLIC = "cyclic"

    @classmethod
    def parse(cls, name) -> "ScheduleKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"p1": "permuted", "p2": "iid", "p3": "cyclic"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown schedule {name!r}; expected permuted (p1), iid (p2) or cyclic (p3)"
            ) from None


@dataclass(frozen=True)
class Schedule:
    """Selector of the car that moves at each step.

    Random schedules draw from a generator keyed on ``(seed, block)`` so
    that ``schedule_next`` is a pure function of its arguments.
    """

    kind: ScheduleKind = ScheduleKind.PERMUTED
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind.parse(self.kind))


def schedule_next(s: Schedule, n: int, k: int) -> int:
    """Index (0-based) of the car moving at step ``n`` (0-based)."""
    if k < 1:
        raise ValueError("empty fleet")
    if s.kind is ScheduleKind.CYCLIC:
        return n % k
    if s.kind is ScheduleKind.PERMUTED:
        rng = np.random.default_rng([s.seed, 1, n // k])
        return int(rng.permutation(k)[n % k])
    rng = np.random.default_rng([s.seed, 2, n])
    return int(rng.integers(k))


@dataclass(frozen=True)
class SolverParams:
    grid_resolution: int = 32
    refine_tolerance: float = 1e-9
    max_refine_iters: int = 200
    polish_starts: int = 4

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if not self.refine_tolerance > 0:
            raise ValueError("refine_tolerance must be > 0")
        if self.max_refine_iters < 1:
            raise ValueError("max_refine_iters must be >= 1")
        if self.polish_starts < 1:
            raise ValueError("polish_starts must be >= 1")


@dataclass(frozen=True)
class StepParams:
    s_max: float = 0.05
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError("s_max must be > 0")


def _grid_seeds(margins_fn, q: ConvexRegion, res: int, count: int) -> list[np.ndarray]:
    x0, y0, x1, y1 = q.bbox
    xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
    ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    vals = margins_fn(pts).reshape(res, res)
    padded = np.pad(vals, 1, constant_values=-np.inf)
    neighbours = [
        padded[1 + dx : 1 + dx + res, 1 + dy : 1 + dy + res]
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        if dx or dy
    ]
    peak = np.isfinite(vals) & np.all([vals >= nb for nb in neighbours], axis=0)
    idx = np.flatnonzero(peak.ravel())
    if idx.size == 0:
        idx = np.flatnonzero(np.isfinite(vals.ravel()))
    # stable sort: ties resolved by grid order
    order = idx[np.argsort(-vals.ravel()[idx], kind="stable")][:count]
    return [pts[i] for i in order]


def inner_argmin(spec: PriceSpec, state: FleetState, u: int, q: ConvexRegion, sp: SolverParams | None = None) -> np.ndarray:
    """Approximate minimizer of car ``u``'s price over ``q``, others fixed.

    Among candidates within ``refine_tolerance`` of the best price, the one
    closest to the car's current position wins; remaining ties go to the
    lexicographically smallest point.
    """
    sp = sp or SolverParams()
    pos = state.positions if isinstance(state, FleetState) else np.asarray(state, dtype=float)
    k = len(pos)
    if spec.kind is not PriceKind.USTAR_LOCAL and k < 2:
        raise ValueError("neighbourhood prices need at least two cars")
    m = spec.effective_neighborhood(k) if k > 1 else 0
    others = np.delete(pos, u, axis=0)
    current = pos[u].copy()

    def margins(ys):
        return candidate_margins(spec.kind, m, others, ys, q)

    seeds = _grid_seeds(margins, q, sp.grid_resolution, sp.polish_starts)
    candidates = [current] + list(seeds)
    x0, y0, x1, y1 = q.bbox
    h0 = max(x1 - x0, y1 - y0) / sp.grid_resolution
    for seed in [current] + seeds:
        if spec.kind is PriceKind.W:
            y, _, _ = pattern_search(
                lambda ys: -margins(ys),
                seed,
                step=h0,
                tol=sp.refine_tolerance,
                max_iters=sp.max_refine_iters,
                directions=compass_directions_2d(),
            )
        else:
            y = polish_maxmin_single(spec.kind, others, seed, q, sp.refine_tolerance, sp.max_refine_iters)
        candidates.append(y)

    trial = pos.copy()
    scored = []
    for y in candidates:
        if not contains(q, y):
            continue
        trial[u] = y
        scored.append((price(spec, trial, u, q), y))
    if not scored:
        raise RuntimeError("no feasible candidate inside the region")
    best = min(p for p, _ in scored)
    near = [y for p, y in scored if p <= best + sp.refine_tolerance]
    return min(near, key=lambda y: (math.hypot(*(y - current)), y[0], y[1])).copy()


def step(spec: PriceSpec, state: FleetState, u: int, q: ConvexRegion, p: StepParams | None = None) -> np.ndarray:
    """Displacement of car ``u``: toward its minimizer, at most ``s_max`` long."""
    p = p or StepParams()
    pos = state.positions if isinstance(state, FleetState) else np.asarray(state, dtype=float)
    d = inner_argmin(spec, state, u, q, p.solver) - pos[u]
    length = math.hypot(d[0], d[1])
    c = max(1.0, length / p.s_max) if math.isfinite(p.s_max) else 1.0
    return d / c


def is_fixed_point(spec: PriceSpec, state: FleetState, q: ConvexRegion, p: StepParams | None = None, eps: float = 1e-6) -> bool:
    return all(math.hypot(*step(spec, state, u, q, p)) < eps for u in range(len(state)))


@dataclass
class SimConfig:
    k: int = 9
    region: ConvexRegion = field(default_factory=unit_square)
    price: PriceSpec = field(default_factory=PriceSpec)
    schedule: ScheduleKind = ScheduleKind.PERMUTED
    mode: str = "async"
    steps: int = 900
    s_max: float = 0.05
    seed: int = 0
    solver: SolverParams = field(default_factory=SolverParams)
    record_every: int = 1
    eps_fix: float = 1e-6
    init: object = "random"

    def __post_init__(self):
        self.schedule = ScheduleKind.parse(self.schedule)
        if self.mode not in ("async", "sync"):
            raise ValueError(f"mode must be 'async' or 'sync', not {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1 (empty fleet)")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.s_max > 0:
            raise ValueError("s_max must be > 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not self.eps_fix > 0:
            raise ValueError("eps_fix must be > 0")

    @property
    def step_params(self) -> StepParams:
        return StepParams(self.s_max, self.solver)


def random_state(q: ConvexRegion, k: int, seed: int) -> FleetState:
    """``k`` points drawn uniformly in ``q`` by rejection from its bounding box."""
    rng = np.random.default_rng([seed, 0])
    x0, y0, x1, y1 = q.bbox
    out = np.empty((0, 2))
    while len(out) < k:
        pts = rng.uniform([x0, y0], [x1, y1], size=(2 * k, 2))
        pts = pts[contains_many(q, pts, eps=0.0)]
        out = np.vstack([out, pts])
    return FleetState(out[:k])


def initial_state(config: SimConfig) -> FleetState:
    init = config.init
    if isinstance(init, str):
        if init == "random":
            return random_state(config.region, config.k, config.seed)
        if init == "grid":
            from .optimum import analytic_square_grid

            i = math.isqrt(config.k)
            if i * i != config.k:
                raise ValueError("init 'grid' needs k to be a perfect square")
            x0, y0, x1, y1 = config.region.bbox
            g = analytic_square_grid(i).positions
            return FleetState(np.column_stack([x0 + g[:, 0] * (x1 - x0), y0 + g[:, 1] * (y1 - y0)]))
        raise ValueError(f"unknown init {init!r}")
    pos = np.asarray(init, dtype=float).reshape(-1, 2)
    if len(pos) != config.k:
        raise ValueError(f"init lists {len(pos)} positions but k = {config.k}")
    if not np.all(np.isfinite(pos)):
        raise ValueError("init positions must be finite")
    _check_state(pos, config.region, 0)
    return FleetState(pos)


@dataclass
class TraceRecord:
    n: int
    moved: int | str | None
    positions: np.ndarray
    social_cost: float

    def __eq__(self, other):
        return (
            isinstance(other, TraceRecord)
            and self.n == other.n
            and self.moved == other.moved
            and np.array_equal(self.positions, other.positions)
            and (self.social_cost == other.social_cost)
        )


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    terminal: bool = False

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def initial(self) -> TraceRecord:
        return self.records[0]


def _check_state(pos: np.ndarray, q: ConvexRegion, n: int) -> None:
    if not np.all(contains_many(q, pos)):
        bad = int(np.flatnonzero(~contains_many(q, pos))[0])
        raise DegenerateStateError(f"step {n}: car {bad} left the region at {pos[bad].tolist()}")
    if len(pos) > 1:
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(d2, np.inf)
        if d2.min() == 0.0:
            i, j = np.unravel_index(np.argmin(d2), d2.shape)
            raise DegenerateStateError(f"step {n}: cars {i} and {j} coincide at {pos[i].tolist()}")


def _record(trace: Trace, n: int, moved, pos: np.ndarray, q: ConvexRegion) -> None:
    snap = pos.copy()
    snap.setflags(write=False)
    trace.records.append(TraceRecord(n, moved, snap, social_cost(snap, q)))


def _prepare(config: SimConfig) -> tuple[np.ndarray, ConvexRegion]:
    q = config.region
    state = initial_state(config)
    pos = np.array(state.positions)
    _check_state(pos, q, 0)
    if config.price.kind is not PriceKind.USTAR_LOCAL and config.k < 2:
        raise ValueError("neighbourhood prices need at least two cars")
    if config.price.neighborhood > config.k - 1 and config.k > 1:
        log.warning(
            "neighborhood %d exceeds k-1 = %d; clamped to %d",
            config.price.neighborhood, config.k - 1, config.k - 1,
        )
    return pos, q


def simulate_async(config: SimConfig) -> Trace:
    """One car per step, picked by the configured schedule."""
    pos, q = _prepare(config)
    k = config.k
    sched = Schedule(config.schedule, config.seed)
    sp = config.step_params
    trace = Trace()
    _record(trace, 0, None, pos, q)
    settled: set[int] = set()
    n = 0
    while n < config.steps:
        u = schedule_next(sched, n, k)
        d = step(config.price, pos, u, q, sp)
        pos[u] = pos[u] + d
        n += 1
        _check_state(pos, q, n)
        if math.hypot(d[0], d[1]) < config.eps_fix:
            settled.add(u)
        else:
            settled.clear()
        done = len(settled) == k
        if done or n % config.record_every == 0 or n == config.steps:
            _record(trace, n, u, pos, q)
        if done:
            trace.terminal = True
            break
    return trace


def simulate_sync(config: SimConfig) -> Trace:
    """Every car moves at once against the same snapshot; ``steps`` counts rounds."""
    pos, q = _prepare(config)
    k = config.k
    sp = config.step_params
    trace = Trace()
    _record(trace, 0, None, pos, q)
    n = 0
    while n < config.steps:
        frozen = pos.copy()
        moves = np.array([step(config.price, frozen, u, q, sp) for u in range(k)])
        pos = frozen + moves
        n += 1
        _check_state(pos, q, n)
        done = bool(np.all(np.hypot(moves[:, 0], moves[:, 1]) < config.eps_fix))
        if done or n % config.record_every == 0 or n == config.steps:
            _record(trace, n, "all", pos, q)
        if done:
            trace.terminal = True
            break
    return trace


def simulate(config: SimConfig) -> Trace:
    return simulate_sync(config) if config.mode == "sync" else simulate_async(config)


def final_costs(traces: Sequence[Trace]) -> list[float]:
    return [t.final.social_cost for t in traces]
