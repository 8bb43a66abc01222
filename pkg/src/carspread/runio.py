"""Config files, trace CSVs and run manifests."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .dynamics import ScheduleKind, SimConfig, SolverParams, Trace, TraceRecord
from .geometry import ConvexRegion, GeometryError, load_region, unit_square
from .pricing import PriceKind, PriceSpec

TRACE_COLUMNS = ["n", "moved_car", "car_id", "x", "y", "social_cost"]

SIM_KEYS = {
    "k", "region", "price", "neighbors", "schedule", "mode", "steps", "smax",
    "seed", "record_every", "eps_fix", "init", "solver",
}
SOLVER_KEYS = {"grid_resolution", "refine_tolerance", "max_refine_iters", "polish_starts"}
COMPARE_KEYS = {"specs", "optimum_budget"}


class ConfigError(ValueError):
    """A config value is missing, unknown or invalid; ``key`` names it."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _float(key: str, value) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None
    if math.isnan(out):
        raise ConfigError(key, "NaN is not allowed")
    return out


def _int(key: str, value) -> int:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected an integer, got {value!r}") from None
    if out != _float(key, value):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return out


def parse_region(value, base: Path | None = None) -> ConvexRegion:
    try:
        if isinstance(value, str):
            if value != "unit-square" and base is not None and not Path(value).is_absolute():
                value = str(base / value)
            return load_region(value)
        return ConvexRegion(value)
    except (OSError, GeometryError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError("region", str(exc)) from None


def region_echo(q: ConvexRegion):
    if q == unit_square():
        return "unit-square"
    return [[v.x, v.y] for v in q.vertices]


def config_from_mapping(raw: dict[str, Any], base: Path | None = None, extra_keys: set[str] = frozenset()) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    for key in raw:
        if key not in SIM_KEYS and key not in extra_keys:
            raise ConfigError(key, "unknown key")
    kw: dict[str, Any] = {}
    if "k" in raw:
        kw["k"] = _int("k", raw["k"])
        if kw["k"] < 1:
            raise ConfigError("k", "fleet must have at least one car")
    if "region" in raw:
        kw["region"] = parse_region(raw["region"], base)
    try:
        kind = PriceKind.parse(raw.get("price", "ustar"))
    except ValueError as exc:
        raise ConfigError("price", str(exc)) from None
    neighbors = _int("neighbors", raw.get("neighbors", 1))
    if neighbors < 1:
        raise ConfigError("neighbors", "must be >= 1")
    kw["price"] = PriceSpec(kind, neighbors)

    checks = [
        ("steps", "steps", _int, lambda v: v >= 0, "must be >= 0"),
        ("seed", "seed", _int, lambda v: True, ""),
        ("record_every", "record_every", _int, lambda v: v >= 1, "must be >= 1"),
        ("smax", "s_max", _float, lambda v: v > 0, "must be > 0"),
        ("eps_fix", "eps_fix", _float, lambda v: v > 0, "must be > 0"),
    ]
    for key, field_name, conv, ok, why in checks:
        if key in raw:
            value = conv(key, raw[key])
            if not ok(value):
                raise ConfigError(key, why)
            kw[field_name] = value
    if "schedule" in raw:
        try:
            kw["schedule"] = ScheduleKind.parse(raw["schedule"])
        except ValueError as exc:
            raise ConfigError("schedule", str(exc)) from None
    if "mode" in raw:
        if raw["mode"] not in ("async", "sync"):
            raise ConfigError("mode", "expected 'async' or 'sync'")
        kw["mode"] = raw["mode"]
    if "init" in raw:
        init = raw["init"]
        if isinstance(init, str):
            if init not in ("random", "grid"):
                raise ConfigError("init", "expected 'random', 'grid' or a list of [x, y] pairs")
        else:
            try:
                init = np.asarray(init, dtype=float).reshape(-1, 2).tolist()
            except (TypeError, ValueError):
                raise ConfigError("init", "expected 'random', 'grid' or a list of [x, y] pairs") from None
        kw["init"] = init
    if "solver" in raw:
        kw["solver"] = _solver(raw["solver"])
    return SimConfig(**kw)


def _solver(sol) -> SolverParams:
    sol = sol or {}
    if not isinstance(sol, dict):
        raise ConfigError("solver", "expected a mapping")
    for key in sol:
        if key not in SOLVER_KEYS:
            raise ConfigError(f"solver.{key}", "unknown key")
    defaults = SolverParams()
    values = {
        "grid_resolution": _int("solver.grid_resolution", sol.get("grid_resolution", defaults.grid_resolution)),
        "refine_tolerance": _float("solver.refine_tolerance", sol.get("refine_tolerance", defaults.refine_tolerance)),
        "max_refine_iters": _int("solver.max_refine_iters", sol.get("max_refine_iters", defaults.max_refine_iters)),
        "polish_starts": _int("solver.polish_starts", sol.get("polish_starts", defaults.polish_starts)),
    }
    try:
        return SolverParams(**values)
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(f"solver.{key}", str(exc)) from None


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"malformed YAML in {path}: {exc}") from None
    return raw or {}


def config_echo(config: SimConfig) -> dict[str, Any]:
    init = config.init
    if not isinstance(init, str):
        init = np.asarray(init, dtype=float).tolist()
    return {
        "k": config.k,
        "region": region_echo(config.region),
        "price": config.price.kind.value,
        "neighbors": config.price.neighborhood,
        "schedule": config.schedule.value,
        "mode": config.mode,
        "steps": config.steps,
        "smax": config.s_max,
        "seed": config.seed,
        "record_every": config.record_every,
        "eps_fix": config.eps_fix,
        "init": init,
        "solver": {
            "grid_resolution": config.solver.grid_resolution,
            "refine_tolerance": config.solver.refine_tolerance,
            "max_refine_iters": config.solver.max_refine_iters,
            "polish_starts": config.solver.polish_starts,
        },
    }


def format_trace(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for rec in trace.records:
        moved = "-" if rec.moved is None else rec.moved
        cost = _fmt(rec.social_cost)
        for car, (x, y) in enumerate(rec.positions):
            w.writerow([rec.n, moved, car, _fmt(x), _fmt(y), cost])
    return buf.getvalue()


def write_trace(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(format_trace(trace))


def parse_trace(text: str, terminal: bool = False) -> Trace:
    """Inverse of :func:`format_trace`. The fixed-point flag lives in the manifest."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != TRACE_COLUMNS:
        raise ValueError(f"trace must start with the header {','.join(TRACE_COLUMNS)}")
    records: list[TraceRecord] = []
    cur_key, cur_rows = None, []

    def flush():
        if cur_key is None:
            return
        n, moved, cost = cur_key
        pos = np.array([[float(r[3]), float(r[4])] for r in cur_rows])
        pos.setflags(write=False)
        records.append(TraceRecord(n, moved, pos, cost))

    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(TRACE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields")
        n = int(row[0])
        moved = None if row[1] == "-" else ("all" if row[1] == "all" else int(row[1]))
        key = (n, moved, float(row[5]))
        car = int(row[2])
        if key != cur_key or car == 0:
            flush()
            cur_key, cur_rows = key, []
        if car != len(cur_rows):
            raise ValueError(f"line {lineno}: car ids must run 0..k-1 within a step")
        cur_rows.append(row)
    flush()
    if not records:
        raise ValueError("trace has no rows")
    return Trace(records, terminal)


def read_trace(path: str | Path, terminal: bool = False) -> Trace:
    return parse_trace(Path(path).read_text(), terminal)


@dataclass
class RunManifest:
    config: dict[str, Any]
    artifacts: dict[str, str | None]
    wall_clock_seconds: float
    version: str = __version__
    terminal: bool = False
    final_social_cost: float | None = None
    steps_run: int | None = None

    def to_yaml(self) -> str:
        doc = {
            "version": self.version,
            "config": self.config,
            "artifacts": self.artifacts,
            "wall_clock_seconds": round(self.wall_clock_seconds, 3),
            "terminal": self.terminal,
            "final_social_cost": self.final_social_cost,
            "steps_run": self.steps_run,
        }
        return yaml.safe_dump(doc, sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "RunManifest":
        doc = yaml.safe_load(text)
        return cls(
            config=doc["config"],
            artifacts=doc.get("artifacts", {}),
            wall_clock_seconds=doc.get("wall_clock_seconds", 0.0),
            version=doc.get("version", __version__),
            terminal=bool(doc.get("terminal", False)),
            final_social_cost=doc.get("final_social_cost"),
            steps_run=doc.get("steps_run"),
        )
