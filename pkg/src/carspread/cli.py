"""Command-line harness: ``carspread simulate|render|optimum|compare``.

Exit codes: 0 success, 2 config/usage error, 3 degeneracy abort.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__
from .dynamics import DegenerateStateError, SimConfig, simulate
from .geometry import GeometryError, unit_square
from .optimum import Objective, analytic_square_optimum_cost, format_result, global_search_optimum
from .pricing import PriceKind
from .render import render_trace
from .runio import (
    COMPARE_KEYS,
    SIM_KEYS,
    ConfigError,
    RunManifest,
    config_echo,
    config_from_mapping,
    format_trace,
    load_config_file,
    parse_region,
    read_trace,
)

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3

log = logging.getLogger("carspread")

OVERRIDES = [
    ("k", int),
    ("price", str),
    ("neighbors", int),
    ("schedule", str),
    ("mode", str),
    ("steps", int),
    ("smax", float),
    ("region", str),
]


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config (or a manifest from an earlier run)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    for name, typ in OVERRIDES:
        p.add_argument(f"--{name}", type=typ, default=None)


def _raw_config(args) -> tuple[dict, Path | None]:
    raw, base = {}, None
    if args.config is not None:
        raw = load_config_file(args.config)
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a mapping")
        if isinstance(raw.get("config"), dict):
            raw = dict(raw["config"])
        base = args.config.parent
    for name, _ in OVERRIDES + [("seed", int)]:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    return raw, base


def _summary_line(label: str, trace, cfg: SimConfig) -> str:
    fin = trace.final
    return (
        f"{label} k={cfg.k} mode={cfg.mode} steps_run={fin.n} "
        f"final_social_cost={fin.social_cost:.17g} fixed_point={trace.terminal}"
    )


def run_one(cfg: SimConfig, out: Path, stem: str = "trace", svg: bool = False) -> tuple[RunManifest, object]:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    trace = simulate(cfg)
    wall = time.perf_counter() - t0
    trace_path = out / f"{stem}.csv"
    trace_path.write_text(format_trace(trace))
    summary_path = out / f"{stem}.summary.txt"
    summary_path.write_text(_summary_line(cfg.price.label(), trace, cfg) + "\n")
    image_path = None
    if svg:
        image_path = out / f"{stem}.svg"
        image_path.write_text(render_trace(trace, cfg.region, title=cfg.price.label()).svg)
    manifest = RunManifest(
        config=config_echo(cfg),
        artifacts={
            "trace": trace_path.name,
            "image": image_path.name if image_path else None,
            "summary": summary_path.name,
        },
        wall_clock_seconds=wall,
        version=__version__,
        terminal=trace.terminal,
        final_social_cost=float(trace.final.social_cost),
        steps_run=trace.final.n,
    )
    (out / f"{stem}.manifest.yaml").write_text(manifest.to_yaml())
    return manifest, trace


def cmd_simulate(args) -> int:
    raw, base = _raw_config(args)
    cfg = config_from_mapping(raw, base)
    _, trace = run_one(cfg, args.out, svg=args.svg)
    print(_summary_line(cfg.price.label(), trace, cfg))
    return EXIT_OK


def cmd_render(args) -> int:
    trace_path = Path(args.trace)
    region = unit_square()
    manifest_path = trace_path.with_name(trace_path.name.replace(".csv", ".manifest.yaml"))
    if args.region is not None:
        region = parse_region(args.region)
    elif manifest_path.exists():
        region = parse_region(RunManifest.from_yaml(manifest_path.read_text()).config.get("region", "unit-square"))
    try:
        trace = read_trace(trace_path)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read trace {trace_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fig = render_trace(trace, region, title=args.title)
    out = args.output or trace_path.with_suffix(".svg")
    Path(out).write_text(fig.svg)
    print(f"wrote {out} cells={len(fig.cells)}")
    return EXIT_OK


def cmd_optimum(args) -> int:
    q = parse_region(args.region)
    result = global_search_optimum(args.objective, q, args.k, args.budget, args.seed, args.neighbors)
    summary, positions = format_result(result, q)
    print(summary)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "optimum.positions.txt").write_text(positions)
    (args.out / "optimum.summary.txt").write_text(summary + "\n")
    return EXIT_OK


def reference_optimum(cfg: SimConfig, budget: int) -> tuple[float, str]:
    """C* for the comparison table: analytic on square grids, else best found."""
    i = math.isqrt(cfg.k)
    if cfg.region == unit_square() and i * i == cfg.k:
        return analytic_square_optimum_cost(i), "analytic"
    res = global_search_optimum(Objective.SOCIAL_MAX, cfg.region, cfg.k, budget, cfg.seed)
    return res.cost, "best-found"


def cmd_compare(args) -> int:
    raw, base = _raw_config(args)
    for key in list(raw):
        if key not in COMPARE_KEYS and key not in SIM_KEYS:
            raise ConfigError(key, "unknown key")
    specs = raw.pop("specs", None)
    budget = int(raw.pop("optimum_budget", 200_000))
    if not isinstance(specs, list) or not specs:
        raise ConfigError("specs", "expected a non-empty list of {price, neighbors} entries")
    base_cfg = config_from_mapping(raw, base)
    c_star, how = reference_optimum(base_cfg, budget)
    rows = []
    for idx, entry in enumerate(specs):
        if not isinstance(entry, dict):
            raise ConfigError(f"specs[{idx}]", "expected a mapping")
        merged = dict(raw)
        for key, value in entry.items():
            if key not in {"price", "neighbors", "steps", "mode", "schedule", "smax"}:
                raise ConfigError(f"specs[{idx}].{key}", "unknown key")
            merged[key] = value
        cfg = config_from_mapping(merged, base)
        _, trace = run_one(cfg, args.out, stem=f"compare_{idx}_{cfg.price.kind.value}", svg=args.svg)
        ratio = trace.final.social_cost / c_star
        rows.append((cfg.price.label(), trace.final.social_cost, c_star, ratio, trace.terminal))
        if cfg.price.kind is PriceKind.V and ratio > 1.1:
            log.warning("price V ended %.1f%% above the optimum", 100 * (ratio - 1))
    header = f"{'price':<12} {'final_cost':>12} {'C*':>10} {'ratio':>8} fixed_point"
    lines = [header] + [
        f"{label:<12} {cost:>12.6f} {cs:>10.6f} {ratio:>8.4f} {term}" for label, cost, cs, ratio, term in rows
    ]
    table = "\n".join(lines) + f"\n# C* source: {how}\n"
    print(table, end="")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "compare.txt").write_text(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carspread", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the best-response dynamics and write a trace")
    _add_overrides(p)
    p.add_argument("--svg", action="store_true", help="also render the final state")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="draw a trace as SVG")
    p.add_argument("trace", type=Path)
    p.add_argument("output", type=Path, nargs="?")
    p.add_argument("--region", default=None)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("optimum", help="search for the social optimum")
    p.add_argument("--objective", default="social_max", choices=[o.value for o in Objective])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--region", default="unit-square")
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neighbors", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_optimum)

    p = sub.add_parser("compare", help="run several price specs from identical initial states")
    _add_overrides(p)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateStateError as exc:
        print(f"degenerate state, run aborted: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
