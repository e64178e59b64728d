"""Command-line entry points: batch experiments, the live session service,
log analysis, and search-field raster export."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics
from .batch import SETUPS, run_batch
from .simengine import load_config
from .worldmap import load_map


def _apply_planner_overrides(config, args):
    pl = config.planner
    if args.planner_max_nodes is not None:
        pl = replace(pl, max_nodes=args.planner_max_nodes)
    if args.planner_seed is not None:
        pl = replace(pl, rng_seed=args.planner_seed)
    if args.planner_lambda is not None:
        pl = replace(pl, conn_rate=args.planner_lambda)
    return replace(config, planner=pl)


def _add_planner_flags(p):
    p.add_argument("--planner.max-nodes", dest="planner_max_nodes",
                   type=int, default=None)
    p.add_argument("--planner.seed", dest="planner_seed", type=int,
                   default=None)
    p.add_argument("--planner.lambda", dest="planner_lambda", type=float,
                   default=None)


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    config = _apply_planner_overrides(config, args)
    out = Path(args.out or os.environ.get("COLLABSEARCH_LOG_DIR", "logs"))
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        print(f"error: output directory not writable: {e}", file=sys.stderr)
        return 1
    run_batch(config, args.setup, args.episodes, out,
              seed_base=args.seed)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    config = _apply_planner_overrides(config, args)
    if args.level:
        config = replace(config, comm_level=args.level)
    host, _, port = args.bind.partition(":")
    serve(config, host or "127.0.0.1", int(port or 8000),
          log_dir=args.out or os.environ.get("COLLABSEARCH_LOG_DIR"))
    return 0


def cmd_analyze(args) -> int:
    logs = []
    for pattern in args.logs:
        p = Path(pattern)
        paths = sorted(p.glob(f"*{metrics.LOG_SUFFIX}")) if p.is_dir() \
            else [p]
        for path in paths:
            logs.append(metrics.read_eplog(path))
    if not logs:
        print("error: no logs found", file=sys.stderr)
        return 1
    rows = metrics.aggregate(logs, window=args.window)
    text = metrics.aggregate_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_render_field(args) -> int:
    import numpy as np

    from .obsgraph import (BeliefField, build_graph, compute_scores,
                           write_rasters)

    grid = load_map(args.map)
    graph = build_graph(grid, args.sense_radius)
    belief = BeliefField.uniform(grid)
    if args.explored:
        cells = json.loads(Path(args.explored).read_text())
        vals = belief.values
        vals[np.asarray(cells, dtype=int)] = 0.0
        belief = BeliefField(vals)
    scores = compute_scores(graph, belief, args.w_obs, args.w_iso)
    write_rasters(graph, scores, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="collabsearch",
        description="Human-robot collaborative search simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run headless episode batches")
    p.add_argument("--config", required=True)
    p.add_argument("--setup", required=True, choices=SETUPS)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_planner_flags(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="serve live browser sessions")
    p.add_argument("--config", required=True)
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--level", choices=("L1", "L2", "L3"), default=None)
    p.add_argument("--out", default=None, help="episode log directory")
    p.add_argument("--seed", type=int, default=None)
    _add_planner_flags(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("analyze", help="aggregate episode logs")
    p.add_argument("logs", nargs="+",
                   help="log files or directories of .eplog files")
    p.add_argument("--out", default=None)
    p.add_argument("--window", type=float, default=5.0,
                   help="concurrent-activity window seconds")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("render-field",
                       help="export observability/isolation/reward rasters")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sense-radius", type=float, default=8.0)
    p.add_argument("--w-obs", type=float, default=0.8)
    p.add_argument("--w-iso", type=float, default=0.2)
    p.add_argument("--explored", default=None,
                   help="JSON file with explored cell ids")
    p.set_defaults(fn=cmd_render_field)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
