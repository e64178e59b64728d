#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each workload in a subprocess per backend (the backend is chosen at
import time from COLLABSEARCH_NO_NUMBA) and prints a comparison table.

    python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

SRC = str(Path(__file__).resolve().parent.parent / "src")

WORKER = r"""
import json, sys, time
sys.path.insert(0, {src!r})
import numpy as np
import collabsearch.kernels as K
from collabsearch.obsgraph import BeliefField, build_graph, compute_scores
from collabsearch.planner import PlannerConfig, plan
from collabsearch.sources import (GaussianDecay, Kind, Nature, RewardSource,
                                  ShapeSpec, SourceRegistry)
from collabsearch.worldmap import Pose, grid_from_rows, visible_cells

quick = {quick}

rng = np.random.default_rng(0)
side = 28 if quick else 40
occ = rng.random((side, side)) < 0.2
occ[side // 2, side // 2] = False
rows = ["".join("#" if c else "." for c in r) for r in occ]
grid = grid_from_rows(rows)

reg = SourceRegistry()
reg.add(RewardSource("goal", Kind.ATTRACTIVE, frozenset({{"selection"}}),
                     Nature.FINAL, GaussianDecay(50.0, 2.0),
                     ShapeSpec(Pose(side - 2.5, side - 2.5))))
reg.add(RewardSource("avoid", Kind.REPULSIVE,
                     frozenset({{"generation", "selection"}}),
                     Nature.CUMULATIVE, GaussianDecay(2.0, 2.0),
                     ShapeSpec(Pose(side / 2, side / 2), 3.0)))
snap = reg.snapshot()
start = None
for cid in range(grid.n_free):
    x, y = grid.cell_center(cid)
    if x < 4 and y < 4:
        start = (x, y)
        break

def timed(fn, repeat):
    fn()  # warm (jit compile, caches)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat

results = {{"backend": "numba" if K.USING_NUMBA else "numpy"}}

p0 = grid.cell_center(0)
results["visible_cells (1 pose)"] = timed(
    lambda: visible_cells(grid, p0, 8.0), 20 if quick else 50)

results["observability graph build"] = timed(
    lambda: build_graph(grid, 8.0), 2 if quick else 3)

graph = build_graph(grid, 8.0)
belief = BeliefField(np.where(rng.random(grid.n_free) < 0.4, 0.0, 1.0))
results["search scores"] = timed(
    lambda: compute_scores(graph, belief), 50)

nodes = 1000 if quick else 4000
cfg = PlannerConfig(max_nodes=nodes, rng_seed=1, neighbor_radius=2.0)
results[f"plan ({{nodes}} nodes)"] = timed(
    lambda: plan(snap, start, grid, cfg), 2 if quick else 3)

print(json.dumps(results))
"""


def run_backend(flag: str, quick: bool) -> dict:
    env = dict(os.environ, COLLABSEARCH_NO_NUMBA=flag)
    script = WORKER.format(src=SRC, quick=quick)
    out = subprocess.run([sys.executable, "-c", script], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller map and node counts")
    args = ap.parse_args()

    print("running numba backend ...")
    nb = run_backend("0", args.quick)
    print("running numpy fallback ...")
    np_ = run_backend("1", args.quick)
    assert nb.pop("backend") == "numba"
    np_.pop("backend")

    width = max(len(k) for k in nb)
    print(f"\n{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  speedup")
    print("-" * (width + 34))
    for key in nb:
        a, b = nb[key], np_[key]
        print(f"{key:<{width}}  {a * 1e3:>8.2f}ms  {b * 1e3:>8.2f}ms  "
              f"{b / a:>6.1f}x")


if __name__ == "__main__":
    main()
