"""Headless experiment batches: baselines and scripted-collaborative runs.

Episodes are distributed round-robin over the configured origins and
seeded from a base seed, so a batch is reproducible byte for byte.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

from . import metrics
from .simengine import EpisodeConfig, run_episode

SETUPS = ("robot-only", "human-only", "collab-L1", "collab-L2", "collab-L3")


def configure_setup(config: EpisodeConfig, setup: str) -> EpisodeConfig:
    """Specialize a base config for one experimental setup.  Individual
    baselines run a single agent; collaborative setups run both with the
    scripted human and the given communication level."""
    if setup not in SETUPS:
        raise ValueError(f"unknown setup: {setup!r} (expected one of "
                         f"{', '.join(SETUPS)})")
    if setup == "robot-only":
        return replace(config, human_enabled=False, comm_level="L1")
    if setup == "human-only":
        return replace(config, robot_enabled=False, comm_level="L1")
    level = setup.split("-")[1]
    return replace(config, comm_level=level)


def episode_seed(base_seed: int, index: int) -> int:
    return base_seed + index


def run_batch(config: EpisodeConfig, setup: str, episodes: int,
              out_dir, seed_base: int | None = None,
              log=print) -> list[Path]:
    """Run seeded episodes round-robin over origins, write one .eplog per
    episode plus an aggregate table.  Returns the log paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = config.seed if seed_base is None else seed_base
    origin_labels = sorted(config.origins)
    paths = []
    logs = []
    if episodes == 0:
        log("warning: zero episodes requested, aggregating nothing")
    for i in range(episodes):
        origin = origin_labels[i % len(origin_labels)]
        cfg = configure_setup(
            replace(config, origin=origin, seed=episode_seed(base, i)),
            setup)
        state = run_episode(cfg, human_source="scripted"
                            if cfg.human_enabled else None)
        eplog = metrics.log_from_state(state, cfg, setup=setup)
        path = out_dir / f"{setup}_{origin}_{i:03d}{metrics.LOG_SUFFIX}"
        metrics.write_eplog(path, eplog.header, eplog.events)
        paths.append(path)
        logs.append(eplog)
        log(f"episode {i + 1}/{episodes} origin={origin} "
            f"status={state.status} t={state.clock:.1f}s "
            f"explored={state.explored_fraction:.2f}")
    rows = metrics.aggregate(logs)
    (out_dir / "aggregate.csv").write_text(metrics.aggregate_csv(rows),
                                           encoding="utf-8")
    return paths
