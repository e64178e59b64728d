"""Episode logs and the comparison quantities derived from them.

Logs are line-delimited JSON: a schema-versioned header line, then one
event per line in time order, ending with a termination record.  The
analysis side computes search-progress curves, time-to-fraction,
time-to-find and the concurrent-activity score (fraction of time windows
in which both agents made actual exploration progress).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
LOG_SUFFIX = ".eplog"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class EpisodeLog:
    header: dict
    events: list

    @property
    def n_free(self) -> int:
        return self.header["n_free"]

    @property
    def t_end(self) -> float:
        for ev in reversed(self.events):
            if ev["e"] == "end":
                return float(ev["t"])
        if self.events:
            return float(self.events[-1]["t"])
        return 0.0

    @property
    def status(self) -> str | None:
        for ev in reversed(self.events):
            if ev["e"] == "end":
                return ev["status"]
        return None

    def validate(self):
        ts = [ev["t"] for ev in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("event timestamps are not ordered")
        if self.events and self.events[-1]["e"] != "end":
            raise ValueError("termination record missing or not last")


def make_header(config_dict: dict, seed: int, n_free: int,
                setup: str = "", build: str = "") -> dict:
    from . import __version__
    return {"schema": SCHEMA_VERSION, "config": config_dict, "seed": seed,
            "n_free": n_free, "setup": setup,
            "build": build or f"collabsearch-{__version__}",
            "initial_fraction": 0.0}


def write_eplog(path, header: dict, events: list):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(_dump(header) + "\n")
        for ev in events:
            f.write(_dump(ev) + "\n")


def read_eplog(path) -> EpisodeLog:
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln]
    if not lines:
        raise ValueError(f"empty log file: {path}")
    return EpisodeLog(json.loads(lines[0]),
                      [json.loads(ln) for ln in lines[1:]])


def log_from_state(state, config, setup: str = "") -> EpisodeLog:
    header = make_header(config.to_dict(), config.seed,
                         config.grid.n_free, setup)
    events = state.events
    if events and events[0]["e"] == "tick" and events[0]["t"] == 0.0:
        n0 = len(set(events[0]["rn"]) | set(events[0]["hn"]))
        header["initial_fraction"] = n0 / config.grid.n_free
    return EpisodeLog(header, events)


# ---------------------------------------------------------------------------
# Progress curves
# ---------------------------------------------------------------------------

@dataclass
class ProgressCurve:
    by: str                      # total | robot | human
    samples: list                # [(t, fraction)], non-decreasing

    def fraction_at(self, t: float) -> float:
        f = self.samples[0][1] if self.samples else 0.0
        for st, sf in self.samples:
            if st > t:
                break
            f = sf
        return f

    @property
    def final(self) -> float:
        return self.samples[-1][1] if self.samples else 0.0

    def time_to_fraction(self, target: float) -> float | None:
        for st, sf in self.samples:
            if sf >= target:
                return st
        return None

    def downsampled(self, hz: float = 1.0) -> "ProgressCurve":
        """Per-tick curves thinned for plotting: one sample per 1/hz
        bucket (the last in each), endpoints kept."""
        if hz <= 0:
            raise ValueError("hz must be > 0")
        if not self.samples:
            return ProgressCurve(self.by, [])
        period = 1.0 / hz
        out = []
        bucket = None
        for t, f in self.samples:
            b = math.floor(t / period)
            if bucket is None or b != bucket:
                out.append((t, f))
                bucket = b
            else:
                out[-1] = (t, f)
        return ProgressCurve(self.by, out)


def progress(log: EpisodeLog, by: str = "total") -> ProgressCurve:
    """Cumulative unique-cell attribution.  A cell first seen by both
    agents in the same tick counts on both individual curves but once on
    the total."""
    if by not in ("total", "robot", "human"):
        raise ValueError(f"unknown attribution: {by!r}")
    n = log.n_free
    seen: set = set()
    samples = []
    got_any = False
    for ev in log.events:
        if ev["e"] != "tick":
            continue
        got_any = True
        if by == "total":
            new = set(ev["rn"]) | set(ev["hn"])
        elif by == "robot":
            new = set(ev["rn"])
        else:
            new = set(ev["hn"])
        seen |= new
        samples.append((float(ev["t"]), len(seen) / n))
    if not got_any:
        samples = [(0.0, float(log.header.get("initial_fraction", 0.0)))]
    return ProgressCurve(by, samples)


# ---------------------------------------------------------------------------
# Concurrent activity
# ---------------------------------------------------------------------------

@dataclass
class ConcurrencyScore:
    window: float
    score: float
    windows_active: int
    windows_total: int


def concurrent_activity(log: EpisodeLog, window: float = 5.0) \
        -> ConcurrencyScore:
    """Partition [0, t_end] into consecutive windows; the score is the
    fraction of windows in which both agents newly explored at least one
    cell."""
    if window <= 0:
        raise ValueError("window must be > 0")
    t_end = log.t_end
    nwin = max(1, math.ceil(t_end / window - 1e-12))
    robot_hit = [False] * nwin
    human_hit = [False] * nwin
    for ev in log.events:
        if ev["e"] != "tick":
            continue
        w = min(int(float(ev["t"]) / window), nwin - 1)
        if ev["rn"]:
            robot_hit[w] = True
        if ev["hn"]:
            human_hit[w] = True
    active = sum(1 for r, h in zip(robot_hit, human_hit) if r and h)
    return ConcurrencyScore(window, active / nwin, active, nwin)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _median_iqr(values):
    vals = sorted(v for v in values if v is not None)
    if not vals:
        return None, None, None
    arr = np.array(vals, dtype=float)
    return (float(np.median(arr)),
            float(np.percentile(arr, 25)),
            float(np.percentile(arr, 75)))


def aggregate(logs, window: float = 5.0) -> list[dict]:
    """Per (setup, origin): median and IQR of time-to-50%, time-to-90%,
    time-to-find, and the concurrency score."""
    groups: dict = {}
    for log in logs:
        key = (log.header.get("setup", ""),
               log.header.get("config", {}).get("origin", ""))
        groups.setdefault(key, []).append(log)
    rows = []
    for (setup, origin) in sorted(groups):
        ls = groups[(setup, origin)]
        total = [progress(lg, "total") for lg in ls]
        t50 = [c.time_to_fraction(0.5) for c in total]
        t90 = [c.time_to_fraction(0.9) for c in total]
        tfind = [lg.t_end if (lg.status or "").startswith("found") else None
                 for lg in ls]
        conc = [concurrent_activity(lg, window).score for lg in ls]
        row = {"setup": setup, "origin": origin, "episodes": len(ls)}
        for name, vals in (("t50", t50), ("t90", t90), ("t_find", tfind),
                           ("concurrency", conc)):
            med, q1, q3 = _median_iqr(vals)
            row[f"{name}_median"] = med
            row[f"{name}_q1"] = q1
            row[f"{name}_q3"] = q3
        rows.append(row)
    return rows


AGG_COLUMNS = ["setup", "origin", "episodes",
               "t50_median", "t50_q1", "t50_q3",
               "t90_median", "t90_q1", "t90_q3",
               "t_find_median", "t_find_q1", "t_find_q3",
               "concurrency_median", "concurrency_q1", "concurrency_q3"]


def aggregate_csv(rows: list[dict]) -> str:
    out = [",".join(AGG_COLUMNS)]
    for row in rows:
        cells = []
        for col in AGG_COLUMNS:
            v = row.get(col)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(f"{v:.4f}")
            else:
                cells.append(str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
