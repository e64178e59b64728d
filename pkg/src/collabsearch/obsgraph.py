"""Observability graph and the search reward field.

The explorable area is discretised into free cells; obs(p) is the set of
cells visible from p's center at the sensing radius.  From a belief field
B over cells the search reward is built in four steps:

  observability O(p) = sum of B over obs(p)
  isolation     I(p) = (|obs(p)| / sum of O over obs(p)) * O(p)
  blend         S(p) = O/max(O) * w_obs + I/max(I) * w_iso
  reward        R(p) = ln(S/max(S) + 1)

Degenerate denominators (a fully explored map or region) yield zeros, never
errors.  The resulting field is exposed as a graph-field reward source of
final nature, applied in the path selection phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sources import GraphField, Kind, Nature, Policy, RewardSource, ShapeSpec
from .worldmap import OccupancyGrid, Pose

DEFAULT_W_OBS = 0.8
DEFAULT_W_ISO = 0.2


class ObservabilityGraph:
    """Per-cell visibility sets in CSR form, built against one grid."""

    def __init__(self, grid: OccupancyGrid, sense_radius: float,
                 indptr: np.ndarray, indices: np.ndarray):
        self.grid = grid
        self.sense_radius = float(sense_radius)
        self.indptr = indptr
        self.indices = indices
        self.counts = np.diff(indptr).astype(np.float64)

    @property
    def n_cells(self) -> int:
        return self.grid.n_free

    def obs(self, cid: int) -> np.ndarray:
        return self.indices[self.indptr[cid]:self.indptr[cid + 1]]


def build_graph(grid: OccupancyGrid, sense_radius: float) -> ObservabilityGraph:
    if sense_radius <= 0:
        raise ValueError("sense_radius must be > 0")
    r_cells = sense_radius / grid.resolution
    indptr, indices = kernels.build_visibility(
        grid.occupancy, grid._centers_uv, r_cells)
    return ObservabilityGraph(grid, sense_radius, indptr, indices)


_graph_cache: dict = {}


def cached_graph(grid: OccupancyGrid, sense_radius: float) -> ObservabilityGraph:
    """Graphs are immutable and expensive; share them per (grid, radius)."""
    key = (hash(grid), float(sense_radius), kernels.USING_NUMBA)
    g = _graph_cache.get(key)
    if g is None or g.grid != grid:
        g = build_graph(grid, sense_radius)
        _graph_cache[key] = g
    return g


@dataclass
class BeliefField:
    """Nonnegative prior mass of the object being in each cell.  Stored
    unnormalized: a uniform prior is 1 per unexplored cell, 0 in explored
    cells.  The scores are ratio-normalized so the scale is irrelevant."""

    values: np.ndarray
    revision: int = 0

    @classmethod
    def uniform(cls, grid: OccupancyGrid) -> "BeliefField":
        return cls(np.ones(grid.n_free, dtype=np.float64))

    def copy(self) -> "BeliefField":
        return BeliefField(self.values.copy(), self.revision)


def mark_explored(belief: BeliefField, cells) -> BeliefField:
    """Zero the belief on the given cells; other cells unchanged."""
    out = belief.values.copy()
    cells = np.asarray(list(cells) if isinstance(cells, set) else cells,
                       dtype=np.int64)
    if cells.size:
        out[cells] = 0.0
    return BeliefField(out, belief.revision + 1)


@dataclass
class SearchScores:
    O: np.ndarray
    I: np.ndarray
    S: np.ndarray
    R: np.ndarray
    w_obs: float
    w_iso: float


def observability(graph: ObservabilityGraph, belief: BeliefField) -> np.ndarray:
    """O(p): total belief mass visible from p."""
    return kernels.row_gather_sums(graph.indptr, graph.indices, belief.values)


def isolation(graph: ObservabilityGraph, O: np.ndarray) -> np.ndarray:
    """I(p): O(p) scaled by the inverse mean observability of p's visible
    area; zero where that area carries no observability at all."""
    sums = kernels.row_gather_sums(graph.indptr, graph.indices, O)
    out = np.zeros_like(O)
    nz = sums > 0.0
    out[nz] = (graph.counts[nz] / sums[nz]) * O[nz]
    return out


def search_reward(O: np.ndarray, I: np.ndarray,
                  w_obs: float = DEFAULT_W_OBS,
                  w_iso: float = DEFAULT_W_ISO) -> SearchScores:
    """Blend O and I into the log-scaled normalized reward R (max ln 2)."""
    if w_obs < 0 or w_iso < 0 or (w_obs == 0 and w_iso == 0):
        raise ValueError("weights must be >= 0 and not both zero")
    S = np.zeros_like(O)
    o_max = O.max() if O.size else 0.0
    i_max = I.max() if I.size else 0.0
    if o_max > 0:
        S += (O / o_max) * w_obs
    if i_max > 0:
        S += (I / i_max) * w_iso
    s_max = S.max() if S.size else 0.0
    R = np.log1p(S / s_max) if s_max > 0 else np.zeros_like(S)
    return SearchScores(O, I, S, R, w_obs, w_iso)


def compute_scores(graph: ObservabilityGraph, belief: BeliefField,
                   w_obs: float = DEFAULT_W_OBS,
                   w_iso: float = DEFAULT_W_ISO) -> SearchScores:
    O = observability(graph, belief)
    I = isolation(graph, O)
    return search_reward(O, I, w_obs, w_iso)


def as_source(scores, graph: ObservabilityGraph,
              source_id: str = "search-reward") -> RewardSource:
    """Wrap R as an attractive, final-nature, selection-policy source.
    The shape center marks the argmax cell (lowest id on ties), which is
    where source-seeded planner trees take root."""
    R = scores.R if isinstance(scores, SearchScores) else np.asarray(scores)
    peak = int(np.argmax(R))
    cx, cy = graph.grid.cell_center(peak)
    return RewardSource(
        id=source_id,
        kind=Kind.ATTRACTIVE,
        policies=frozenset({Policy.SELECTION}),
        nature=Nature.FINAL,
        model=GraphField(graph.grid, R),
        shape=ShapeSpec(Pose(cx, cy)),
    )


# ---------------------------------------------------------------------------
# Debug raster export
# ---------------------------------------------------------------------------

def export_rasters(graph: ObservabilityGraph, scores: SearchScores) -> dict:
    """Per-cell O/I/S/R grids in the map text format with float arrays;
    blocked cells carry null."""
    grid = graph.grid
    out = {"width": grid.width, "height": grid.height,
           "resolution": grid.resolution, "origin": list(grid.origin),
           "occupancy": ["".join("#" if b else "." for b in grid.occupancy[j])
                         for j in range(grid.height)]}
    for name, vals in (("observability", scores.O), ("isolation", scores.I),
                       ("blend", scores.S), ("reward", scores.R)):
        rows = []
        for j in range(grid.height):
            row = []
            for i in range(grid.width):
                fid = grid.free_index[j, i]
                row.append(None if fid < 0 else float(vals[fid]))
            rows.append(row)
        out[name] = rows
    return out


def write_rasters(graph: ObservabilityGraph, scores: SearchScores, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(export_rasters(graph, scores), f, sort_keys=True)
        f.write("\n")
