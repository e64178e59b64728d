"""Occupancy-grid world model: metric/cell conversion, line of sight,
radial visibility queries.

The grid is immutable after loading.  Everything that blocks motion also
blocks view; queries outside the grid are treated as blocked.  A world
point belongs to cell floor((p - origin) / resolution); points exactly on
a cell boundary belong to the higher-index cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# Free cells are enumerated row-major; a CellId is an index into that
# enumeration.
CellId = int


class MapFormatError(ValueError):
    """Raised when a map file does not follow the expected structure."""


@dataclass(frozen=True)
class Pose:
    """World-frame position.  Heading is carried for rendering only;
    sensing is 360 degrees and ignores it."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        h = self.heading
        if not (-math.pi <= h < math.pi):
            h = (h + math.pi) % (2.0 * math.pi) - math.pi
            object.__setattr__(self, "heading", h)

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


def _as_xy(p) -> tuple[float, float]:
    if isinstance(p, Pose):
        return p.x, p.y
    return float(p[0]), float(p[1])


class OccupancyGrid:
    """Static world geometry on a binary grid.

    occupancy is a (height, width) bool array, True = blocked.  origin is
    the world position of the corner of cell (0, 0).
    """

    def __init__(self, width: int, height: int, resolution: float,
                 origin: tuple[float, float], occupancy: np.ndarray):
        occupancy = np.asarray(occupancy, dtype=np.bool_)
        if occupancy.shape != (height, width):
            raise MapFormatError(
                f"occupancy shape {occupancy.shape} does not match "
                f"height*width ({height}, {width})")
        if resolution <= 0:
            raise MapFormatError("resolution must be > 0")
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        self.occupancy = occupancy
        self.occupancy.setflags(write=False)

        free_y, free_x = np.nonzero(~occupancy)
        if free_x.size == 0:
            raise MapFormatError("map has no free cells")
        # row-major free-cell enumeration
        self.n_free = int(free_x.size)
        self.free_cells = np.stack([free_x, free_y], axis=1).astype(np.int64)
        self.free_index = np.full((height, width), -1, dtype=np.int64)
        self.free_index[free_y, free_x] = np.arange(self.n_free)
        ox, oy = self.origin
        self.centers = np.empty((self.n_free, 2), dtype=np.float64)
        self.centers[:, 0] = ox + (free_x + 0.5) * self.resolution
        self.centers[:, 1] = oy + (free_y + 0.5) * self.resolution
        self._centers_uv = (self.free_cells + 0.5).astype(np.float64)

    # -- coordinate helpers -------------------------------------------------

    def to_cell_units(self, x: float, y: float) -> tuple[float, float]:
        ox, oy = self.origin
        return (x - ox) / self.resolution, (y - oy) / self.resolution

    def cell_of(self, x: float, y: float):
        """(cx, cy) of the cell containing the point, or None if outside."""
        u, v = self.to_cell_units(x, y)
        cx, cy = math.floor(u), math.floor(v)
        if 0 <= cx < self.width and 0 <= cy < self.height:
            return cx, cy
        return None

    def free_id_at(self, x: float, y: float) -> int:
        """Free-cell id at a world point, -1 if blocked or outside."""
        c = self.cell_of(x, y)
        if c is None:
            return -1
        return int(self.free_index[c[1], c[0]])

    def blocked_at(self, x: float, y: float) -> bool:
        c = self.cell_of(x, y)
        if c is None:
            return True
        return bool(self.occupancy[c[1], c[0]])

    def cell_center(self, cid: CellId) -> tuple[float, float]:
        return float(self.centers[cid, 0]), float(self.centers[cid, 1])

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, oy, ox + self.width * self.resolution,
                oy + self.height * self.resolution)

    @property
    def has_obstacles(self) -> bool:
        return bool(self.occupancy.any())

    def __eq__(self, other):
        return (isinstance(other, OccupancyGrid)
                and self.width == other.width
                and self.height == other.height
                and self.resolution == other.resolution
                and self.origin == other.origin
                and np.array_equal(self.occupancy, other.occupancy))

    def __hash__(self):
        return hash((self.width, self.height, self.resolution, self.origin,
                     self.occupancy.tobytes()))


# ---------------------------------------------------------------------------
# Map files
# ---------------------------------------------------------------------------

def parse_map_data(data: dict) -> OccupancyGrid:
    for key in ("width", "height", "resolution", "origin", "occupancy"):
        if key not in data:
            raise MapFormatError(f"missing key: {key}")
    width = data["width"]
    height = data["height"]
    if not isinstance(width, int) or not isinstance(height, int) \
            or width <= 0 or height <= 0:
        raise MapFormatError("width/height must be positive integers")
    origin = data["origin"]
    if not (isinstance(origin, (list, tuple)) and len(origin) == 2):
        raise MapFormatError("origin must be [x, y]")
    rows = data["occupancy"]
    if not isinstance(rows, list) or len(rows) != height:
        raise MapFormatError(
            f"occupancy must have {height} rows, got {len(rows)}")
    occ = np.zeros((height, width), dtype=np.bool_)
    for j, row in enumerate(rows):
        if isinstance(row, str):
            if len(row) != width:
                raise MapFormatError(
                    f"occupancy row {j} has length {len(row)}, expected {width}")
            bad = set(row) - {"#", "."}
            if bad:
                raise MapFormatError(
                    f"occupancy row {j} has invalid characters: {sorted(bad)}")
            occ[j] = [c == "#" for c in row]
        elif isinstance(row, list):
            # bitmap converter form: rows of 0/1 integers
            if len(row) != width:
                raise MapFormatError(
                    f"occupancy row {j} has length {len(row)}, expected {width}")
            if any(v not in (0, 1) for v in row):
                raise MapFormatError(f"occupancy row {j} must contain 0/1")
            occ[j] = [bool(v) for v in row]
        else:
            raise MapFormatError(f"occupancy row {j} must be string or list")
    return OccupancyGrid(width, height, float(data["resolution"]),
                         (float(origin[0]), float(origin[1])), occ)


def load_map(path) -> OccupancyGrid:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise MapFormatError(f"not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise MapFormatError("map file must be a JSON object")
    return parse_map_data(data)


def dump_map(grid: OccupancyGrid) -> dict:
    rows = ["".join("#" if b else "." for b in grid.occupancy[j])
            for j in range(grid.height)]
    return {"width": grid.width, "height": grid.height,
            "resolution": grid.resolution, "origin": list(grid.origin),
            "occupancy": rows}


def grid_from_rows(rows, resolution: float = 1.0,
                   origin=(0.0, 0.0)) -> OccupancyGrid:
    """Build a grid from '#'/'.' strings; rows[0] is the y=0 row."""
    return parse_map_data({"width": len(rows[0]), "height": len(rows),
                           "resolution": resolution, "origin": list(origin),
                           "occupancy": list(rows)})


# ---------------------------------------------------------------------------
# Visibility
# ---------------------------------------------------------------------------

def line_of_sight(grid: OccupancyGrid, a, b) -> bool:
    """True iff the segment a-b crosses no blocked cell.  Out-of-bounds
    endpoints count as blocked.  Symmetric in its arguments."""
    ax, ay = _as_xy(a)
    bx, by = _as_xy(b)
    u0, v0 = grid.to_cell_units(ax, ay)
    u1, v1 = grid.to_cell_units(bx, by)
    return kernels.los_free(grid.occupancy, u0, v0, u1, v1)


def visible_cells(grid: OccupancyGrid, p, radius: float) -> np.ndarray:
    """Free cells whose centers lie within radius of p and are in line of
    sight from p.  Always includes p's own cell when p is in free space;
    empty when p is inside a blocked cell."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    px, py = _as_xy(p)
    own = grid.free_id_at(px, py)
    if own < 0:
        return np.empty(0, dtype=np.int64)
    d2 = ((grid.centers[:, 0] - px) ** 2 + (grid.centers[:, 1] - py) ** 2)
    cand = np.nonzero(d2 <= radius * radius)[0]
    if cand.size:
        u0, v0 = grid.to_cell_units(px, py)
        vis = kernels.los_free_many(grid.occupancy, u0, v0,
                                    grid._centers_uv[cand, 0],
                                    grid._centers_uv[cand, 1])
        ids = cand[vis]
    else:
        ids = np.empty(0, dtype=np.int64)
    if own not in ids:
        ids = np.append(ids, own)
        ids.sort()
    return ids.astype(np.int64)
