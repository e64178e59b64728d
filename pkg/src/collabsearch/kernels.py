"""Hot numeric kernels: grid ray walking, visibility, and tree expansion.

Two interchangeable backends live here.  The default is numba ``@njit``
machine code; setting the environment variable ``COLLABSEARCH_NO_NUMBA=1``
(or running without numba installed) selects a pure-numpy path instead.
Both backends implement identical semantics; ``benchmarks/bench_kernels.py``
compares their speed.

Geometry convention: line-of-sight functions work in *cell units*, where
cell (i, j) spans [i, i+1) x [j, j+1).  A point exactly on a cell boundary
belongs to the higher-index cell (plain floor).  A segment that touches a
blocked cell only at a corner point does not count as blocked.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_FLAG = "COLLABSEARCH_NO_NUMBA"


def _numba_enabled() -> bool:
    if os.environ.get(_ENV_FLAG, "").strip() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_enabled()

if USING_NUMBA:
    from numba import njit
else:  # decorator becomes a no-op; the numpy paths below are used instead
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Line of sight: exact voxel walk (scalar) and crossing enumeration (batch)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _dda_free(occ, u0, v0, u1, v1):
    """True iff the segment (u0,v0)-(u1,v1) crosses no blocked cell.

    Exact grid traversal; boundary parameters are recomputed by division at
    every step so tie comparisons (corner crossings) are exact for dyadic
    inputs.  Ties step diagonally, which is what makes corner grazing
    non-blocking.
    """
    h, w = occ.shape
    cx = int(math.floor(u0))
    cy = int(math.floor(v0))
    ex = int(math.floor(u1))
    ey = int(math.floor(v1))
    if cx < 0 or cx >= w or cy < 0 or cy >= h:
        return False
    if ex < 0 or ex >= w or ey < 0 or ey >= h:
        return False
    if occ[cy, cx] or occ[ey, ex]:
        return False
    du = u1 - u0
    dv = v1 - v0
    sx = 0
    if du > 0.0:
        sx = 1
    elif du < 0.0:
        sx = -1
    sy = 0
    if dv > 0.0:
        sy = 1
    elif dv < 0.0:
        sy = -1
    # next boundary index along each axis
    bx = cx + 1 if sx > 0 else cx
    by = cy + 1 if sy > 0 else cy
    guard = abs(ex - cx) + abs(ey - cy) + 2
    while (cx != ex or cy != ey) and guard > 0:
        guard -= 1
        if sx != 0:
            tx = (bx - u0) / du
        else:
            tx = np.inf
        if sy != 0:
            ty = (by - v0) / dv
        else:
            ty = np.inf
        if tx < ty:
            cx += sx
            bx += sx
        elif ty < tx:
            cy += sy
            by += sy
        else:  # exact corner: skip both neighbours, land on the diagonal
            cx += sx
            cy += sy
            bx += sx
            by += sy
        if cx < 0 or cx >= w or cy < 0 or cy >= h:
            return False
        if occ[cy, cx]:
            return False
    return True


@njit(cache=True)
def _los_many_nb(occ, u0, v0, us, vs, out):
    for i in range(us.shape[0]):
        out[i] = _dda_free(occ, u0, v0, us[i], vs[i])


def _los_many_np(occ, u0, v0, us, vs):
    """Vectorised exact LOS: enumerate boundary crossings, probe interval
    midpoints.  Produces the same traversed-cell set as the voxel walk."""
    h, w = occ.shape
    m = us.shape[0]
    ok = np.ones(m, dtype=np.bool_)
    c0x = math.floor(u0)
    c0y = math.floor(v0)
    if c0x < 0 or c0x >= w or c0y < 0 or c0y >= h or occ[c0y, c0x]:
        return np.zeros(m, dtype=np.bool_)
    cex = np.floor(us).astype(np.int64)
    cey = np.floor(vs).astype(np.int64)
    inb = (cex >= 0) & (cex < w) & (cey >= 0) & (cey < h)
    ok &= inb
    safe_x = np.clip(cex, 0, w - 1)
    safe_y = np.clip(cey, 0, h - 1)
    ok &= ~(occ[safe_y, safe_x] & inb)

    du = us - u0
    dv = vs - v0
    gx = np.arange(w + 1, dtype=np.float64)
    gy = np.arange(h + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = (gx[None, :] - u0) / du[:, None]
        ty = (gy[None, :] - v0) / dv[:, None]
    tx = np.where(np.isfinite(tx) & (tx > 0.0) & (tx < 1.0), tx, 2.0)
    ty = np.where(np.isfinite(ty) & (ty > 0.0) & (ty < 1.0), ty, 2.0)
    ends = np.empty((m, 2), dtype=np.float64)
    ends[:, 0] = 0.0
    ends[:, 1] = 1.0
    ts = np.concatenate((tx, ty, ends), axis=1)
    ts.sort(axis=1)
    t0 = ts[:, :-1]
    t1 = ts[:, 1:]
    good = (t1 > t0) & (t1 <= 1.0)
    tm = 0.5 * (t0 + t1)
    px = u0 + tm * du[:, None]
    py = v0 + tm * dv[:, None]
    mx = np.floor(px).astype(np.int64)
    my = np.floor(py).astype(np.int64)
    mib = (mx >= 0) & (mx < w) & (my >= 0) & (my < h)
    mx = np.clip(mx, 0, w - 1)
    my = np.clip(my, 0, h - 1)
    hit = good & (~mib | occ[my, mx])
    ok &= ~hit.any(axis=1)
    return ok


def los_free(occ: np.ndarray, u0: float, v0: float, u1: float, v1: float) -> bool:
    """Single-segment line of sight in cell units."""
    if USING_NUMBA:
        return bool(_dda_free(occ, u0, v0, u1, v1))
    out = _los_many_np(occ, u0, v0, np.array([u1]), np.array([v1]))
    return bool(out[0])


def los_free_many(occ: np.ndarray, u0: float, v0: float,
                  us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Line of sight from one point to many targets (cell units)."""
    us = np.ascontiguousarray(us, dtype=np.float64)
    vs = np.ascontiguousarray(vs, dtype=np.float64)
    if USING_NUMBA:
        out = np.empty(us.shape[0], dtype=np.bool_)
        _los_many_nb(occ, u0, v0, us, vs, out)
        return out
    return _los_many_np(occ, u0, v0, us, vs)


# ---------------------------------------------------------------------------
# Observability graph construction
# ---------------------------------------------------------------------------

@njit(cache=True)
def _build_vis_nb(occ, cu, cv, r2, indptr, scratch):
    """Upper-triangle visibility, mirrored.  cu/cv are free-cell centers in
    cell units; r2 the squared radius in cell units.  Fills a dense bool
    matrix in scratch, returns nnz."""
    n = cu.shape[0]
    for i in range(n):
        scratch[i, i] = True
        for j in range(i + 1, n):
            dx = cu[j] - cu[i]
            dy = cv[j] - cv[i]
            vis = False
            if dx * dx + dy * dy <= r2:
                vis = _dda_free(occ, cu[i], cv[i], cu[j], cv[j])
            scratch[i, j] = vis
            scratch[j, i] = vis
    nnz = 0
    for i in range(n):
        cnt = 0
        for j in range(n):
            if scratch[i, j]:
                cnt += 1
        nnz += cnt
        indptr[i + 1] = nnz
    return nnz


def build_visibility(occ: np.ndarray, centers_uv: np.ndarray, r_cells: float):
    """All-pairs visibility over free-cell centers within a radius.

    Returns CSR-style (indptr, indices).  Symmetry of the visibility
    relation is exploited (and thereby enforced) by construction.
    """
    n = centers_uv.shape[0]
    cu = np.ascontiguousarray(centers_uv[:, 0])
    cv = np.ascontiguousarray(centers_uv[:, 1])
    r2 = float(r_cells) * float(r_cells)
    indptr = np.zeros(n + 1, dtype=np.int64)
    if USING_NUMBA:
        scratch = np.zeros((n, n), dtype=np.bool_)
        _build_vis_nb(occ, cu, cv, r2, indptr, scratch)
        indices = np.nonzero(scratch)[1].astype(np.int64)
        return indptr, indices
    mat = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        mat[i, i] = True
        if i + 1 >= n:
            continue
        dx = cu[i + 1:] - cu[i]
        dy = cv[i + 1:] - cv[i]
        cand = np.nonzero(dx * dx + dy * dy <= r2)[0] + i + 1
        if cand.size:
            vis = _los_many_np(occ, cu[i], cv[i], cu[cand], cv[cand])
            mat[i, cand] = vis
            mat[cand, i] = vis
    indptr[1:] = np.cumsum(mat.sum(axis=1, dtype=np.int64))
    indices = np.nonzero(mat)[1].astype(np.int64)
    return indptr, indices


@njit(cache=True)
def _row_sums_nb(indptr, indices, values, out):
    for i in range(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += values[indices[k]]
        out[i] = acc


def row_gather_sums(indptr: np.ndarray, indices: np.ndarray,
                    values: np.ndarray) -> np.ndarray:
    """For each CSR row, sum values[indices in row].  Rows are never empty
    here (every cell sees itself), which keeps the reduceat path valid."""
    n = indptr.shape[0] - 1
    if USING_NUMBA:
        out = np.empty(n, dtype=np.float64)
        _row_sums_nb(indptr, indices, values, out)
        return out
    return np.add.reduceat(values[indices], indptr[:-1])


# ---------------------------------------------------------------------------
# Scalar source-cost evaluation (shared by both planner backends)
# ---------------------------------------------------------------------------

# model codes
GAUSS = 0
POWER = 1
FIELD = 2


@njit(cache=True, inline="always")
def _cost_one(code, amp, slen, kexp, scx, scy, fr, csign, gfi, gf_tables,
              x, y, ox, oy, res, w, h):
    if code == FIELD:
        u = (x - ox) / res
        v = (y - oy) / res
        gx = int(math.floor(u))
        gy = int(math.floor(v))
        if gx < 0 or gx >= w or gy < 0 or gy >= h:
            return 0.0
        return gf_tables[gfi, gy * w + gx]
    dx = x - scx
    dy = y - scy
    d = math.sqrt(dx * dx + dy * dy) - fr
    if d < 0.0:
        d = 0.0
    if code == GAUSS:
        g = math.exp(-(d * d) / (2.0 * slen * slen))
    else:
        g = 1.0 / (1.0 + (d / slen) ** kexp)
    return csign * amp * g


if USING_NUMBA:
    _cost_one_py = _cost_one.py_func
else:
    _cost_one_py = _cost_one


@njit(cache=True)
def _cm_cost_at(x, y, cmP, gf_tables, ox, oy, res, w, h):
    total = 0.0
    for j in range(cmP.shape[0]):
        total += _cost_one(int(cmP[j, 0]), cmP[j, 1], cmP[j, 2], cmP[j, 3],
                           cmP[j, 4], cmP[j, 5], cmP[j, 6], cmP[j, 7],
                           int(cmP[j, 8]), gf_tables, x, y, ox, oy, res, w, h)
    return total


def _cm_cost_at_py(x, y, cmP, gf_tables, ox, oy, res, w, h):
    total = 0.0
    for j in range(cmP.shape[0]):
        total += _cost_one_py(int(cmP[j, 0]), cmP[j, 1], cmP[j, 2], cmP[j, 3],
                              cmP[j, 4], cmP[j, 5], cmP[j, 6], cmP[j, 7],
                              int(cmP[j, 8]), gf_tables, x, y, ox, oy, res, w, h)
    return total


# Source parameter rows are packed as
#   [code, A, length, exponent, cx, cy, footprint_r, cost_sign, gf_index]
SRC_COLS = 9


def pack_sources(rows) -> np.ndarray:
    out = np.zeros((len(rows), SRC_COLS), dtype=np.float64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out
