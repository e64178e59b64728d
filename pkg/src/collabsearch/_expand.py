"""Tree-expansion inner loop for the sourced RRT* planner.

One expansion step: draw a free-space sample, let every live tree extend
toward it (steer, collision-check, choose parent among near nodes by
generation cost, insert, rewire), and merge trees that accepted the exact
sample position.  The numba backend runs the whole sample chunk in machine
code; the numpy backend runs the same decisions per sample with vectorised
primitives.  Both consume the identical RNG stream and must produce
identical forests.

Forest arrays (preallocated by the planner):
  pos(cap,2) parent(cap) tree(cap) cm(cap) gtot(cap) rmax(cap,ncs)
  loc_cm(cap) loc_abs(cap,ncs)  -- cached source values at node positions
  fc/ns/ps(cap)                 -- child linked lists
  bhead(nb) bnext(cap)          -- bucket spatial index (side = neighbor radius)
  state: [n_nodes, samples_used, 0, 0]
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import (
    USING_NUMBA,
    njit,
    _cm_cost_at,
    _cm_cost_at_py,
    _cost_one,
    _cost_one_py,
    _dda_free,
    _los_many_np,
)

EPS_IMPROVE = 1e-12


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

@njit(cache=True)
def _link(i, p, fc, ns, ps):
    ns[i] = fc[p]
    ps[i] = -1
    if fc[p] != -1:
        ps[fc[p]] = i
    fc[p] = i


@njit(cache=True)
def _unlink(i, p, fc, ns, ps):
    if ps[i] == -1:
        fc[p] = ns[i]
    else:
        ns[ps[i]] = ns[i]
    if ns[i] != -1:
        ps[ns[i]] = ps[i]
    ns[i] = -1
    ps[i] = -1


@njit(cache=True)
def _recompute_subtree(r, relabel, pos, parent, tree, cm, gtot, rmax,
                       loc_cm, loc_abs, fc, ns, lam, cssign, stk):
    top = 0
    stk[top] = r
    top += 1
    while top > 0:
        top -= 1
        u = stk[top]
        p = parent[u]
        if p != -1:
            dx = pos[u, 0] - pos[p, 0]
            dy = pos[u, 1] - pos[p, 1]
            d = math.sqrt(dx * dx + dy * dy)
            cm[u] = cm[p] + (lam + loc_cm[u]) * d
            t = cm[u]
            for j in range(rmax.shape[1]):
                m = rmax[p, j]
                if loc_abs[u, j] > m:
                    m = loc_abs[u, j]
                rmax[u, j] = m
                t += cssign[j] * m
            gtot[u] = t
            if relabel >= 0:
                tree[u] = relabel
        c = fc[u]
        while c != -1:
            stk[top] = c
            top += 1
            c = ns[c]


@njit(cache=True)
def _is_ancestor(a, i, parent):
    """True iff a lies on i's root path (including i itself)."""
    cur = i
    while cur != -1:
        if cur == a:
            return True
        cur = parent[cur]
    return False


@njit(cache=True)
def _bucket_of(x, y, bminx, bminy, bside, nbx, nby):
    bi = int((x - bminx) / bside)
    bj = int((y - bminy) / bside)
    if bi < 0:
        bi = 0
    elif bi >= nbx:
        bi = nbx - 1
    if bj < 0:
        bj = 0
    elif bj >= nby:
        bj = nby - 1
    return bi, bj


@njit(cache=True)
def _nearest_nb(tid, x, y, pos, tree, bhead, bnext,
                bminx, bminy, bside, nbx, nby):
    bi, bj = _bucket_of(x, y, bminx, bminy, bside, nbx, nby)
    best = np.inf
    besti = -1
    maxr = nbx if nbx > nby else nby
    for r in range(maxr + 1):
        if besti >= 0:
            lo = (r - 1) * bside
            if lo > 0.0 and lo * lo > best:
                break
        for ci in range(bi - r, bi + r + 1):
            if ci < 0 or ci >= nbx:
                continue
            for cj in range(bj - r, bj + r + 1):
                if cj < 0 or cj >= nby:
                    continue
                if max(abs(ci - bi), abs(cj - bj)) != r:
                    continue
                k = bhead[cj * nbx + ci]
                while k != -1:
                    if tree[k] == tid:
                        dx = pos[k, 0] - x
                        dy = pos[k, 1] - y
                        d2 = dx * dx + dy * dy
                        if d2 < best or (d2 == best and k < besti):
                            best = d2
                            besti = k
                    k = bnext[k]
    return besti


@njit(cache=True)
def _near_nb(tid, x, y, nr2, pos, tree, bhead, bnext,
             bminx, bminy, bside, nbx, nby, nbuf):
    bi, bj = _bucket_of(x, y, bminx, bminy, bside, nbx, nby)
    cnt = 0
    for ci in range(bi - 1, bi + 2):
        if ci < 0 or ci >= nbx:
            continue
        for cj in range(bj - 1, bj + 2):
            if cj < 0 or cj >= nby:
                continue
            k = bhead[cj * nbx + ci]
            while k != -1:
                if tree[k] == tid:
                    dx = pos[k, 0] - x
                    dy = pos[k, 1] - y
                    if dx * dx + dy * dy <= nr2:
                        nbuf[cnt] = k
                        cnt += 1
                k = bnext[k]
    if cnt > 1:
        nbuf[:cnt].sort()
    return cnt


@njit(cache=True)
def _blocked_world(occ, x, y, ox, oy, res, w, h):
    u = (x - ox) / res
    v = (y - oy) / res
    cx = int(math.floor(u))
    cy = int(math.floor(v))
    if cx < 0 or cx >= w or cy < 0 or cy >= h:
        return True
    return occ[cy, cx]


@njit(cache=True)
def _los_world(occ, x0, y0, x1, y1, ox, oy, res, has_obs):
    u0 = (x0 - ox) / res
    v0 = (y0 - oy) / res
    u1 = (x1 - ox) / res
    v1 = (y1 - oy) / res
    if not has_obs:
        h, w = occ.shape
        if u0 < 0 or u0 > w or v0 < 0 or v0 > h:
            return False
        if u1 < 0 or u1 > w or v1 < 0 or v1 > h:
            return False
        # endpoints on the outer edge still index a real cell
        return (int(math.floor(min(u0, u1))) >= 0
                and int(math.floor(max(u0, u1))) < w
                and int(math.floor(min(v0, v1))) >= 0
                and int(math.floor(max(v0, v1))) < h)
    return _dda_free(occ, u0, v0, u1, v1)


@njit(cache=True)
def _improve_parent_nb(c, pos, parent, tree, cm, gtot, rmax, loc_cm, loc_abs,
                       fc, ns, ps, bhead, bnext, bminx, bminy, bside, nbx, nby,
                       occ, ox, oy, res, w, h, has_obs, lam, nr2, cssign,
                       nbuf, ncost, stk):
    """Choose-parent pass for an existing node c among its near set."""
    if parent[c] == -1:
        return False
    tid = tree[c]
    cnt = _near_nb(tid, pos[c, 0], pos[c, 1], nr2, pos, tree, bhead, bnext,
                   bminx, bminy, bside, nbx, nby, nbuf)
    for k in range(cnt):
        p = nbuf[k]
        if p == c or p == parent[c]:
            ncost[k] = np.inf
            continue
        if _is_ancestor(c, p, parent):
            ncost[k] = np.inf
            continue
        dx = pos[p, 0] - pos[c, 0]
        dy = pos[p, 1] - pos[c, 1]
        d = math.sqrt(dx * dx + dy * dy)
        t = cm[p] + (lam + loc_cm[c]) * d
        for j in range(rmax.shape[1]):
            m = rmax[p, j]
            if loc_abs[c, j] > m:
                m = loc_abs[c, j]
            t += cssign[j] * m
        ncost[k] = t
    improved = False
    while True:
        bestk = -1
        bestv = np.inf
        for k in range(cnt):
            if ncost[k] < bestv:
                bestv = ncost[k]
                bestk = k
        if bestk < 0 or bestv >= gtot[c] - EPS_IMPROVE:
            break
        p = nbuf[bestk]
        if _los_world(occ, pos[p, 0], pos[p, 1], pos[c, 0], pos[c, 1],
                      ox, oy, res, has_obs):
            _unlink(c, parent[c], fc, ns, ps)
            parent[c] = p
            _link(c, p, fc, ns, ps)
            _recompute_subtree(c, -1, pos, parent, tree, cm, gtot, rmax,
                               loc_cm, loc_abs, fc, ns, lam, cssign, stk)
            improved = True
            break
        ncost[bestk] = np.inf
    return improved


@njit(cache=True)
def _merge_nb(a_node, b_node, pos, parent, tree, cm, gtot, rmax, loc_cm,
              loc_abs, fc, ns, ps, alive, bhead, bnext, bminx, bminy, bside,
              nbx, nby, occ, ox, oy, res, w, h, has_obs, lam, nr2, cssign,
              nbuf, ncost, stk, chain):
    tid_a = tree[a_node]
    tid_b = tree[b_node]
    # collect b's root path, unhook it, then reverse the parent links
    length = 0
    cur = b_node
    while cur != -1:
        chain[length] = cur
        length += 1
        cur = parent[cur]
    for j in range(length - 1):
        _unlink(chain[j], chain[j + 1], fc, ns, ps)
    for j in range(length - 1):
        parent[chain[j + 1]] = chain[j]
        _link(chain[j + 1], chain[j], fc, ns, ps)
    parent[b_node] = a_node
    _link(b_node, a_node, fc, ns, ps)
    _recompute_subtree(b_node, tid_a, pos, parent, tree, cm, gtot, rmax,
                       loc_cm, loc_abs, fc, ns, lam, cssign, stk)
    alive[tid_b] = 0
    # rewire cascade along the reversed spine
    for j in range(1, length):
        _improve_parent_nb(chain[j], pos, parent, tree, cm, gtot, rmax,
                           loc_cm, loc_abs, fc, ns, ps, bhead, bnext,
                           bminx, bminy, bside, nbx, nby, occ, ox, oy, res,
                           w, h, has_obs, lam, nr2, cssign, nbuf, ncost, stk)


@njit(cache=True)
def _expand_nb(samples, state, pos, parent, tree, cm, gtot, rmax, loc_cm,
               loc_abs, fc, ns, ps, bhead, bnext, alive, occ, has_obs,
               ox, oy, res, w, h, fcx, fcy, cmP, csP, cssign, gf_tables,
               step, nr, lam, max_nodes, bminx, bminy, bside, nbx, nby,
               nbuf, ncost, stk, chain, vabs):
    nfree = fcx.shape[0]
    nr2 = nr * nr
    ntrees = alive.shape[0]
    used = 0
    for srow in range(samples.shape[0]):
        if state[0] >= max_nodes:
            state[2] = 1
            break
        used += 1
        ci = int(samples[srow, 0] * nfree)
        if ci >= nfree:
            ci = nfree - 1
        qx = fcx[ci] + samples[srow, 1] * res
        qy = fcy[ci] + samples[srow, 2] * res
        first_at_q = -1
        for tid in range(ntrees):
            if not alive[tid]:
                continue
            ni = _nearest_nb(tid, qx, qy, pos, tree, bhead, bnext,
                             bminx, bminy, bside, nbx, nby)
            if ni < 0:
                continue
            dx = qx - pos[ni, 0]
            dy = qy - pos[ni, 1]
            d = math.sqrt(dx * dx + dy * dy)
            reached = d <= step
            if reached:
                candx = qx
                candy = qy
            else:
                candx = pos[ni, 0] + step * dx / d
                candy = pos[ni, 1] + step * dy / d
            if _blocked_world(occ, candx, candy, ox, oy, res, w, h):
                continue
            cnt = _near_nb(tid, candx, candy, nr2, pos, tree, bhead, bnext,
                           bminx, bminy, bside, nbx, nby, nbuf)
            if cnt == 0:
                nbuf[0] = ni
                cnt = 1
            vcm = _cm_cost_at(candx, candy, cmP, gf_tables, ox, oy, res, w, h)
            for j in range(csP.shape[0]):
                vabs[j] = abs(_cost_one(
                    int(csP[j, 0]), csP[j, 1], csP[j, 2], csP[j, 3],
                    csP[j, 4], csP[j, 5], csP[j, 6], csP[j, 7],
                    int(csP[j, 8]), gf_tables, candx, candy,
                    ox, oy, res, w, h))
            for k in range(cnt):
                p = nbuf[k]
                ddx = pos[p, 0] - candx
                ddy = pos[p, 1] - candy
                dd = math.sqrt(ddx * ddx + ddy * ddy)
                t = cm[p] + (lam + vcm) * dd
                for j in range(csP.shape[0]):
                    m = rmax[p, j]
                    if vabs[j] > m:
                        m = vabs[j]
                    t += cssign[j] * m
                ncost[k] = t
            best = -1
            bestd = 0.0
            while True:
                bk = -1
                bv = np.inf
                for k in range(cnt):
                    if ncost[k] < bv:
                        bv = ncost[k]
                        bk = k
                if bk < 0:
                    break
                p = nbuf[bk]
                if _los_world(occ, pos[p, 0], pos[p, 1], candx, candy,
                              ox, oy, res, has_obs):
                    best = p
                    ddx = pos[p, 0] - candx
                    ddy = pos[p, 1] - candy
                    bestd = math.sqrt(ddx * ddx + ddy * ddy)
                    break
                ncost[bk] = np.inf
            if best < 0:
                continue
            i = state[0]
            state[0] += 1
            pos[i, 0] = candx
            pos[i, 1] = candy
            parent[i] = best
            tree[i] = tid
            loc_cm[i] = vcm
            cm[i] = cm[best] + (lam + vcm) * bestd
            t = cm[i]
            for j in range(csP.shape[0]):
                m = rmax[best, j]
                if vabs[j] > m:
                    m = vabs[j]
                rmax[i, j] = m
                loc_abs[i, j] = vabs[j]
                t += cssign[j] * m
            gtot[i] = t
            _link(i, best, fc, ns, ps)
            bi, bj = _bucket_of(candx, candy, bminx, bminy, bside, nbx, nby)
            b = bj * nbx + bi
            bnext[i] = bhead[b]
            bhead[b] = i
            # rewire: route near nodes through i where that lowers C_gen
            for k in range(cnt):
                m_ = nbuf[k]
                if m_ == best or m_ == i or parent[m_] == -1:
                    continue
                ddx = pos[m_, 0] - candx
                ddy = pos[m_, 1] - candy
                dd = math.sqrt(ddx * ddx + ddy * ddy)
                nt = cm[i] + (lam + loc_cm[m_]) * dd
                for j in range(csP.shape[0]):
                    mm = rmax[i, j]
                    if loc_abs[m_, j] > mm:
                        mm = loc_abs[m_, j]
                    nt += cssign[j] * mm
                if nt < gtot[m_] - EPS_IMPROVE:
                    if not _is_ancestor(m_, i, parent):
                        if _los_world(occ, candx, candy, pos[m_, 0],
                                      pos[m_, 1], ox, oy, res, has_obs):
                            _unlink(m_, parent[m_], fc, ns, ps)
                            parent[m_] = i
                            _link(m_, i, fc, ns, ps)
                            _recompute_subtree(m_, -1, pos, parent, tree, cm,
                                               gtot, rmax, loc_cm, loc_abs,
                                               fc, ns, lam, cssign, stk)
            if reached:
                if first_at_q < 0:
                    first_at_q = i
                elif tree[i] != tree[first_at_q]:
                    _merge_nb(first_at_q, i, pos, parent, tree, cm, gtot,
                              rmax, loc_cm, loc_abs, fc, ns, ps, alive,
                              bhead, bnext, bminx, bminy, bside, nbx, nby,
                              occ, ox, oy, res, w, h, has_obs, lam, nr2,
                              cssign, nbuf, ncost, stk, chain)
    state[1] += used


# ---------------------------------------------------------------------------
# numpy backend: same decisions, vectorised per-sample primitives
# ---------------------------------------------------------------------------

def _link_py(i, p, fc, ns, ps):
    ns[i] = fc[p]
    ps[i] = -1
    if fc[p] != -1:
        ps[fc[p]] = i
    fc[p] = i


def _unlink_py(i, p, fc, ns, ps):
    if ps[i] == -1:
        fc[p] = ns[i]
    else:
        ns[ps[i]] = ns[i]
    if ns[i] != -1:
        ps[ns[i]] = ps[i]
    ns[i] = -1
    ps[i] = -1


def _recompute_subtree_py(r, relabel, A, lam, cssign):
    stack = [r]
    while stack:
        u = stack.pop()
        p = A["parent"][u]
        if p != -1:
            dx = A["pos"][u, 0] - A["pos"][p, 0]
            dy = A["pos"][u, 1] - A["pos"][p, 1]
            d = math.sqrt(dx * dx + dy * dy)
            A["cm"][u] = A["cm"][p] + (lam + A["loc_cm"][u]) * d
            t = A["cm"][u]
            for j in range(A["rmax"].shape[1]):
                m = max(A["rmax"][p, j], A["loc_abs"][u, j])
                A["rmax"][u, j] = m
                t += cssign[j] * m
            A["gtot"][u] = t
            if relabel >= 0:
                A["tree"][u] = relabel
        c = A["fc"][u]
        while c != -1:
            stack.append(c)
            c = A["ns"][c]


def _is_ancestor_py(a, i, parent):
    cur = i
    while cur != -1:
        if cur == a:
            return True
        cur = parent[cur]
    return False


def _los_world_py(occ, x0, y0, x1, y1, ox, oy, res, has_obs):
    u0 = (x0 - ox) / res
    v0 = (y0 - oy) / res
    u1 = (x1 - ox) / res
    v1 = (y1 - oy) / res
    h, w = occ.shape
    if not has_obs:
        c0x, c0y = math.floor(u0), math.floor(v0)
        c1x, c1y = math.floor(u1), math.floor(v1)
        return (0 <= c0x < w and 0 <= c0y < h
                and 0 <= c1x < w and 0 <= c1y < h)
    return bool(_los_many_np(occ, u0, v0, np.array([u1]), np.array([v1]))[0])


def _improve_parent_py(c, A, env):
    occ, ox, oy, res, w, h, has_obs, lam, nr2, cssign = env
    if A["parent"][c] == -1:
        return False
    n = A["state"][0]
    pos = A["pos"]
    d2 = ((pos[:n, 0] - pos[c, 0]) ** 2 + (pos[:n, 1] - pos[c, 1]) ** 2)
    near = np.nonzero((A["tree"][:n] == A["tree"][c]) & (d2 <= nr2))[0]
    costs = np.full(near.shape[0], np.inf)
    for k, p in enumerate(near):
        if p == c or p == A["parent"][c] or _is_ancestor_py(c, p, A["parent"]):
            continue
        d = math.sqrt(d2[p])
        t = A["cm"][p] + (lam + A["loc_cm"][c]) * d
        for j in range(A["rmax"].shape[1]):
            t += cssign[j] * max(A["rmax"][p, j], A["loc_abs"][c, j])
        costs[k] = t
    while True:
        bk = int(np.argmin(costs)) if costs.size else -1
        if bk < 0 or costs[bk] >= A["gtot"][c] - EPS_IMPROVE:
            return False
        p = int(near[bk])
        if _los_world_py(occ, pos[p, 0], pos[p, 1], pos[c, 0], pos[c, 1],
                         ox, oy, res, has_obs):
            _unlink_py(c, A["parent"][c], A["fc"], A["ns"], A["ps"])
            A["parent"][c] = p
            _link_py(c, p, A["fc"], A["ns"], A["ps"])
            _recompute_subtree_py(c, -1, A, lam, cssign)
            return True
        costs[bk] = np.inf


def _merge_py(a_node, b_node, A, env):
    lam, cssign = env[7], env[9]
    tid_a = int(A["tree"][a_node])
    tid_b = int(A["tree"][b_node])
    chain = []
    cur = b_node
    while cur != -1:
        chain.append(cur)
        cur = A["parent"][cur]
    for j in range(len(chain) - 1):
        _unlink_py(chain[j], chain[j + 1], A["fc"], A["ns"], A["ps"])
    for j in range(len(chain) - 1):
        A["parent"][chain[j + 1]] = chain[j]
        _link_py(chain[j + 1], chain[j], A["fc"], A["ns"], A["ps"])
    A["parent"][b_node] = a_node
    _link_py(b_node, a_node, A["fc"], A["ns"], A["ps"])
    _recompute_subtree_py(b_node, tid_a, A, lam, cssign)
    A["alive"][tid_b] = 0
    for j in range(1, len(chain)):
        _improve_parent_py(chain[j], A, env)


def _expand_np(samples, A, occ, has_obs, ox, oy, res, w, h, fcx, fcy,
               cmP, csP, cssign, gf_tables, step, nr, lam, max_nodes):
    state = A["state"]
    pos = A["pos"]
    nfree = fcx.shape[0]
    nr2 = nr * nr
    env = (occ, ox, oy, res, w, h, has_obs, lam, nr2, cssign)
    used = 0
    for srow in range(samples.shape[0]):
        if state[0] >= max_nodes:
            state[2] = 1
            break
        used += 1
        ci = min(int(samples[srow, 0] * nfree), nfree - 1)
        qx = fcx[ci] + samples[srow, 1] * res
        qy = fcy[ci] + samples[srow, 2] * res
        first_at_q = -1
        for tid in range(A["alive"].shape[0]):
            if not A["alive"][tid]:
                continue
            n = state[0]
            tmask = A["tree"][:n] == tid
            d2q = np.where(tmask,
                           (pos[:n, 0] - qx) ** 2 + (pos[:n, 1] - qy) ** 2,
                           np.inf)
            ni = int(np.argmin(d2q))
            if not tmask[ni]:
                continue
            dx = qx - pos[ni, 0]
            dy = qy - pos[ni, 1]
            d = math.sqrt(dx * dx + dy * dy)
            reached = d <= step
            if reached:
                candx, candy = qx, qy
            else:
                candx = pos[ni, 0] + step * dx / d
                candy = pos[ni, 1] + step * dy / d
            cu = (candx - ox) / res
            cv = (candy - oy) / res
            gx, gy = math.floor(cu), math.floor(cv)
            if not (0 <= gx < w and 0 <= gy < h) or occ[gy, gx]:
                continue
            d2c = np.where(tmask,
                           (pos[:n, 0] - candx) ** 2 + (pos[:n, 1] - candy) ** 2,
                           np.inf)
            near = np.nonzero(d2c <= nr2)[0]
            if near.size == 0:
                near = np.array([ni], dtype=np.int64)
            vcm = _cm_cost_at_py(candx, candy, cmP, gf_tables,
                                 ox, oy, res, w, h)
            vabs = np.empty(csP.shape[0])
            for j in range(csP.shape[0]):
                vabs[j] = abs(_cost_one_py(
                    int(csP[j, 0]), csP[j, 1], csP[j, 2], csP[j, 3],
                    csP[j, 4], csP[j, 5], csP[j, 6], csP[j, 7],
                    int(csP[j, 8]), gf_tables, candx, candy,
                    ox, oy, res, w, h))
            dn = np.sqrt((pos[near, 0] - candx) ** 2
                         + (pos[near, 1] - candy) ** 2)
            costs = A["cm"][near] + (lam + vcm) * dn
            for j in range(csP.shape[0]):
                costs = costs + cssign[j] * np.maximum(A["rmax"][near, j],
                                                       vabs[j])
            if has_obs:
                u0 = (candx - ox) / res
                v0 = (candy - oy) / res
                losn = _los_many_np(occ, u0, v0,
                                    (pos[near, 0] - ox) / res,
                                    (pos[near, 1] - oy) / res)
            else:
                losn = np.ones(near.shape[0], dtype=np.bool_)
            order = np.lexsort((near, costs))
            best = -1
            bestd = 0.0
            for k in order:
                if not np.isfinite(costs[k]):
                    break
                if losn[k]:
                    best = int(near[k])
                    bestd = float(dn[k])
                    break
            if best < 0:
                continue
            i = int(state[0])
            state[0] += 1
            pos[i, 0] = candx
            pos[i, 1] = candy
            A["parent"][i] = best
            A["tree"][i] = tid
            A["loc_cm"][i] = vcm
            bi = int(np.nonzero(near == best)[0][0])
            A["cm"][i] = A["cm"][best] + (lam + vcm) * dn[bi]
            t = A["cm"][i]
            for j in range(csP.shape[0]):
                m = max(A["rmax"][best, j], vabs[j])
                A["rmax"][i, j] = m
                A["loc_abs"][i, j] = vabs[j]
                t += cssign[j] * m
            A["gtot"][i] = t
            _link_py(i, best, A["fc"], A["ns"], A["ps"])
            # rewire
            for k in range(near.shape[0]):
                m_ = int(near[k])
                if m_ == best or m_ == i or A["parent"][m_] == -1:
                    continue
                nt = A["cm"][i] + (lam + A["loc_cm"][m_]) * dn[k]
                for j in range(csP.shape[0]):
                    nt += cssign[j] * max(A["rmax"][i, j], A["loc_abs"][m_, j])
                if nt < A["gtot"][m_] - EPS_IMPROVE:
                    if not _is_ancestor_py(m_, i, A["parent"]):
                        if losn[k]:
                            _unlink_py(m_, A["parent"][m_],
                                       A["fc"], A["ns"], A["ps"])
                            A["parent"][m_] = i
                            _link_py(m_, i, A["fc"], A["ns"], A["ps"])
                            _recompute_subtree_py(m_, -1, A, lam, cssign)
            if reached:
                if first_at_q < 0:
                    first_at_q = i
                elif A["tree"][i] != A["tree"][first_at_q]:
                    _merge_py(first_at_q, i, A, env)
    state[1] += used


def expand_batch(samples, A, occ, has_obs, ox, oy, res, w, h, fcx, fcy,
                 cmP, csP, cssign, gf_tables, step, nr, lam, max_nodes,
                 bparams):
    """Run one RNG chunk through the expansion loop on the chosen backend."""
    bminx, bminy, bside, nbx, nby = bparams
    if USING_NUMBA:
        _expand_nb(samples, A["state"], A["pos"], A["parent"], A["tree"],
                   A["cm"], A["gtot"], A["rmax"], A["loc_cm"], A["loc_abs"],
                   A["fc"], A["ns"], A["ps"], A["bhead"], A["bnext"],
                   A["alive"], occ, has_obs, ox, oy, res, w, h, fcx, fcy,
                   cmP, csP, cssign, gf_tables, step, nr, lam, max_nodes,
                   bminx, bminy, bside, nbx, nby,
                   A["nbuf"], A["ncost"], A["stk"], A["chain"], A["vabs"])
    else:
        _expand_np(samples, A, occ, has_obs, ox, oy, res, w, h, fcx, fcy,
                   cmP, csP, cssign, gf_tables, step, nr, lam, max_nodes)
