"""Compiled inner loops.

Everything here works in *grid units*: a position ``(gx, gy)`` is the world
position divided by the resolution, so cell ``(row, col)`` covers
``[col, col + 1) x [row, row + 1)``. Occupancy arrays are ``uint8`` indexed
``[row, col]``. Cells outside the array are treated as occupied.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def segment_cells(gx0, gy0, gx1, gy1):
    """Cells containing at least one point of the segment, in traversal order.

    Returns ``(rows, cols, n)``; only the first ``n`` entries are valid.
    """
    fx0 = math.floor(gx0)
    fx1 = math.floor(gx1)
    fy0 = math.floor(gy0)
    fy1 = math.floor(gy1)
    nx = int(abs(fx1 - fx0))
    ny = int(abs(fy1 - fy0))
    ts = np.empty(nx + ny + 2)
    ts[0] = 0.0
    ts[1] = 1.0
    k = 2
    if nx > 0:
        if gx1 > gx0:
            for i in range(nx):
                ts[k] = (fx0 + 1 + i - gx0) / (gx1 - gx0)
                k += 1
        else:
            for i in range(nx):
                ts[k] = (fx0 - i - gx0) / (gx1 - gx0)
                k += 1
    if ny > 0:
        if gy1 > gy0:
            for i in range(ny):
                ts[k] = (fy0 + 1 + i - gy0) / (gy1 - gy0)
                k += 1
        else:
            for i in range(ny):
                ts[k] = (fy0 - i - gy0) / (gy1 - gy0)
                k += 1
    ts = np.sort(ts)
    m = ts.shape[0]
    rows = np.empty(2 * m, np.int64)
    cols = np.empty(2 * m, np.int64)
    n = 0
    dx = gx1 - gx0
    dy = gy1 - gy0
    for i in range(m):
        t = ts[i]
        for half in range(2):
            if half == 0:
                if i == m - 1:
                    c = fx1
                    r = fy1
                else:
                    c = math.floor(gx0 + t * dx)
                    r = math.floor(gy0 + t * dy)
            else:
                if i == m - 1:
                    break
                t2 = ts[i + 1]
                if t2 <= t:
                    continue
                tm = 0.5 * (t + t2)
                c = math.floor(gx0 + tm * dx)
                r = math.floor(gy0 + tm * dy)
            if n > 0 and rows[n - 1] == r and cols[n - 1] == c:
                continue
            rows[n] = r
            cols[n] = c
            n += 1
    return rows, cols, n


@njit(cache=True)
def segment_blocked(occ, gx0, gy0, gx1, gy1):
    # canonical endpoint order keeps the check exactly symmetric
    if gx1 < gx0 or (gx1 == gx0 and gy1 < gy0):
        gx0, gy0, gx1, gy1 = gx1, gy1, gx0, gy0
    h, w = occ.shape
    rows, cols, n = segment_cells(gx0, gy0, gx1, gy1)
    for i in range(n):
        r = rows[i]
        c = cols[i]
        if r < 0 or c < 0 or r >= h or c >= w:
            return True
        if occ[r, c]:
            return True
    return False


@njit(cache=True)
def cast_rays(occ, gx, gy, range_cells, ray_count):
    """Boolean mask of cells seen from ``(gx, gy)`` by ``ray_count`` rays."""
    h, w = occ.shape
    seen = np.zeros((h, w), np.bool_)
    for k in range(ray_count):
        a = 2.0 * math.pi * k / ray_count
        ex = gx + range_cells * math.cos(a)
        ey = gy + range_cells * math.sin(a)
        rows, cols, n = segment_cells(gx, gy, ex, ey)
        for i in range(n):
            r = rows[i]
            c = cols[i]
            if r < 0 or c < 0 or r >= h or c >= w:
                break
            seen[r, c] = True
            if occ[r, c]:
                break
    return seen


@njit(cache=True)
def _true_cost(xs, ys, parent, i):
    c = 0.0
    while parent[i] >= 0:
        p = parent[i]
        c += math.hypot(xs[i] - xs[p], ys[i] - ys[p])
        i = p
    return c


@njit(cache=True)
def rrt_star(occ, sx, sy, gx, gy, goal_r, step, goal_bias, rewire_r, rand):
    """RRT* in grid units. ``rand`` is an ``(iterations, 3)`` array of U(0,1).

    Returns ``(xs, ys, parent, n, goal_node)`` where ``goal_node`` is -1 when
    no node reached the goal disc.
    """
    h, w = occ.shape
    n_iter = rand.shape[0]
    xs = np.empty(n_iter + 1)
    ys = np.empty(n_iter + 1)
    cost = np.empty(n_iter + 1)
    parent = np.full(n_iter + 1, -1, np.int64)
    near = np.empty(n_iter + 1, np.int64)
    xs[0] = sx
    ys[0] = sy
    cost[0] = 0.0
    n = 1
    r2 = rewire_r * rewire_r
    for it in range(n_iter):
        if rand[it, 0] < goal_bias:
            qx = gx
            qy = gy
        else:
            qx = rand[it, 1] * w
            qy = rand[it, 2] * h
        best = 0
        bd = np.inf
        for j in range(n):
            d2 = (xs[j] - qx) ** 2 + (ys[j] - qy) ** 2
            if d2 < bd:
                bd = d2
                best = j
        d = math.sqrt(bd)
        if d < 1e-12:
            continue
        if d > step:
            nx = xs[best] + (qx - xs[best]) * step / d
            ny = ys[best] + (qy - ys[best]) * step / d
        else:
            nx = qx
            ny = qy
        if segment_blocked(occ, xs[best], ys[best], nx, ny):
            continue
        m = 0
        for j in range(n):
            if (xs[j] - nx) ** 2 + (ys[j] - ny) ** 2 <= r2:
                near[m] = j
                m += 1
        p = best
        c = cost[best] + math.hypot(nx - xs[best], ny - ys[best])
        for q in range(m):
            j = near[q]
            if j == best:
                continue
            cj = cost[j] + math.hypot(nx - xs[j], ny - ys[j])
            if cj < c and not segment_blocked(occ, xs[j], ys[j], nx, ny):
                p = j
                c = cj
        xs[n] = nx
        ys[n] = ny
        parent[n] = p
        cost[n] = c
        for q in range(m):
            j = near[q]
            if j == p:
                continue
            cn = c + math.hypot(nx - xs[j], ny - ys[j])
            if cn < cost[j] and not segment_blocked(occ, nx, ny, xs[j], ys[j]):
                parent[j] = n
                cost[j] = cn
        n += 1
    goal_node = -1
    gbest = np.inf
    gr2 = goal_r * goal_r
    for j in range(n):
        if (xs[j] - gx) ** 2 + (ys[j] - gy) ** 2 <= gr2:
            c = _true_cost(xs, ys, parent, j)
            if c < gbest:
                gbest = c
                goal_node = j
    return xs, ys, parent, n, goal_node


@njit(cache=True)
def shortcut(occ, xs, ys):
    """Greedy line-of-sight pruning; returns kept indices."""
    n = xs.shape[0]
    keep = np.empty(n, np.int64)
    keep[0] = 0
    k = 1
    i = 0
    while i < n - 1:
        j = n - 1
        while j > i + 1 and segment_blocked(occ, xs[i], ys[i], xs[j], ys[j]):
            j -= 1
        keep[k] = j
        k += 1
        i = j
    return keep[:k]


@njit(cache=True)
def inpaint(values, allowed, sources, half, max_mismatch):
    """Greedy exemplar fill.

    ``values`` holds 0 (free), 1 (occupied) or -1 (unknown) and is modified in
    place. Unknown cells with ``allowed`` set are filled by repeatedly taking
    the unknown cell whose patch has the most known cells (ties: lowest
    row-major index) and copying the source patch with minimum Hamming
    distance over those known cells (ties: lowest source index). When even
    the best source disagrees on more than ``max_mismatch`` of those known
    cells, the target is deferred (-2): it is no longer a target and does
    not count as known, but a later paste may still fill it. Returns the
    number of patches pasted.
    """
    h, w = values.shape
    size = 2 * half + 1
    n_src = sources.shape[0]
    known = np.zeros((h, w), np.int64)
    for r in range(h):
        for c in range(w):
            if values[r, c] >= 0:
                for rr in range(max(0, r - half), min(h, r + half + 1)):
                    for cc in range(max(0, c - half), min(w, c + half + 1)):
                        known[rr, cc] += 1
    pasted = 0
    if n_src == 0:
        return pasted
    while True:
        tr = -1
        tc = -1
        tk = 0
        for r in range(h):
            for c in range(w):
                if values[r, c] == -1 and allowed[r, c] and known[r, c] > tk:
                    tk = known[r, c]
                    tr = r
                    tc = c
        if tr < 0:
            break
        best = 0
        bd = size * size + 1
        for s in range(n_src):
            d = 0
            for i in range(size):
                r = tr - half + i
                if r < 0 or r >= h:
                    continue
                for j in range(size):
                    c = tc - half + j
                    if c < 0 or c >= w:
                        continue
                    v = values[r, c]
                    if v >= 0 and v != sources[s, i, j]:
                        d += 1
                if d >= bd:
                    break
            if d < bd:
                bd = d
                best = s
                if d == 0:
                    break
        if bd > max_mismatch * tk:
            values[tr, tc] = -2
            continue
        for i in range(size):
            r = tr - half + i
            if r < 0 or r >= h:
                continue
            for j in range(size):
                c = tc - half + j
                if c < 0 or c >= w:
                    continue
                if values[r, c] < 0 and allowed[r, c]:
                    values[r, c] = sources[best, i, j]
                    for rr in range(max(0, r - half), min(h, r + half + 1)):
                        for cc in range(max(0, c - half), min(w, c + half + 1)):
                            known[rr, cc] += 1
        pasted += 1
    return pasted


@njit(cache=True)
def step_penalties(obs_occ, img_occ, gx0, gy0, gx1, gy1, radius):
    """Collision and unreliable-proximity flags for one motion step.

    A step collides if its segment meets an observed occupied cell (or leaves
    the grid) or an observed occupied cell lies within ``radius`` of the end
    point. It is unreliable if the segment meets an imagined occupied cell or
    the nearest occupied cell within ``radius`` is imagined.
    """
    h, w = obs_occ.shape
    collide = False
    unreliable = False
    rows, cols, n = segment_cells(gx0, gy0, gx1, gy1)
    for i in range(n):
        r = rows[i]
        c = cols[i]
        if r < 0 or c < 0 or r >= h or c >= w or obs_occ[r, c]:
            collide = True
        elif img_occ[r, c]:
            unreliable = True
    d_obs = np.inf
    d_img = np.inf
    r_lo = math.floor(gy1 - radius)
    r_hi = math.floor(gy1 + radius)
    c_lo = math.floor(gx1 - radius)
    c_hi = math.floor(gx1 + radius)
    for r in range(r_lo, r_hi + 1):
        ddy = max(r - gy1, 0.0, gy1 - (r + 1))
        for c in range(c_lo, c_hi + 1):
            ddx = max(c - gx1, 0.0, gx1 - (c + 1))
            d = math.sqrt(ddx * ddx + ddy * ddy)
            if d > radius:
                continue
            if r < 0 or c < 0 or r >= h or c >= w or obs_occ[r, c]:
                if d < d_obs:
                    d_obs = d
            elif img_occ[r, c]:
                if d < d_img:
                    d_img = d
    if d_obs <= radius:
        collide = True
    if d_img <= radius and d_img < d_obs:
        unreliable = True
    return collide, unreliable


@njit(cache=True)
def rollout_batch(obs_occ, img_occ, sx, sy, actions, dt, v_max, goal_x, goal_y,
                  res, w_goal, w_collision, w_unreliable, radius):
    """Cumulative reward of each action sequence.

    Positions, actions, goal and ``radius`` are in world units; only the
    occupancy lookups use grid units. The arithmetic mirrors the scalar
    Python rollout operation for operation, so both agree bit for bit.
    """
    n_samples = actions.shape[0]
    horizon = actions.shape[1]
    out = np.zeros(n_samples)
    for s in range(n_samples):
        x = sx
        y = sy
        total = 0.0
        for k in range(horizon):
            vx = actions[s, k, 0]
            vy = actions[s, k, 1]
            sp = math.sqrt(vx * vx + vy * vy)
            if sp > v_max:
                f = v_max / sp
                vx = vx * f
                vy = vy * f
            nx = x + vx * dt
            ny = y + vy * dt
            col, unrel = step_penalties(obs_occ, img_occ, x / res, y / res, nx / res, ny / res, radius / res)
            ex = nx - goal_x
            ey = ny - goal_y
            rew = -w_goal * math.sqrt(ex * ex + ey * ey)
            if col:
                rew -= w_collision
            if unrel:
                rew -= w_unreliable
            total += rew
            x = nx
            y = ny
        out[s] = total
    return out
