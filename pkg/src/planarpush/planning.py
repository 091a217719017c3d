"""Any-angle global planning (Lazy Theta*) and subgoal sampling.

The search runs on cell centers of an occupancy grid with 8-connected
expansion, lazy line-of-sight repair and a Euclidean heuristic. Line of
sight uses a supercover traversal: any touched occupied cell blocks.
Ties are broken by lower g, then row-major cell order, so identical
queries yield identical paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptyPath, GoalOccupied, NoPath, StartOccupied
from .geometry import Pose2D
from .perception import OccupancyGrid

START_SNAP_CELLS = 3


@dataclass
class Path:
    waypoints: np.ndarray  # (N, 2) world points
    length: float


@dataclass(frozen=True)
class SubgoalPair:
    sg_now: tuple[float, float]      # pushee frame
    sg_lagged: tuple[float, float]   # pushee frame
    lag: int


SUBGOAL_FRACTION = 0.20
SUBGOAL_LAG = 5


@njit(cache=True)
def _los_cells(cells, r0, c0, r1, c1):
    """Supercover line of sight between cell centers (integer-exact)."""
    if cells[r0, c0] or cells[r1, c1]:
        return False
    dr = r1 - r0
    dc = c1 - c0
    sr = 1 if dr > 0 else -1
    sc = 1 if dc > 0 else -1
    adr = abs(dr)
    adc = abs(dc)
    r, c = r0, c0
    i = 0
    j = 0
    while i < adc or j < adr:
        if i >= adc:
            r += sr
            j += 1
        elif j >= adr:
            c += sc
            i += 1
        else:
            tx = (2 * i + 1) * adr  # time of next column crossing (scaled)
            ty = (2 * j + 1) * adc
            if tx < ty:
                c += sc
                i += 1
            elif ty < tx:
                r += sr
                j += 1
            else:
                # exact corner: the segment grazes both side cells
                if cells[r + sr, c] or cells[r, c + sc]:
                    return False
                r += sr
                c += sc
                i += 1
                j += 1
        if cells[r, c]:
            return False
    return True


@njit(cache=True)
def _los_points(cells, x0, y0, x1, y1):
    """Supercover line of sight between float points (cell units)."""
    h, w = cells.shape
    cx = int(math.floor(x0))
    cy = int(math.floor(y0))
    ex = int(math.floor(x1))
    ey = int(math.floor(y1))
    if cx < 0 or cx >= w or cy < 0 or cy >= h or ex < 0 or ex >= w or ey < 0 or ey >= h:
        return False
    if cells[cy, cx] or cells[ey, ex]:
        return False
    dx = x1 - x0
    dy = y1 - y0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    tdx = abs(1.0 / dx) if dx != 0.0 else np.inf
    tdy = abs(1.0 / dy) if dy != 0.0 else np.inf
    tx = ((cx + (sx > 0)) - x0) / dx if dx != 0.0 else np.inf
    ty = ((cy + (sy > 0)) - y0) / dy if dy != 0.0 else np.inf
    while cx != ex or cy != ey:
        if abs(tx - ty) < 1e-12 and tx <= 1.0:
            if cells[cy + sy, cx] or cells[cy, cx + sx]:
                return False
            cx += sx
            cy += sy
            tx += tdx
            ty += tdy
        elif tx < ty:
            cx += sx
            tx += tdx
        else:
            cy += sy
            ty += tdy
        if cx < 0 or cx >= w or cy < 0 or cy >= h:
            return False
        if cells[cy, cx]:
            return False
    return True


@njit(cache=True)
def _segment_cost(cells, cost, r0, c0, r1, c1):
    """Mean traversal cost over the supercover cells times segment length."""
    total = cost[r0, c0]
    count = 1
    dr = r1 - r0
    dc = c1 - c0
    sr = 1 if dr > 0 else -1
    sc = 1 if dc > 0 else -1
    adr = abs(dr)
    adc = abs(dc)
    r, c = r0, c0
    i = 0
    j = 0
    while i < adc or j < adr:
        if i >= adc:
            r += sr
            j += 1
        elif j >= adr:
            c += sc
            i += 1
        else:
            tx = (2 * i + 1) * adr
            ty = (2 * j + 1) * adc
            if tx < ty:
                c += sc
                i += 1
            elif ty < tx:
                r += sr
                j += 1
            else:
                r += sr
                c += sc
                i += 1
                j += 1
        total += cost[r, c]
        count += 1
    return (total / count) * math.hypot(float(dr), float(dc))


@njit(cache=True, inline="always")
def _key_less(f1, g1, i1, f2, g2, i2):
    if f1 != f2:
        return f1 < f2
    if g1 != g2:
        return g1 < g2
    return i1 < i2


# Search-space cap for the refinement stage; beyond it the corner-cell
# subset is tried, and beyond that the raw lazy path is kept.
REFINE_VERTEX_CAP = 6000


@njit(cache=True)
def _refine_vis_astar(cells, sr, sc, gr, gc, upper, corners_only, cap):
    """Shortest path over free-cell centers restricted to the length ellipse.

    Any path not longer than `upper` (cell units) only visits cells whose
    straight-line detour bound d(s, v) + d(v, g) is at most `upper`, so a
    search over exactly those vertices returns the true visibility-graph
    optimum. With `corners_only` the vertex set shrinks to cells touching an
    obstacle (near-optimal, used when the ellipse is too large).

    Returns (status, nv, verts_r, verts_c, parent, goal_index); status is
    1 = found, 0 = no path, -2 = vertex cap exceeded.
    """
    h, w = cells.shape
    vr = np.empty(h * w, np.int64)
    vc = np.empty(h * w, np.int64)
    nv = 0
    for r in range(h):
        for c in range(w):
            if cells[r, c]:
                continue
            if not ((r == sr and c == sc) or (r == gr and c == gc)):
                if math.hypot(r - sr, c - sc) + math.hypot(r - gr, c - gc) > upper + 1e-9:
                    continue
                if corners_only:
                    corner = False
                    for dr in range(-1, 2):
                        for dc in range(-1, 2):
                            rr = r + dr
                            cc = c + dc
                            if 0 <= rr < h and 0 <= cc < w and cells[rr, cc]:
                                corner = True
                    if not corner:
                        continue
            vr[nv] = r
            vc[nv] = c
            nv += 1
            if nv > cap:
                return -2, nv, vr, vc, np.empty(0, np.int64), -1
    g = np.full(nv, np.inf)
    parent = np.full(nv, -1, np.int64)
    closed = np.zeros(nv, np.uint8)
    si = -1
    gi = -1
    for i in range(nv):
        if vr[i] == sr and vc[i] == sc:
            si = i
        if vr[i] == gr and vc[i] == gc:
            gi = i
    hf = np.empty(8 * nv + 8)
    hg = np.empty(8 * nv + 8)
    hi = np.empty(8 * nv + 8, np.int64)
    g[si] = 0.0
    parent[si] = si
    hf[0] = math.hypot(float(gr - sr), float(gc - sc))
    hg[0] = 0.0
    hi[0] = si
    size = 1
    while size > 0:
        g0 = hg[0]
        u = hi[0]
        size -= 1
        hf[0] = hf[size]
        hg[0] = hg[size]
        hi[0] = hi[size]
        k = 0
        while True:
            l = 2 * k + 1
            rgt = l + 1
            best = k
            if l < size and _key_less(hf[l], hg[l], hi[l], hf[best], hg[best], hi[best]):
                best = l
            if rgt < size and _key_less(hf[rgt], hg[rgt], hi[rgt], hf[best], hg[best], hi[best]):
                best = rgt
            if best == k:
                break
            hf[k], hf[best] = hf[best], hf[k]
            hg[k], hg[best] = hg[best], hg[k]
            hi[k], hi[best] = hi[best], hi[k]
            k = best
        if closed[u] or g0 != g[u]:
            continue
        closed[u] = 1
        if u == gi:
            return 1, nv, vr, vc, parent, gi
        for v in range(nv):
            if closed[v] or v == u:
                continue
            cand = g[u] + math.hypot(float(vr[v] - vr[u]), float(vc[v] - vc[u]))
            if cand >= g[v] - 1e-12:
                continue
            if not _los_cells(cells, vr[u], vc[u], vr[v], vc[v]):
                continue
            g[v] = cand
            parent[v] = u
            if size >= hf.shape[0] - 2:
                cap2 = hf.shape[0] * 2
                nhf = np.empty(cap2)
                nhg = np.empty(cap2)
                nhi = np.empty(cap2, np.int64)
                nhf[:size] = hf[:size]
                nhg[:size] = hg[:size]
                nhi[:size] = hi[:size]
                hf, hg, hi = nhf, nhg, nhi
            idx = size
            hf[idx] = cand + math.hypot(float(gr - vr[v]), float(gc - vc[v]))
            hg[idx] = cand
            hi[idx] = v
            size += 1
            while idx > 0:
                par = (idx - 1) // 2
                if _key_less(hf[idx], hg[idx], hi[idx], hf[par], hg[par], hi[par]):
                    hf[idx], hf[par] = hf[par], hf[idx]
                    hg[idx], hg[par] = hg[par], hg[idx]
                    hi[idx], hi[par] = hi[par], hi[idx]
                    idx = par
                else:
                    break
    return 0, nv, vr, vc, parent, gi


@njit(cache=True)
def _lazy_theta(cells, cost, use_cost, sr, sc, gr, gc):
    h, w = cells.shape
    n = h * w
    g = np.full(n, np.inf)
    parent = np.full(n, -1, np.int64)
    closed = np.zeros(n, np.uint8)
    cap = 4 * n + 64
    hf = np.empty(cap)
    hg = np.empty(cap)
    hi = np.empty(cap, np.int64)
    size = 0
    start = sr * w + sc
    goal = gr * w + gc
    g[start] = 0.0
    parent[start] = start
    hf[0] = math.hypot(float(gr - sr), float(gc - sc))
    hg[0] = 0.0
    hi[0] = start
    size = 1
    found = False
    while size > 0:
        # pop min
        f0 = hf[0]
        g0 = hg[0]
        s = hi[0]
        size -= 1
        hf[0] = hf[size]
        hg[0] = hg[size]
        hi[0] = hi[size]
        k = 0
        while True:
            l = 2 * k + 1
            rgt = l + 1
            best = k
            if l < size and _key_less(hf[l], hg[l], hi[l], hf[best], hg[best], hi[best]):
                best = l
            if rgt < size and _key_less(hf[rgt], hg[rgt], hi[rgt], hf[best], hg[best], hi[best]):
                best = rgt
            if best == k:
                break
            hf[k], hf[best] = hf[best], hf[k]
            hg[k], hg[best] = hg[best], hg[k]
            hi[k], hi[best] = hi[best], hi[k]
            k = best

        if closed[s] == 1 or g0 != g[s]:
            continue  # stale copy (g was improved or repaired upward)
        r = s // w
        c = s % w
        p = parent[s]
        if p != s:
            pr = p // w
            pc = p % w
            if not _los_cells(cells, pr, pc, r, c):
                # lazy repair: best closed grid neighbor
                bg = np.inf
                bp = -1
                for dr in range(-1, 2):
                    for dc in range(-1, 2):
                        if dr == 0 and dc == 0:
                            continue
                        nr = r + dr
                        nc = c + dc
                        if nr < 0 or nr >= h or nc < 0 or nc >= w:
                            continue
                        if dr != 0 and dc != 0 and (cells[r + dr, c] or cells[r, c + dc]):
                            continue  # diagonal squeezing past a corner is blocked
                        ni = nr * w + nc
                        if closed[ni] == 1 and cells[nr, nc] == 0:
                            step = math.hypot(float(dr), float(dc))
                            if use_cost:
                                step *= 0.5 * (cost[r, c] + cost[nr, nc])
                            cand = g[ni] + step
                            if cand < bg - 1e-15:
                                bg = cand
                                bp = ni
                if bp == -1:
                    continue
                g[s] = bg
                parent[s] = bp
                if bg > g0 + 1e-12:
                    # priority got worse after repair: requeue at true cost
                    if size >= cap - 2:
                        cap2 = cap * 2
                        nhf = np.empty(cap2)
                        nhg = np.empty(cap2)
                        nhi = np.empty(cap2, np.int64)
                        nhf[:size] = hf[:size]
                        nhg[:size] = hg[:size]
                        nhi[:size] = hi[:size]
                        hf, hg, hi, cap = nhf, nhg, nhi, cap2
                    hh = math.hypot(float(gr - r), float(gc - c))
                    idx = size
                    hf[idx] = bg + hh
                    hg[idx] = bg
                    hi[idx] = s
                    size += 1
                    while idx > 0:
                        par = (idx - 1) // 2
                        if _key_less(hf[idx], hg[idx], hi[idx], hf[par], hg[par], hi[par]):
                            hf[idx], hf[par] = hf[par], hf[idx]
                            hg[idx], hg[par] = hg[par], hg[idx]
                            hi[idx], hi[par] = hi[par], hi[idx]
                            idx = par
                        else:
                            break
                    continue
        closed[s] = 1
        if s == goal:
            found = True
            break
        p = parent[s]
        pr = p // w
        pc = p % w
        gp = g[p]
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                nr = r + dr
                nc = c + dc
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                if dr != 0 and dc != 0 and (cells[r + dr, c] or cells[r, c + dc]):
                    continue  # no corner cutting (matches the supercover rule)
                ni = nr * w + nc
                if cells[nr, nc] == 1 or closed[ni] == 1:
                    continue
                if use_cost:
                    seg = _segment_cost(cells, cost, pr, pc, nr, nc)
                else:
                    seg = math.hypot(float(nr - pr), float(nc - pc))
                cand = gp + seg
                if cand < g[ni] - 1e-12:
                    g[ni] = cand
                    parent[ni] = p
                    if size >= cap - 2:
                        cap2 = cap * 2
                        nhf = np.empty(cap2)
                        nhg = np.empty(cap2)
                        nhi = np.empty(cap2, np.int64)
                        nhf[:size] = hf[:size]
                        nhg[:size] = hg[:size]
                        nhi[:size] = hi[:size]
                        hf, hg, hi, cap = nhf, nhg, nhi, cap2
                    hh = math.hypot(float(gr - nr), float(gc - nc))
                    idx = size
                    hf[idx] = cand + hh
                    hg[idx] = cand
                    hi[idx] = ni
                    size += 1
                    while idx > 0:
                        par = (idx - 1) // 2
                        if _key_less(hf[idx], hg[idx], hi[idx], hf[par], hg[par], hi[par]):
                            hf[idx], hf[par] = hf[par], hf[idx]
                            hg[idx], hg[par] = hg[par], hg[idx]
                            hi[idx], hi[par] = hi[par], hi[idx]
                            idx = par
                        else:
                            break
        # loop continues
    return found, parent


def _refined_chain(cells, sr, sc, gr, gc, upper, fallback):
    """Cell chain of the refinement search, or `fallback` when not better."""
    for corners_only in (False, True):
        status, nv, vr, vc, parent, gi = _refine_vis_astar(
            cells, sr, sc, gr, gc, upper, corners_only, REFINE_VERTEX_CAP)
        if status == -2:
            continue
        if status != 1:
            return fallback
        chain = []
        node = gi
        while parent[node] != node:
            chain.append((int(vr[node]), int(vc[node])))
            node = parent[node]
        chain.append((int(vr[node]), int(vc[node])))
        chain.reverse()
        length = sum(math.hypot(a[0] - b[0], a[1] - b[1])
                     for a, b in zip(chain[:-1], chain[1:]))
        if length < upper - 1e-12:
            return chain
        return fallback
    return fallback


def _snap_start(cells: np.ndarray, r: int, c: int, radius: int):
    """Nearest free cell within `radius` (squared distance, then row-major)."""
    h, w = cells.shape
    best = None
    best_d2 = radius * radius + 1
    for rr in range(max(0, r - radius), min(h, r + radius + 1)):
        for cc in range(max(0, c - radius), min(w, c + radius + 1)):
            if cells[rr, cc]:
                continue
            d2 = (rr - r) ** 2 + (cc - c) ** 2
            if d2 <= radius * radius and d2 < best_d2:
                best, best_d2 = (rr, cc), d2
    return best


def _polyline_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def plan_path(grid: OccupancyGrid, start, goal,
              cost: np.ndarray | None = None,
              start_snap_cells: int = START_SNAP_CELLS,
              refine: bool = True) -> Path:
    """Any-angle path from `start` to `goal` (world points).

    Lazy Theta* produces an upper bound, then (uniform-cost planning only) a
    refinement search over the free cells inside the induced length ellipse
    recovers the exact visibility-graph optimum; if the ellipse holds too
    many cells the search falls back to obstacle-corner cells, and beyond
    that the lazy path stands. Plain Lazy Theta* under the conservative
    supercover visibility rule can exceed the optimum by several percent on
    cluttered grids, which the refinement repairs at bounded cost.

    An occupied start cell snaps to the nearest free cell within
    `start_snap_cells` (the pushee may rest on the inflation ring); an
    occupied goal raises GoalOccupied; an unreachable goal raises NoPath.
    With a `cost` array (>= 1 per cell) edge lengths are scaled by the mean
    traversal cost along the segment's supercover cells and no refinement
    runs.
    """
    cells = np.ascontiguousarray(grid.cells.astype(np.uint8))
    h, w = cells.shape
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    sr, sc = grid.cell_of(start[0], start[1])
    gr, gc = grid.cell_of(goal[0], goal[1])
    if not grid.in_grid(sr, sc):
        raise StartOccupied("start outside the grid")
    if not grid.in_grid(gr, gc):
        raise GoalOccupied("goal outside the grid")
    if cells[gr, gc]:
        raise GoalOccupied(f"goal cell {(gr, gc)} occupied")
    snapped = False
    if cells[sr, sc]:
        hit = _snap_start(cells, sr, sc, start_snap_cells)
        if hit is None:
            raise StartOccupied(f"start cell {(sr, sc)} occupied with no free cell within "
                                f"{start_snap_cells} cells")
        sr, sc = hit
        snapped = True

    res = grid.resolution
    use_cost = cost is not None
    cost_arr = (np.ascontiguousarray(np.asarray(cost, dtype=np.float64))
                if use_cost else np.ones((1, 1)))

    first = np.array(grid.center_of(sr, sc)) if snapped else start

    if (sr, sc) == (gr, gc):
        pts = np.array([first, goal])
        return Path(waypoints=pts, length=_polyline_length(pts))

    if not use_cost and _los_cells(cells, sr, sc, gr, gc):
        # straight segment is optimal on a uniform grid
        x0, y0 = (first - (grid.origin[0], grid.origin[1])) / res
        x1, y1 = (goal - (grid.origin[0], grid.origin[1])) / res
        if snapped or _los_points(cells, x0, y0, x1, y1):
            pts = np.array([first, goal])
            return Path(waypoints=pts, length=_polyline_length(pts))

    found, parent = _lazy_theta(cells, cost_arr, use_cost, sr, sc, gr, gc)
    if not found:
        raise NoPath(f"goal cell {(gr, gc)} unreachable from {(sr, sc)}")

    chain = []
    node = gr * w + gc
    start_idx = sr * w + sc
    while node != start_idx:
        chain.append(node)
        node = parent[node]
    chain.append(start_idx)
    chain.reverse()
    cell_chain = [(i // w, i % w) for i in chain]

    if refine and not use_cost:
        lazy_cells_len = sum(math.hypot(a[0] - b[0], a[1] - b[1])
                             for a, b in zip(cell_chain[:-1], cell_chain[1:]))
        cell_chain = _refined_chain(cells, sr, sc, gr, gc, lazy_cells_len, cell_chain)

    centers = np.array([grid.center_of(r, c) for r, c in cell_chain])

    pts = [first]
    if snapped:
        pts.extend(centers[1:-1])
    else:
        # splice the exact start: keep the start cell center if the direct
        # segment to the second waypoint is not collision-free
        ox, oy = grid.origin
        if len(centers) > 1:
            x0, y0 = (start[0] - ox) / res, (start[1] - oy) / res
            x1, y1 = (centers[1][0] - ox) / res, (centers[1][1] - oy) / res
            if not _los_points(cells, x0, y0, x1, y1):
                pts.append(centers[0])
        pts.extend(centers[1:-1])
    ox, oy = grid.origin
    x0, y0 = (pts[-1][0] - ox) / res, (pts[-1][1] - oy) / res
    x1, y1 = (goal[0] - ox) / res, (goal[1] - oy) / res
    if not _los_points(cells, x0, y0, x1, y1):
        pts.append(centers[-1])
    pts.append(goal)
    waypoints = np.array(pts)
    return Path(waypoints=waypoints, length=_polyline_length(waypoints))


def path_length(path: Path) -> float:
    """Sum of segment lengths; a single waypoint has length 0."""
    if path.waypoints is None or len(path.waypoints) == 0:
        raise EmptyPath("path has no waypoints")
    return _polyline_length(np.asarray(path.waypoints, dtype=float))


def point_at_fraction(path: Path, fraction: float) -> np.ndarray:
    """World point at `fraction` of the path's arc length (endpoint if degenerate)."""
    pts = np.asarray(path.waypoints, dtype=float)
    if len(pts) == 0:
        raise EmptyPath("path has no waypoints")
    total = _polyline_length(pts)
    if total == 0.0:
        return pts[-1].copy()
    target = fraction * total
    walked = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.linalg.norm(b - a))
        if walked + seg >= target and seg > 0.0:
            t = (target - walked) / seg
            return a + t * (b - a)
        walked += seg
    return pts[-1].copy()


def sample_subgoals(path_now: Path, path_history, lag: int,
                    pushee_pose: Pose2D) -> SubgoalPair:
    """Current and lagged 20%-arc-length subgoals in the pushee frame.

    `path_history` holds the paths of the previous steps (most recent last);
    with fewer than `lag` entries the oldest available is used, and with an
    empty history the current path stands in.
    """
    if path_now is None or len(path_now.waypoints) == 0:
        raise EmptyPath("current path is empty")
    now_world = point_at_fraction(path_now, SUBGOAL_FRACTION)
    history = list(path_history)
    if len(history) >= lag:
        lag_path = history[-lag]
    elif history:
        lag_path = history[0]
    else:
        lag_path = path_now
    lag_world = point_at_fraction(lag_path, SUBGOAL_FRACTION)
    now_rel = pushee_pose.inverse_transform(now_world)
    lag_rel = pushee_pose.inverse_transform(lag_world)
    return SubgoalPair(sg_now=(float(now_rel[0]), float(now_rel[1])),
                       sg_lagged=(float(lag_rel[0]), float(lag_rel[1])),
                       lag=lag)
