"""Independent slow references used by the tests."""

import numpy as np


def brute_nearest(points, queries):
    """Sup-norm nearest neighbour by exhaustive scan; ties go to the lexicographically smallest point, then the lowest index."""
    d = np.max(np.abs(points[None, :, :] - queries[:, None, :]), axis=2)
    best = d.min(axis=1)
    idx = np.empty(len(queries), dtype=np.intp)
    for j in range(len(queries)):
        cand = np.nonzero(d[j] == best[j])[0]
        pc = points[cand]
        idx[j] = cand[np.lexsort((cand, pc[:, 1], pc[:, 0]))[0]]
    return best, idx


def brute_distance(points, queries, chunk=256):
    out = np.empty(len(queries))
    for a in range(0, len(queries), chunk):
        q = queries[a : a + chunk]
        out[a : a + chunk] = np.max(np.abs(points[None, :, :] - q[:, None, :]), axis=2).min(axis=1)
    return out


def winding_inside(vertices, points):
    """Winding-number point-in-polygon test (nonzero rule)."""
    v0 = vertices
    v1 = np.roll(vertices, -1, axis=0)
    wn = np.zeros(len(points), dtype=np.int64)
    for a, b in zip(v0, v1):
        cross = (b[0] - a[0]) * (points[:, 1] - a[1]) - (points[:, 0] - a[0]) * (b[1] - a[1])
        up = (a[1] <= points[:, 1]) & (b[1] > points[:, 1]) & (cross > 0)
        down = (a[1] > points[:, 1]) & (b[1] <= points[:, 1]) & (cross < 0)
        wn += up.astype(np.int64) - down.astype(np.int64)
    return wn != 0


def whitney_point_oracle(box, max_level):
    """Whitney cubes for S = {origin} by direct recursion over all dyadic cubes."""
    out = []
    j0 = 0
    x0, x1, y0, y1 = box
    side = 2.0**-j0
    stack = [(j0, i, k) for i in range(int(np.floor(x0 / side)), int(np.ceil(x1 / side)))
             for k in range(int(np.floor(y0 / side)), int(np.ceil(y1 / side)))]
    while stack:
        j, i, k = stack.pop()
        s = 2.0**-j
        c = np.array([(i + 0.5) * s, (k + 0.5) * s])
        dq = max(np.max(np.abs(c)) - s / 2, 0.0)
        if dq >= s:
            out.append((j, i, k))
        elif j < max_level:
            stack += [(j + 1, 2 * i + a, 2 * k + b) for a in (0, 1) for b in (0, 1)]
    return sorted(out)


def windowed_distance(points, queries, stride=64, chunk=512):
    """Exact sup distance to a large cloud by exhaustive scan inside a certified window.

    A strided subset of the cloud gives an upper bound u for each query; every
    point with |x - q_x| <= u is then scanned, so nothing closer is missed.
    """
    order = np.argsort(points[:, 0], kind="stable")
    px = points[order]
    sub = points[::stride]
    out = np.empty(len(queries))
    for a in range(0, len(queries), chunk):
        q = queries[a : a + chunk]
        u = np.max(np.abs(sub[None, :, :] - q[:, None, :]), axis=2).min(axis=1)
        # widen by roundoff so the point realising u stays inside
        u = u * (1 + 1e-12) + 1e-15
        lo = np.searchsorted(px[:, 0], q[:, 0] - u, side="left")
        hi = np.searchsorted(px[:, 0], q[:, 0] + u, side="right")
        for j in range(len(q)):
            win = px[lo[j] : hi[j]]
            out[a + j] = np.max(np.abs(win - q[j]), axis=1).min()
    return out
