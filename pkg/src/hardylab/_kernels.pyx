# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled point-cloud and polygon kernels.

PointTree is a static 2-d tree over a planar point cloud answering sup-norm
nearest-point queries, closed-box range queries and truncated Riesz sums.
PolygonIndex answers strict point-in-polygon queries for a closed ring.
The pure-Python twin lives in ``_fallback.py`` and must return identical
results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, floor, INFINITY
from libcpp.vector cimport vector

cnp.import_array()

ctypedef cnp.intp_t intp

cdef enum:
    STACK = 128


cdef inline double _dmax(double a, double b) nogil:
    return a if a > b else b


cdef inline double _dmin(double a, double b) nogil:
    return a if a < b else b


cdef void _select(double* xy, intp* idx, intp lo, intp hi, intp k, int dim) noexcept nogil:
    # quickselect on idx[lo:hi] by coordinate dim, kth element lands at k
    cdef intp i, j, mid, tmp
    cdef double pivot
    hi -= 1
    while hi > lo:
        mid = lo + (hi - lo) // 2
        # median of three
        if xy[2 * idx[mid] + dim] < xy[2 * idx[lo] + dim]:
            tmp = idx[mid]; idx[mid] = idx[lo]; idx[lo] = tmp
        if xy[2 * idx[hi] + dim] < xy[2 * idx[lo] + dim]:
            tmp = idx[hi]; idx[hi] = idx[lo]; idx[lo] = tmp
        if xy[2 * idx[hi] + dim] < xy[2 * idx[mid] + dim]:
            tmp = idx[hi]; idx[hi] = idx[mid]; idx[mid] = tmp
        pivot = xy[2 * idx[mid] + dim]
        i = lo
        j = hi
        while i <= j:
            while xy[2 * idx[i] + dim] < pivot:
                i += 1
            while xy[2 * idx[j] + dim] > pivot:
                j -= 1
            if i <= j:
                tmp = idx[i]; idx[i] = idx[j]; idx[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return


cdef class PointTree:
    """Static 2-d tree; queries use the sup norm unless stated otherwise."""

    cdef double[:, ::1] xy
    cdef intp[::1] perm
    cdef intp[::1] n_start
    cdef intp[::1] n_end
    cdef intp[::1] n_left
    cdef intp[::1] n_right
    cdef double[:, ::1] n_box
    cdef intp nnodes
    cdef readonly intp n
    cdef readonly intp leafsize

    def __init__(self, points, intp leafsize=16):
        pts = np.array(points, dtype=np.float64, order="C", copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (N, 2) array")
        self.n = pts.shape[0]
        self.leafsize = max(leafsize, 1)
        idx = np.arange(self.n, dtype=np.intp)
        cap = 2 * (self.n // self.leafsize + 1) + 1
        self.n_start = np.empty(2 * cap, dtype=np.intp)
        self.n_end = np.empty(2 * cap, dtype=np.intp)
        self.n_left = np.empty(2 * cap, dtype=np.intp)
        self.n_right = np.empty(2 * cap, dtype=np.intp)
        self.n_box = np.empty((2 * cap, 4), dtype=np.float64)
        cdef double[:, ::1] src = pts
        cdef intp[::1] iv = idx
        self.nnodes = 0
        self._build(&src[0, 0], &iv[0], 0, self.n)
        self.perm = idx
        self.xy = np.ascontiguousarray(pts[idx])

    cdef intp _build(self, double* xy, intp* idx, intp lo, intp hi):
        cdef intp node = self.nnodes
        cdef intp i, mid
        cdef double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY
        cdef double px, py
        self.nnodes += 1
        for i in range(lo, hi):
            px = xy[2 * idx[i]]
            py = xy[2 * idx[i] + 1]
            if px < x0: x0 = px
            if px > x1: x1 = px
            if py < y0: y0 = py
            if py > y1: y1 = py
        self.n_box[node, 0] = x0
        self.n_box[node, 1] = x1
        self.n_box[node, 2] = y0
        self.n_box[node, 3] = y1
        self.n_start[node] = lo
        self.n_end[node] = hi
        if hi - lo <= self.leafsize:
            self.n_left[node] = -1
            self.n_right[node] = -1
            return node
        mid = lo + (hi - lo) // 2
        _select(xy, idx, lo, hi, mid, 0 if (x1 - x0) >= (y1 - y0) else 1)
        self.n_left[node] = self._build(xy, idx, lo, mid)
        self.n_right[node] = self._build(xy, idx, mid, hi)
        return node

    cdef inline double _box_lb(self, intp node, double qx, double qy) noexcept nogil:
        cdef double dx = _dmax(_dmax(self.n_box[node, 0] - qx, qx - self.n_box[node, 1]), 0.0)
        cdef double dy = _dmax(_dmax(self.n_box[node, 2] - qy, qy - self.n_box[node, 3]), 0.0)
        return _dmax(dx, dy)

    cdef void _nearest_one(self, double qx, double qy, double* best_d, intp* best_i) noexcept nogil:
        cdef intp stack[STACK]
        cdef intp sp = 0, node, i, a, b
        cdef double d, bx = INFINITY, by = INFINITY, px, py, best = INFINITY
        cdef intp bi = -1
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if self._box_lb(node, qx, qy) > best:
                continue
            if self.n_left[node] < 0:
                for i in range(self.n_start[node], self.n_end[node]):
                    px = self.xy[i, 0]
                    py = self.xy[i, 1]
                    d = _dmax(fabs(px - qx), fabs(py - qy))
                    if d < best or (d == best and (px < bx or (px == bx and (py < by or (
                            py == by and self.perm[i] < self.perm[bi]))))):
                        best = d
                        bi = i
                        bx = px
                        by = py
                continue
            a = self.n_left[node]
            b = self.n_right[node]
            # push the farther child first so the nearer one is visited next
            if self._box_lb(a, qx, qy) <= self._box_lb(b, qx, qy):
                stack[sp] = b; stack[sp + 1] = a
            else:
                stack[sp] = a; stack[sp + 1] = b
            sp += 2
        best_d[0] = best
        best_i[0] = bi

    def nearest(self, queries):
        """Sup-norm distance and index of the nearest point for each query.

        Ties are broken toward the lexicographically smallest (x, y), then the
        lowest index.
        """
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 2)
        cdef const double[:, ::1] qv = q
        cdef intp m = q.shape[0], j, bi
        dist = np.empty(m, dtype=np.float64)
        index = np.empty(m, dtype=np.intp)
        cdef double[::1] dv = dist
        cdef intp[::1] iv = index
        cdef double bd
        with nogil:
            for j in range(m):
                self._nearest_one(qv[j, 0], qv[j, 1], &bd, &bi)
                dv[j] = bd
                iv[j] = self.perm[bi]
        return dist, index

    def box_query(self, centers, half):
        """Indices of points inside closed boxes Q(c, h), as CSR (offsets, indices)."""
        c = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
        h = np.ascontiguousarray(np.broadcast_to(np.asarray(half, dtype=np.float64), (c.shape[0],)))
        cdef const double[:, ::1] cv = c
        cdef const double[::1] hv = h
        cdef intp m = c.shape[0], j, node, i, sp
        cdef intp stack[STACK]
        cdef double x0, x1, y0, y1, px, py
        cdef vector[intp] out
        offsets = np.empty(m + 1, dtype=np.intp)
        cdef intp[::1] ov = offsets
        with nogil:
            for j in range(m):
                ov[j] = out.size()
                x0 = cv[j, 0] - hv[j]; x1 = cv[j, 0] + hv[j]
                y0 = cv[j, 1] - hv[j]; y1 = cv[j, 1] + hv[j]
                sp = 0
                stack[sp] = 0
                sp += 1
                while sp > 0:
                    sp -= 1
                    node = stack[sp]
                    if (self.n_box[node, 0] > x1 or self.n_box[node, 1] < x0 or
                            self.n_box[node, 2] > y1 or self.n_box[node, 3] < y0):
                        continue
                    if (self.n_box[node, 0] >= x0 and self.n_box[node, 1] <= x1 and
                            self.n_box[node, 2] >= y0 and self.n_box[node, 3] <= y1):
                        for i in range(self.n_start[node], self.n_end[node]):
                            out.push_back(self.perm[i])
                        continue
                    if self.n_left[node] < 0:
                        for i in range(self.n_start[node], self.n_end[node]):
                            px = self.xy[i, 0]
                            py = self.xy[i, 1]
                            if px >= x0 and px <= x1 and py >= y0 and py <= y1:
                                out.push_back(self.perm[i])
                        continue
                    stack[sp] = self.n_left[node]
                    stack[sp + 1] = self.n_right[node]
                    sp += 2
            ov[m] = out.size()
        indices = np.empty(out.size(), dtype=np.intp)
        cdef intp[::1] idv = indices
        cdef intp k
        for k in range(<intp>out.size()):
            idv[k] = out[k]
        return offsets, indices

    def box_sum(self, centers, half, weights):
        """Sum of ``weights`` over points inside each closed box Q(c, h).

        ``weights`` is (N,) or (N, m); the result is (B,) or (B, m).
        Subtree totals are summed bottom-up, so fully covered nodes cost
        O(1) without the cancellation of global prefix differences.
        """
        c = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
        h = np.ascontiguousarray(np.broadcast_to(np.asarray(half, dtype=np.float64), (c.shape[0],)))
        w_in = np.asarray(weights, dtype=np.float64)
        flat = w_in.ndim == 1
        w = np.ascontiguousarray(w_in.reshape(w_in.shape[0], -1))
        if w.shape[0] != self.n:
            raise ValueError("weights must have one entry per point")
        cdef intp m = w.shape[1]
        cdef const double[:, ::1] wv = w
        nsum = np.zeros((self.nnodes, m), dtype=np.float64)
        cdef double[:, ::1] ns = nsum
        cdef intp node, i, col, j, sp, nq = c.shape[0]
        with nogil:
            # children are created after their parent, so reverse order is bottom-up
            for node in range(self.nnodes - 1, -1, -1):
                if self.n_left[node] < 0:
                    for i in range(self.n_start[node], self.n_end[node]):
                        for col in range(m):
                            ns[node, col] += wv[self.perm[i], col]
                else:
                    for col in range(m):
                        ns[node, col] = ns[self.n_left[node], col] + ns[self.n_right[node], col]
        cdef const double[:, ::1] cv = c
        cdef const double[::1] hv = h
        cdef intp stack[STACK]
        cdef double x0, x1, y0, y1, px, py
        total = np.zeros((nq, m), dtype=np.float64)
        cdef double[:, ::1] tv = total
        with nogil:
            for j in range(nq):
                x0 = cv[j, 0] - hv[j]; x1 = cv[j, 0] + hv[j]
                y0 = cv[j, 1] - hv[j]; y1 = cv[j, 1] + hv[j]
                sp = 0
                stack[sp] = 0
                sp += 1
                while sp > 0:
                    sp -= 1
                    node = stack[sp]
                    if (self.n_box[node, 0] > x1 or self.n_box[node, 1] < x0 or
                            self.n_box[node, 2] > y1 or self.n_box[node, 3] < y0):
                        continue
                    if (self.n_box[node, 0] >= x0 and self.n_box[node, 1] <= x1 and
                            self.n_box[node, 2] >= y0 and self.n_box[node, 3] <= y1):
                        for col in range(m):
                            tv[j, col] += ns[node, col]
                        continue
                    if self.n_left[node] < 0:
                        for i in range(self.n_start[node], self.n_end[node]):
                            px = self.xy[i, 0]
                            py = self.xy[i, 1]
                            if px >= x0 and px <= x1 and py >= y0 and py <= y1:
                                for col in range(m):
                                    tv[j, col] += wv[self.perm[i], col]
                        continue
                    stack[sp] = self.n_left[node]
                    stack[sp + 1] = self.n_right[node]
                    sp += 2
        return total[:, 0] if flat else total

    def riesz_sum(self, queries, double t, double sigma, weights):
        """sum_z w_z |y - z|_2^{-sigma} over cloud points z with |y - z|_inf <= t.

        Returns (sums, hits) where hits counts exact coincidences y == z,
        which are skipped.
        """
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 2)
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.shape[0] != self.n:
            raise ValueError("weights must have one entry per point")
        cdef const double[:, ::1] qv = q
        cdef const double[::1] wv = w
        cdef intp m = q.shape[0], j, node, i, sp, hit
        cdef intp stack[STACK]
        cdef double x0, x1, y0, y1, dx, dy, r2, acc, half = 0.5 * sigma
        sums = np.empty(m, dtype=np.float64)
        hits = np.zeros(m, dtype=np.intp)
        cdef double[::1] sv = sums
        cdef intp[::1] hv = hits
        with nogil:
            for j in range(m):
                x0 = qv[j, 0] - t; x1 = qv[j, 0] + t
                y0 = qv[j, 1] - t; y1 = qv[j, 1] + t
                acc = 0.0
                hit = 0
                sp = 0
                stack[sp] = 0
                sp += 1
                while sp > 0:
                    sp -= 1
                    node = stack[sp]
                    if (self.n_box[node, 0] > x1 or self.n_box[node, 1] < x0 or
                            self.n_box[node, 2] > y1 or self.n_box[node, 3] < y0):
                        continue
                    if self.n_left[node] < 0:
                        for i in range(self.n_start[node], self.n_end[node]):
                            dx = self.xy[i, 0] - qv[j, 0]
                            dy = self.xy[i, 1] - qv[j, 1]
                            if fabs(dx) > t or fabs(dy) > t:
                                continue
                            r2 = dx * dx + dy * dy
                            if r2 == 0.0:
                                hit += 1
                                continue
                            acc += wv[self.perm[i]] * pow(r2, -half)
                        continue
                    stack[sp] = self.n_left[node]
                    stack[sp + 1] = self.n_right[node]
                    sp += 2
                sv[j] = acc
                hv[j] = hit
        return sums, hits


cdef class PolygonIndex:
    """Strict point-in-polygon test for a closed ring, edges bucketed by y.

    Points on an edge (including vertices) are reported as outside.
    """

    cdef double[:, ::1] v
    cdef intp nv
    cdef intp nbins
    cdef double ymin, ymax, binh, tol
    cdef intp[::1] b_off
    cdef intp[::1] b_edges

    def __init__(self, vertices, nbins=None):
        verts = np.array(vertices, dtype=np.float64, order="C", copy=True)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError("polygon needs at least three (x, y) vertices")
        self.v = verts
        self.nv = verts.shape[0]
        self.ymin = verts[:, 1].min()
        self.ymax = verts[:, 1].max()
        span = max(self.ymax - self.ymin, 1e-300)
        self.tol = 1e-13 * max(span, np.ptp(verts[:, 0]))
        if nbins is None:
            nbins = int(min(max(self.nv // 4, 1), 1 << 16))
        self.nbins = nbins
        self.binh = span / nbins
        y0 = verts[:, 1]
        y1 = np.roll(verts[:, 1], -1)
        lo = np.clip(np.floor((np.minimum(y0, y1) - self.ymin) / self.binh).astype(np.intp), 0, nbins - 1)
        hi = np.clip(np.floor((np.maximum(y0, y1) - self.ymin) / self.binh).astype(np.intp), 0, nbins - 1)
        counts = hi - lo + 1
        edge_ids = np.repeat(np.arange(self.nv, dtype=np.intp), counts)
        starts = np.repeat(lo, counts)
        within = np.arange(counts.sum(), dtype=np.intp) - np.repeat(np.cumsum(counts) - counts, counts)
        bins = starts + within
        order = np.argsort(bins, kind="stable")
        self.b_edges = np.ascontiguousarray(edge_ids[order])
        off = np.zeros(nbins + 1, dtype=np.intp)
        np.add.at(off, bins + 1, 1)
        self.b_off = np.cumsum(off)

    cdef bint _inside(self, double x, double y) noexcept nogil:
        cdef intp b, k, e, e1
        cdef double x0, y0, x1, y1, cross, xc
        cdef bint inside = False
        if y < self.ymin or y > self.ymax:
            return False
        b = <intp>floor((y - self.ymin) / self.binh)
        if b >= self.nbins:
            b = self.nbins - 1
        if b < 0:
            b = 0
        for k in range(self.b_off[b], self.b_off[b + 1]):
            e = self.b_edges[k]
            e1 = e + 1
            if e1 == self.nv:
                e1 = 0
            x0 = self.v[e, 0]; y0 = self.v[e, 1]
            x1 = self.v[e1, 0]; y1 = self.v[e1, 1]
            cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
            if (fabs(cross) <= self.tol * (fabs(x1 - x0) + fabs(y1 - y0))
                    and x >= _dmin(x0, x1) - self.tol and x <= _dmax(x0, x1) + self.tol
                    and y >= _dmin(y0, y1) - self.tol and y <= _dmax(y0, y1) + self.tol):
                return False
            if (y0 > y) != (y1 > y):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
                if x < xc:
                    inside = not inside
        return inside

    def contains(self, points):
        q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        cdef const double[:, ::1] qv = q
        cdef intp m = q.shape[0], j
        out = np.empty(m, dtype=np.bool_)
        cdef cnp.npy_bool[::1] ov = out
        with nogil:
            for j in range(m):
                ov[j] = self._inside(qv[j, 0], qv[j, 1])
        return out
