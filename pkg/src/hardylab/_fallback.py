"""Pure-Python (numpy/scipy) twin of the compiled kernels in ``_kernels.pyx``.

Same classes, same signatures, same results. Used when the extension is not
built or when ``HARDYLAB_PURE_PYTHON`` is set.
"""

import numpy as np
from scipy.spatial import cKDTree


class PointTree:
    """Sup-norm queries over a planar point cloud backed by ``cKDTree``."""

    def __init__(self, points, leafsize=16):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (N, 2) array")
        self.n = pts.shape[0]
        self.leafsize = max(int(leafsize), 1)
        self._pts = pts
        self._tree = cKDTree(pts, leafsize=self.leafsize)

    def nearest(self, queries):
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 2)
        dist, index = self._tree.query(q, k=1, p=np.inf)
        index = np.asarray(index, dtype=np.intp)
        # cKDTree returns an arbitrary point among ties; re-resolve them
        ties = self._tree.query_ball_point(q, dist * (1 + 1e-12) + 1e-300, p=np.inf)
        for j, cand in enumerate(ties):
            if len(cand) < 2:
                continue
            cand = np.asarray(cand)
            pc = self._pts[cand]
            d = np.max(np.abs(pc - q[j]), axis=1)
            keep = cand[d == d.min()]
            pk = self._pts[keep]
            best = np.lexsort((keep, pk[:, 1], pk[:, 0]))[0]
            dist[j] = d.min()
            index[j] = keep[best]
        return np.asarray(dist, dtype=np.float64), index

    def box_query(self, centers, half):
        c = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
        h = np.broadcast_to(np.asarray(half, dtype=np.float64), (c.shape[0],))
        lists = self._tree.query_ball_point(c, h, p=np.inf)
        counts = np.fromiter((len(x) for x in lists), dtype=np.intp, count=len(lists))
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
        if offsets[-1] == 0:
            return offsets, np.empty(0, dtype=np.intp)
        indices = np.concatenate([np.asarray(x, dtype=np.intp) for x in lists])
        return offsets, indices

    def box_sum(self, centers, half, weights):
        w_in = np.asarray(weights, dtype=np.float64)
        if w_in.shape[0] != self.n:
            raise ValueError("weights must have one entry per point")
        w = w_in.reshape(self.n, -1)
        offsets, indices = self.box_query(centers, half)
        out = np.zeros((len(offsets) - 1, w.shape[1]))
        nz = np.diff(offsets) > 0
        if indices.size:
            out[nz] = np.add.reduceat(w[indices], offsets[:-1][nz], axis=0)
        return out[:, 0] if w_in.ndim == 1 else out

    def riesz_sum(self, queries, t, sigma, weights):
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(weights, dtype=np.float64)
        if w.shape[0] != self.n:
            raise ValueError("weights must have one entry per point")
        lists = self._tree.query_ball_point(q, t, p=np.inf)
        sums = np.zeros(q.shape[0])
        hits = np.zeros(q.shape[0], dtype=np.intp)
        for j, cand in enumerate(lists):
            if not cand:
                continue
            cand = np.asarray(cand)
            r2 = np.sum((self._pts[cand] - q[j]) ** 2, axis=1)
            zero = r2 == 0.0
            hits[j] = int(zero.sum())
            sums[j] = np.sum(w[cand][~zero] * r2[~zero] ** (-0.5 * sigma))
        return sums, hits


class PolygonIndex:
    """Strict point-in-polygon test, edges bucketed by y, vectorized per bucket."""

    def __init__(self, vertices, nbins=None):
        verts = np.ascontiguousarray(vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError("polygon needs at least three (x, y) vertices")
        self._v0 = verts
        self._v1 = np.roll(verts, -1, axis=0)
        self.nv = verts.shape[0]
        self.ymin = verts[:, 1].min()
        self.ymax = verts[:, 1].max()
        span = max(self.ymax - self.ymin, 1e-300)
        self.tol = 1e-13 * max(span, np.ptp(verts[:, 0]))
        if nbins is None:
            nbins = int(min(max(self.nv // 4, 1), 1 << 16))
        self.nbins = nbins
        self.binh = span / nbins
        y0, y1 = self._v0[:, 1], self._v1[:, 1]
        lo = np.clip(np.floor((np.minimum(y0, y1) - self.ymin) / self.binh).astype(np.intp), 0, nbins - 1)
        hi = np.clip(np.floor((np.maximum(y0, y1) - self.ymin) / self.binh).astype(np.intp), 0, nbins - 1)
        counts = hi - lo + 1
        edge_ids = np.repeat(np.arange(self.nv, dtype=np.intp), counts)
        within = np.arange(counts.sum(), dtype=np.intp) - np.repeat(np.cumsum(counts) - counts, counts)
        bins = np.repeat(lo, counts) + within
        order = np.argsort(bins, kind="stable")
        self._edges = edge_ids[order]
        off = np.zeros(nbins + 1, dtype=np.intp)
        np.add.at(off, bins + 1, 1)
        self._off = np.cumsum(off)

    def contains(self, points):
        q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        out = np.zeros(q.shape[0], dtype=bool)
        inrange = (q[:, 1] >= self.ymin) & (q[:, 1] <= self.ymax)
        b = np.clip(np.floor((q[:, 1] - self.ymin) / self.binh).astype(np.intp), 0, self.nbins - 1)
        tol = self.tol
        for bin_id in np.unique(b[inrange]):
            sel = np.nonzero(inrange & (b == bin_id))[0]
            e = self._edges[self._off[bin_id]:self._off[bin_id + 1]]
            if e.size == 0:
                continue
            x, y = q[sel, 0:1], q[sel, 1:2]
            x0, y0 = self._v0[e, 0], self._v0[e, 1]
            x1, y1 = self._v1[e, 0], self._v1[e, 1]
            cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
            on_edge = (
                (np.abs(cross) <= tol * (np.abs(x1 - x0) + np.abs(y1 - y0)))
                & (x >= np.minimum(x0, x1) - tol) & (x <= np.maximum(x0, x1) + tol)
                & (y >= np.minimum(y0, y1) - tol) & (y <= np.maximum(y0, y1) + tol)
            )
            straddle = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            crossings = np.sum(straddle & (x < xc), axis=1)
            out[sel] = (crossings % 2 == 1) & ~on_edge.any(axis=1)
        return out
