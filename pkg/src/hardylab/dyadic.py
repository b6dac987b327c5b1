"""Dyadic cubes, Whitney decompositions in the sup metric, and their bump partitions.

A cube at level ``j`` with index ``(i, k)`` is the closed square
``[i 2^-j, (i+1) 2^-j] x [k 2^-j, (k+1) 2^-j]``. Its side and its sup-norm
diameter are both ``2^-j``.
"""

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DyadicCube",
    "WhitneyDecomposition",
    "AssociatedCubes",
    "PartitionOfUnity",
    "PorousSearchError",
    "UnresolvedRegionError",
    "whitney",
    "associated_cube",
    "associated_cubes",
    "near_boundary_family",
    "porous_subcube",
    "partition_eval",
    "smooth_step",
    "box_levels",
]

OUTSIDE = -1
FRINGE = -2


class PorousSearchError(LookupError):
    """No Whitney cell of the required size was found near the point."""

    def __init__(self, message, reason):
        super().__init__(message)
        self.reason = reason


class UnresolvedRegionError(ValueError):
    """A query point fell into the unresolved fringe next to the set."""


@dataclass(frozen=True, order=True)
class DyadicCube:
    level_j: int
    i: int
    k: int

    @property
    def side(self):
        return 2.0**-self.level_j

    @property
    def half_side(self):
        return 0.5 * self.side

    @property
    def center(self):
        h = self.side
        return np.array([(self.i + 0.5) * h, (self.k + 0.5) * h])

    @property
    def diam(self):
        return self.side

    def contains(self, points, dilation=1.0):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.max(np.abs(p - self.center), axis=1) <= dilation * self.half_side

    def children(self):
        j = self.level_j + 1
        return [DyadicCube(j, 2 * self.i + a, 2 * self.k + b) for a in (0, 1) for b in (0, 1)]


def cube_centers(levels, ix, iy):
    side = 2.0 ** -np.asarray(levels, dtype=float)
    return np.stack([(np.asarray(ix) + 0.5) * side, (np.asarray(iy) + 0.5) * side], axis=1)


def box_levels(box):
    """Coarsest level j at which ``box`` is a union of level-j dyadic cubes."""
    x0, x1, y0, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box}")
    for j in range(-30, 60):
        h = 2.0**-j
        if all(float(v / h).is_integer() for v in (x0, x1, y0, y1)):
            return j
    raise ValueError(f"box {box} is not dyadically aligned")


def _initial_cubes(box, level):
    x0, x1, y0, y1 = box
    h = 2.0**-level
    ii = np.arange(round(x0 / h), round(x1 / h), dtype=np.int64)
    kk = np.arange(round(y0 / h), round(y1 / h), dtype=np.int64)
    gi, gk = np.meshgrid(ii, kk, indexing="ij")
    return gi.ravel(), gk.ravel()


class _LevelIndex:
    """Point -> containing cube lookup over a set of dyadic cubes of mixed levels."""

    def __init__(self, levels, ix, iy):
        self.by_level = {}
        levels = np.asarray(levels)
        for j in np.unique(levels):
            sel = np.nonzero(levels == j)[0]
            keys = _pack(ix[sel], iy[sel])
            order = np.argsort(keys)
            self.by_level[int(j)] = (keys[order], sel[order])

    def locate(self, points, levels=None):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.full(len(p), -1, dtype=np.int64)
        for j, (keys, ids) in self.by_level.items():
            if levels is not None and j not in levels:
                continue
            todo = np.nonzero(out < 0)[0]
            if todo.size == 0:
                break
            scale = 2.0**j
            qi = np.floor(p[todo, 0] * scale).astype(np.int64)
            qk = np.floor(p[todo, 1] * scale).astype(np.int64)
            q = _pack(qi, qk)
            pos = np.searchsorted(keys, q)
            pos = np.minimum(pos, len(keys) - 1)
            hit = keys[pos] == q
            out[todo[hit]] = ids[pos[hit]]
        return out


def _pack(i, k):
    return (np.asarray(i, dtype=np.int64) << 32) + (np.asarray(k, dtype=np.int64) + (1 << 31))


@dataclass(eq=False)
class WhitneyDecomposition:
    """Truncated Whitney cover of ``box`` minus the set, in the sup metric.

    ``dist_center`` caches dist(x_Q, S); ``dist_cube`` caches dist(Q, S).
    Fringe cubes are level-``max_level`` cubes that still sit closer to the
    set than their diameter; they are not part of the cover.
    """

    levels: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    dist_center: np.ndarray
    dist_cube: np.ndarray
    fringe_ix: np.ndarray
    fringe_iy: np.ndarray
    fringe_dist: np.ndarray
    box: tuple
    max_level: int
    start_level: int

    def __post_init__(self):
        self._index = None
        self._fringe_index = None
        self._touching = None
        self.cache_file = None

    def __len__(self):
        return len(self.levels)

    @property
    def side(self):
        return 2.0 ** -self.levels.astype(float)

    @property
    def half_side(self):
        return 0.5 * self.side

    @property
    def centers(self):
        return cube_centers(self.levels, self.ix, self.iy)

    @property
    def fringe_centers(self):
        lv = np.full(len(self.fringe_ix), self.max_level)
        return cube_centers(lv, self.fringe_ix, self.fringe_iy)

    @property
    def fringe_volume(self):
        return len(self.fringe_ix) * 4.0**-self.max_level

    @property
    def fringe_half_side(self):
        return 0.5 * 2.0**-self.max_level

    def cells(self):
        return [DyadicCube(int(j), int(a), int(b)) for j, a, b in zip(self.levels, self.ix, self.iy)]

    def level_counts(self):
        lv, cnt = np.unique(self.levels, return_counts=True)
        return dict(zip(lv.tolist(), cnt.tolist()))

    def whitney_ok(self, dist_cube=None):
        """Per-cell check of diam(Q) <= dist(Q, S) <= 4 diam(Q)."""
        d = self.dist_cube if dist_cube is None else np.asarray(dist_cube)
        s = self.side
        return (s <= d) & (d <= 4 * s)

    def locate(self, points):
        """Cell index per point; -1 outside the cover, -2 in the fringe."""
        if self._index is None:
            self._index = _LevelIndex(self.levels, self.ix, self.iy)
            lv = np.full(len(self.fringe_ix), self.max_level)
            self._fringe_index = _LevelIndex(lv, self.fringe_ix, self.fringe_iy)
        out = self._index.locate(points)
        miss = np.nonzero(out < 0)[0]
        if miss.size:
            f = self._fringe_index.locate(np.asarray(points, dtype=float).reshape(-1, 2)[miss])
            out[miss[f >= 0]] = FRINGE
        return out

    def locate_fringe(self, points):
        self.locate(np.zeros((0, 2)))
        return self._fringe_index.locate(points)

    def touching(self):
        """CSR (offsets, neighbours) of cells sharing at least a corner with each cell."""
        if self._touching is None:
            self._touching = self._compute_touching()
        return self._touching

    def _compute_touching(self):
        # touching Whitney cells differ in size by at most 4x, so probes spaced
        # side/8 just outside the boundary hit every one of them
        t = (np.arange(8) + 0.5) / 8 * 2 - 1
        eps = 1 + 1 / 32
        sides = np.concatenate(
            [
                np.stack([np.full(8, eps), t], 1),
                np.stack([np.full(8, -eps), t], 1),
                np.stack([t, np.full(8, eps)], 1),
                np.stack([t, np.full(8, -eps)], 1),
                np.array([[eps, eps], [eps, -eps], [-eps, eps], [-eps, -eps]]),
            ]
        )
        n = len(self)
        c = self.centers
        h = self.half_side
        self._index_locate(np.zeros((0, 2)))
        owners, others = [], []
        for j in np.unique(self.levels):
            sel = np.nonzero(self.levels == j)[0]
            probes = (c[sel, None, :] + h[sel, None, None] * sides[None, :, :]).reshape(-1, 2)
            # neighbours differ by at most a factor 4 in size
            hit = self._index.locate(probes, levels=range(int(j) - 2, int(j) + 3))
            owners.append(np.repeat(sel, len(sides)))
            others.append(hit)
        owner = np.concatenate(owners) if owners else np.empty(0, np.int64)
        other = np.concatenate(others) if others else np.empty(0, np.int64)
        keep = (other >= 0) & (other != owner)
        a, b = owner[keep], other[keep]
        # symmetrize: a small cell may see a big neighbour that misses it
        key = np.unique(np.concatenate([a * n + b, b * n + a]))
        first, second = key // n, key % n
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.add.at(offsets, first + 1, 1)
        return np.cumsum(offsets), second

    def _index_locate(self, points):
        if self._index is None:
            self.locate(np.zeros((0, 2)))
        return self._index.locate(points)

    # -- serialization -------------------------------------------------

    _RECORD = np.dtype([("level", "<i2"), ("ix", "<i8"), ("iy", "<i8"), ("dist", "<f8")])

    def to_bytes(self):
        meta = {"box": list(self.box), "max_level": self.max_level, "start_level": self.start_level,
                "cells": len(self), "fringe": len(self.fringe_ix)}
        head = json.dumps(meta, sort_keys=True).encode()
        rec = np.empty(len(self) + len(self.fringe_ix), dtype=self._RECORD)
        rec["level"][: len(self)] = self.levels
        rec["ix"][: len(self)] = self.ix
        rec["iy"][: len(self)] = self.iy
        rec["dist"][: len(self)] = self.dist_center
        rec["level"][len(self):] = self.max_level
        rec["ix"][len(self):] = self.fringe_ix
        rec["iy"][len(self):] = self.fringe_iy
        rec["dist"][len(self):] = self.fringe_dist
        return b"HLWD" + len(head).to_bytes(4, "little") + head + rec.tobytes()

    @classmethod
    def from_bytes(cls, blob):
        if blob[:4] != b"HLWD":
            raise ValueError("not a Whitney cache blob")
        n = int.from_bytes(blob[4:8], "little")
        meta = json.loads(blob[8 : 8 + n])
        rec = np.frombuffer(blob[8 + n :], dtype=cls._RECORD)
        m = meta["cells"]
        lv = rec["level"][:m].astype(np.int64)
        dc = rec["dist"][:m].astype(float)
        return cls(
            levels=lv,
            ix=rec["ix"][:m].astype(np.int64),
            iy=rec["iy"][:m].astype(np.int64),
            dist_center=dc,
            dist_cube=np.maximum(dc - 0.5 * 2.0**-lv, 0.0),
            fringe_ix=rec["ix"][m:].astype(np.int64),
            fringe_iy=rec["iy"][m:].astype(np.int64),
            fringe_dist=rec["dist"][m:].astype(float),
            box=tuple(meta["box"]),
            max_level=meta["max_level"],
            start_level=meta["start_level"],
        )


def whitney(S, box=(-2.0, 2.0, -2.0, 2.0), max_level=8, cache_dir=None, cache_key=None):
    """Whitney decomposition of ``box`` minus the cloud of ``S``.

    Cubes are split until diam(Q) <= dist(Q, S); the parent of a kept cube
    was too close, which gives dist(Q, S) <= 4 diam(Q) for all but
    top-level cubes.
    """
    if max_level < 0:
        raise ValueError("max_level must be nonnegative")
    j0 = box_levels(box)
    if j0 > max_level:
        raise ValueError("box is finer than max_level")
    path = None
    if cache_dir is not None and cache_key is not None:
        key = hashlib.sha256(json.dumps([cache_key, list(map(float, box)), max_level]).encode()).hexdigest()[:16]
        path = Path(cache_dir) / "whitney" / f"{key}.bin"
        if path.exists():
            W = WhitneyDecomposition.from_bytes(path.read_bytes())
            W.cache_file = path.name
            return W
    ii, kk = _initial_cubes(box, j0)
    out_l, out_i, out_k, out_d = [], [], [], []
    fringe = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    for j in range(j0, max_level + 1):
        if ii.size == 0:
            break
        side = 2.0**-j
        centers = np.stack([(ii + 0.5) * side, (kk + 0.5) * side], axis=1)
        dc = S.distance(centers)
        dq = np.maximum(dc - 0.5 * side, 0.0)
        keep = dq >= side
        out_l.append(np.full(int(keep.sum()), j, dtype=np.int64))
        out_i.append(ii[keep])
        out_k.append(kk[keep])
        out_d.append(dc[keep])
        rest = ~keep
        if j == max_level:
            fringe = (ii[rest], kk[rest], dc[rest])
            break
        ci, ck = ii[rest], kk[rest]
        ii = np.concatenate([2 * ci, 2 * ci + 1, 2 * ci, 2 * ci + 1])
        kk = np.concatenate([2 * ck, 2 * ck, 2 * ck + 1, 2 * ck + 1])
    levels = np.concatenate(out_l) if out_l else np.empty(0, np.int64)
    dcen = np.concatenate(out_d) if out_d else np.empty(0)
    W = WhitneyDecomposition(
        levels=levels,
        ix=np.concatenate(out_i) if out_i else np.empty(0, np.int64),
        iy=np.concatenate(out_k) if out_k else np.empty(0, np.int64),
        dist_center=dcen,
        dist_cube=np.maximum(dcen - 0.5 * 2.0**-levels.astype(float), 0.0),
        fringe_ix=fringe[0],
        fringe_iy=fringe[1],
        fringe_dist=fringe[2],
        box=tuple(map(float, box)),
        max_level=max_level,
        start_level=j0,
    )
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(W.to_bytes())
        W.cache_file = path.name
    return W


@dataclass
class AssociatedCubes:
    """Nearby boundary cubes a(Q) = Q(a_Q, r_Q / 2), one row per Whitney cell."""

    anchors: np.ndarray
    anchor_index: np.ndarray
    half_side: np.ndarray
    parent_half_side: np.ndarray

    def __len__(self):
        return len(self.anchors)


def associated_cubes(W, S, fringe=False):
    """a(Q) for every Whitney cell (or every fringe cube when ``fringe``)."""
    if fringe:
        centers = W.fringe_centers
        r = np.full(len(centers), W.fringe_half_side)
    else:
        centers = W.centers
        r = W.half_side
    _, idx = S.nearest(centers)
    return AssociatedCubes(S.points[idx], idx, 0.5 * r, r)


def associated_cube(Q, S):
    """Single-cube form: returns (a_Q, half-side of a(Q))."""
    _, idx = S.nearest(Q.center[None, :])
    return S.points[idx[0]].copy(), 0.5 * Q.half_side


def near_boundary_family(S, gamma, max_level, box=(-2.0, 2.0, -2.0, 2.0)):
    """Dyadic cubes inside ``box`` with dist(x_Q, S) / gamma <= side <= 1.

    Returns (levels, ix, iy). Children of rejected cubes are never accepted
    (gamma >= 1), so the search prunes.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    j_start = max(0, box_levels(box))
    ii, kk = _initial_cubes(box, j_start)
    out = ([], [], [])
    for j in range(j_start, max_level + 1):
        if ii.size == 0:
            break
        side = 2.0**-j
        centers = np.stack([(ii + 0.5) * side, (kk + 0.5) * side], axis=1)
        dc = S.distance(centers)
        ok = dc <= gamma * side
        out[0].append(np.full(int(ok.sum()), j, dtype=np.int64))
        out[1].append(ii[ok])
        out[2].append(kk[ok])
        ci, ck = ii[ok], kk[ok]
        ii = np.concatenate([2 * ci, 2 * ci + 1, 2 * ci, 2 * ci + 1])
        kk = np.concatenate([2 * ck, 2 * ck, 2 * ck + 1, 2 * ck + 1])
    if not out[0]:
        e = np.empty(0, np.int64)
        return e, e, e
    return tuple(np.concatenate(a) for a in out)


def porous_subcube(x, i, kappa, S, W, grid=41):
    """A Whitney cell Q inside Q(x, 2^-i) with 2^-(i+1) / (5 kappa) <= diam Q <= 2^-(i+1).

    Follows the porosity argument: look for y in Q(x, 2^-(i+1)) whose
    sup-distance to S exceeds 2^-(i+1) / kappa (plus the cloud resolution),
    then return the cell containing y.
    """
    x = np.asarray(x, dtype=float)
    r = 2.0 ** -(i + 1)
    t = np.linspace(-1, 1, grid)
    gx, gy = np.meshgrid(t, t, indexing="ij")
    ys = x + r * np.stack([gx.ravel(), gy.ravel()], 1)
    d = S.distance(ys) - S.resolution
    good = np.nonzero(d > r / kappa)[0]
    if good.size == 0:
        raise PorousSearchError(f"no hole of radius 2^-{i + 1}/{kappa} near {x}", "kappa")
    # farthest hole first, then lexicographic for determinism
    order = good[np.lexsort((ys[good, 1], ys[good, 0], -d[good]))]
    cells = W.locate(ys[order])
    lo, hi = r / (5 * kappa), r
    for c in cells:
        if c < 0:
            continue
        side = 2.0 ** -float(W.levels[c])
        center = cube_centers(W.levels[c : c + 1], W.ix[c : c + 1], W.iy[c : c + 1])[0]
        inside = np.max(np.abs(center - x)) + side / 2 <= 2 * r
        if lo <= side <= hi and inside:
            return DyadicCube(int(W.levels[c]), int(W.ix[c]), int(W.iy[c]))
    raise PorousSearchError(f"holes found near {x} but no Whitney cell of the right size", "depth")


def smooth_step(u):
    """C-infinity step: 1 for u <= 0, 0 for u >= 1, built from exp(-1/t)."""
    u = np.asarray(u, dtype=float)
    a = np.where(u < 1, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    b = np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    return a / (a + b)


def bump(points, centers, half):
    """Tensor bump: 1 on Q, 0 outside (9/8)Q, smooth in between."""
    t = np.abs(points - centers) / np.asarray(half)[..., None]
    return np.prod(smooth_step((t - 1.0) * 8.0), axis=-1)


class PartitionOfUnity:
    """phi_Q = b_Q / sum_Q' b_Q' over the Whitney cells, supp phi_Q in (9/8)Q."""

    def __init__(self, W):
        self.W = W
        self._centers = W.centers
        self._half = W.half_side

    def weights(self, points, on_fringe="raise"):
        """Sparse partition values at ``points``.

        Returns (row, cell, phi) triplets plus the per-point cell lookup.
        Points in the fringe raise UnresolvedRegionError unless
        ``on_fringe="skip"``.
        """
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        home = self.W.locate(p)
        if on_fringe == "raise" and np.any(home == FRINGE):
            bad = p[home == FRINGE][:3]
            raise UnresolvedRegionError(f"points in the unresolved fringe, e.g. {bad.tolist()}")
        offs, nbrs = self.W.touching()
        ok = np.nonzero(home >= 0)[0]
        h = home[ok]
        counts = offs[h + 1] - offs[h] + 1
        rows = np.repeat(ok, counts)
        start = np.repeat(offs[h], counts)
        within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        first = within == 0
        cells = np.empty(len(rows), dtype=np.int64)
        cells[first] = h
        nb_pos = start[~first] + within[~first] - 1
        cells[~first] = nbrs[nb_pos]
        b = bump(p[rows], self._centers[cells], self._half[cells])
        total = np.zeros(len(p))
        np.add.at(total, rows, b)
        phi = b / total[rows]
        nz = phi > 0
        return rows[nz], cells[nz], phi[nz], home

    def sum(self, points, on_fringe="raise"):
        rows, _, phi, home = self.weights(points, on_fringe)
        out = np.full(len(home), np.nan)
        out[home >= 0] = 0.0
        np.add.at(out, rows, phi)
        return out


def partition_eval(P, Q, x):
    """phi_Q(x) for a single cube ``Q`` (a DyadicCube from the decomposition)."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    W = P.W
    match = np.nonzero((W.levels == Q.level_j) & (W.ix == Q.i) & (W.iy == Q.k))[0]
    if match.size == 0:
        raise KeyError(f"{Q} is not a cell of the decomposition")
    rows, cells, phi, home = P.weights(x)
    if np.any(home < 0):
        raise UnresolvedRegionError("point outside the resolved cover")
    out = np.zeros(len(x))
    sel = cells == match[0]
    out[rows[sel]] = phi[sel]
    return out if len(out) > 1 else float(out[0])
