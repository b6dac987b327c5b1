"""Self-similar fractal sets in the plane, sup-norm distances and set checks.

Everything here works with the prefractal point cloud: the images of a fixed
point of the first map under all words of length ``depth``, carrying the
self-similar (Moran) measure. Point order is lexicographic in the word, so
``cloud(m + 1)[4 * i] == cloud(m)[i]`` for four-map families.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from hardylab.kernels import PointTree, PolygonIndex

__all__ = [
    "IfsMap",
    "FractalSet",
    "DomainSpec",
    "FractalConfig",
    "moran_dimension",
    "koch_ratio",
    "build_koch_family",
    "build_segment",
    "build_point_set",
    "build_snowflake_domain",
    "sup_distance",
    "check_regularity",
    "check_porosity",
    "RegularityResult",
    "PorosityResult",
    "build_from_config",
    "save_cloud",
    "load_cloud",
]


@dataclass(frozen=True)
class IfsMap:
    """Contracting similarity x -> scale * R(angle) * F x + translation.

    F is the reflection (x, y) -> (x, -y) when ``reflect`` is set.
    """

    rotation_angle: float
    scale: float
    translation: tuple = (0.0, 0.0)
    reflect: bool = False

    def __post_init__(self):
        if not 0.0 < self.scale < 1.0:
            raise ValueError(f"scale must lie in (0, 1), got {self.scale}")

    @property
    def matrix(self):
        c, s = math.cos(self.rotation_angle), math.sin(self.rotation_angle)
        m = self.scale * np.array([[c, -s], [s, c]])
        if self.reflect:
            m = m @ np.diag([1.0, -1.0])
        return m

    def __call__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + np.asarray(self.translation)

    def fixed_point(self):
        return np.linalg.solve(np.eye(2) - self.matrix, np.asarray(self.translation, dtype=float))


def moran_dimension(ratios):
    """Root d of sum(r_i ** d) = 1."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.size == 0 or np.any((r <= 0) | (r >= 1)):
        raise ValueError("ratios must be in (0, 1)")
    if r.size == 1:
        return 0.0
    if np.all(r == r[0]):
        return math.log(r.size) / -math.log(r[0])
    return brentq(lambda d: np.sum(r**d) - 1.0, 0.0, 64.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def koch_ratio(bend_angle):
    """Common contraction ratio of the four-map Koch-type generator."""
    return 1.0 / (2.0 * (1.0 + math.cos(bend_angle)))


def _koch_maps(bend_angle):
    r = koch_ratio(bend_angle)
    c, s = math.cos(bend_angle), math.sin(bend_angle)
    return (
        IfsMap(0.0, r, (0.0, 0.0)),
        IfsMap(bend_angle, r, (r, 0.0)),
        IfsMap(-bend_angle, r, (r + r * c, r * s)),
        IfsMap(0.0, r, (1.0 - r, 0.0)),
    )


def _cloud(maps, depth, seed_point, dimension):
    # f_w(p) for all words, first letter most significant
    pts = np.asarray(seed_point, dtype=np.float64).reshape(1, 2)
    w = np.ones(1)
    for _ in range(depth):
        pts = np.concatenate([m(pts) for m in maps], axis=0)
        w = np.concatenate([w * m.scale**dimension for m in maps])
    return pts, w


@dataclass(eq=False)
class FractalSet:
    """Prefractal point cloud approximating a self-similar d-set.

    ``weights`` carry the Moran measure normalized so that each generating
    component has mass ``diameter_normalization ** dimension_d``.
    Treated as immutable after construction.
    """

    maps: tuple
    dimension_d: float
    depth_m: int
    points: np.ndarray
    weights: np.ndarray
    diameter_normalization: float = 1.0
    family: str = "custom"
    params: dict = field(default_factory=dict)
    resolution: float = 0.0

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) == 0:
            raise ValueError("point cloud must be a nonempty (N, 2) array")
        if self.weights.shape != (len(self.points),) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive, one per point")
        self.points.flags.writeable = False
        self.weights.flags.writeable = False
        self._tree = None

    @property
    def tree(self):
        if self._tree is None:
            self._tree = PointTree(self.points)
        return self._tree

    @property
    def bounding_box(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def moran_residual(self):
        if not self.maps:
            return 0.0
        return abs(sum(m.scale**self.dimension_d for m in self.maps) - 1.0)

    def distance(self, x):
        """Sup-norm distance from each row of ``x`` to the cloud."""
        return self.tree.nearest(np.asarray(x, dtype=np.float64).reshape(-1, 2))[0]

    def nearest(self, x):
        return self.tree.nearest(np.asarray(x, dtype=np.float64).reshape(-1, 2))

    def mass_in_boxes(self, centers, half):
        return self.tree.box_sum(centers, half, self.weights)


def build_koch_family(bend_angle, depth_m):
    """Koch-type arc from (0, 0) to (1, 0) with four maps bent by ``bend_angle``."""
    if not 0.0 < bend_angle < math.pi / 2:
        raise ValueError(
            f"bend angle {bend_angle!r} outside (0, pi/2): generator self-intersects or degenerates"
        )
    if depth_m < 0:
        raise ValueError("depth must be nonnegative")
    maps = _koch_maps(bend_angle)
    d = moran_dimension([m.scale for m in maps])
    pts, w = _cloud(maps, depth_m, (0.0, 0.0), d)
    return FractalSet(
        maps=maps,
        dimension_d=d,
        depth_m=depth_m,
        points=pts,
        weights=w,
        family="koch",
        params={"bend_angle": bend_angle},
        resolution=koch_ratio(bend_angle) ** depth_m,
    )


def build_segment(depth_m, start=(0.0, 0.0), end=(1.0, 0.0)):
    """Straight segment as the attractor of two half-scale maps (d = 1)."""
    p0 = np.asarray(start, dtype=float)
    p1 = np.asarray(end, dtype=float)
    v = p1 - p0
    length = float(np.hypot(*v))
    ang = math.atan2(v[1], v[0])
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    maps = (
        IfsMap(0.0, 0.5, tuple(p0 - 0.5 * p0)),
        IfsMap(0.0, 0.5, tuple(p0 + 0.5 * v - 0.5 * p0)),
    )
    pts, w = _cloud(maps, depth_m, p0, 1.0)
    return FractalSet(
        maps=maps,
        dimension_d=1.0,
        depth_m=depth_m,
        points=pts,
        weights=w * length,
        diameter_normalization=length,
        family="segment",
        params={"start": tuple(p0), "end": tuple(p1), "rotation": rot.tolist()},
        resolution=length * 0.5**depth_m,
    )


def build_point_set(points, dimension_d=0.0, weights=None, resolution=0.0):
    """Finite point set treated as a degenerate d-set (test fixtures, oracles)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if weights is None:
        weights = np.full(len(pts), 1.0 / len(pts))
    return FractalSet(
        maps=(),
        dimension_d=float(dimension_d),
        depth_m=0,
        points=pts,
        weights=np.asarray(weights, dtype=float),
        family="points",
        resolution=resolution,
    )


@dataclass(eq=False)
class DomainSpec:
    """Interior of a closed polygonal prefractal curve with its boundary set."""

    boundary: FractalSet
    vertices: np.ndarray
    box: tuple = (-2.0, 2.0, -2.0, 2.0)

    def __post_init__(self):
        self._poly = None

    @property
    def polygon(self):
        if self._poly is None:
            self._poly = PolygonIndex(self.vertices)
        return self._poly

    def inside(self, points):
        """Membership in the open domain; boundary vertices and edges are outside."""
        return self.polygon.contains(np.asarray(points, dtype=np.float64).reshape(-1, 2))

    @property
    def centroid(self):
        return self.boundary.params.get("centroid", (0.0, 0.0))


def build_snowflake_domain(bend_angle, depth_m, side=1.0, box=(-2.0, 2.0, -2.0, 2.0)):
    """Koch-type snowflake: equilateral triangle centred at the origin, bumps outward."""
    arc = build_koch_family(bend_angle, depth_m)
    h = side * math.sqrt(3.0) / 2.0
    a = np.array([-side / 2, -h / 3])
    b = np.array([side / 2, -h / 3])
    c = np.array([0.0, 2 * h / 3])
    # clockwise traversal puts the (left-bending) bumps outside the triangle
    edges = [(a, c), (c, b), (b, a)]
    pieces, weights = [], []
    for p, q in edges:
        v = q - p
        ang = math.atan2(v[1], v[0])
        rot = side * np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        pieces.append(arc.points @ rot.T + p)
        weights.append(arc.weights * side**arc.dimension_d)
    boundary = FractalSet(
        maps=arc.maps,
        dimension_d=arc.dimension_d,
        depth_m=depth_m,
        points=np.concatenate(pieces),
        weights=np.concatenate(weights),
        diameter_normalization=side,
        family="snowflake",
        params={"bend_angle": bend_angle, "side": side, "centroid": (0.0, 0.0), "components": 3},
        resolution=side * arc.resolution,
    )
    return DomainSpec(boundary=boundary, vertices=boundary.points, box=tuple(box))


def sup_distance(x, S):
    """Sup-norm distance from point(s) ``x`` to the cloud of ``S``."""
    x = np.asarray(x, dtype=np.float64)
    d = S.distance(x.reshape(-1, 2))
    return float(d[0]) if x.ndim == 1 else d


@dataclass
class RegularityResult:
    c_low: float
    c_high: float
    ratios: np.ndarray
    radii: np.ndarray
    unreliable: np.ndarray

    @property
    def spread(self):
        return self.c_high / self.c_low


def check_regularity(S, num_centers, radii, seed=0, extra=()):
    """Bracket mass(Q(w, r)) / r^d over sampled cloud centres w and radii r.

    ``extra`` lists cloud indices always included as centres (endpoints,
    say). Radii at or below the prefractal resolution are flagged
    unreliable and excluded from the bracket unless nothing else is left.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if num_centers > len(S.points):
        raise ValueError("more centres requested than cloud points")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(S.points), size=num_centers, replace=False))
    idx = np.union1d(idx, np.asarray(extra, dtype=np.int64))
    centers = S.points[idx]
    ratios = np.empty((len(radii), len(idx)))
    for i, r in enumerate(radii):
        ratios[i] = S.mass_in_boxes(centers, r) / r**S.dimension_d
    unreliable = radii <= 4 * S.resolution
    use = ratios[~unreliable] if np.any(~unreliable) else ratios
    return RegularityResult(float(use.min()), float(use.max()), ratios, radii, unreliable)


@dataclass
class PorosityResult:
    kappa: float
    kappas: np.ndarray
    resolution_limited: np.ndarray
    porous: bool


def check_porosity(S, num_cubes, seed=0, grid=33, r_range=(2.0**-6, 1.0), kappa_cap=1e3, centers=None):
    """Estimate the porosity constant by grid search for the largest empty sub-cube.

    For each sampled cube Q(x, r) the best hole radius is
    max over grid points y of min(dist(y, S) - resolution, r - |y - x|_inf);
    the sample's kappa is r divided by it.
    """
    rng = np.random.default_rng(seed)
    if centers is None:
        idx = rng.integers(0, len(S.points), size=num_cubes)
        jitter = rng.uniform(-1, 1, size=(num_cubes, 2))
    lo, hi = np.log2(r_range[0]), np.log2(r_range[1])
    rs = 2.0 ** rng.uniform(lo, hi, size=num_cubes)
    if centers is None:
        xs = S.points[idx] + 0.5 * rs[:, None] * jitter
    else:
        xs = np.asarray(centers, dtype=float).reshape(-1, 2)
    t = np.linspace(-1.0, 1.0, grid)
    gx, gy = np.meshgrid(t, t, indexing="ij")
    offs = np.stack([gx.ravel(), gy.ravel()], axis=1)
    kappas = np.empty(num_cubes)
    limited = np.zeros(num_cubes, dtype=bool)
    for j in range(num_cubes):
        ys = xs[j] + rs[j] * offs
        dist = S.distance(ys)
        room = rs[j] * (1.0 - np.max(np.abs(offs), axis=1))
        hole = np.minimum(dist - S.resolution, room)
        best = hole.max()
        limited[j] = dist.max() <= 2 * S.resolution
        kappas[j] = rs[j] / best if best > 0 else np.inf
    kappa = float(kappas.max())
    return PorosityResult(kappa, kappas, limited, bool(np.isfinite(kappa) and kappa <= kappa_cap))


@dataclass(frozen=True)
class FractalConfig:
    """Serializable fractal description: {family, bend_angle, depth, seed}."""

    family: str = "koch"
    bend_angle: float = math.pi / 3
    depth: int = 8
    seed: int = 0

    def to_json(self):
        return json.dumps(
            {"family": self.family, "bend_angle": self.bend_angle, "depth": self.depth, "seed": self.seed},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def save_cloud(path, S):
    """Write the cloud as little-endian float64 triples (x, y, weight)."""
    arr = np.empty((len(S.points), 3), dtype="<f8")
    arr[:, :2] = S.points
    arr[:, 2] = S.weights
    Path(path).write_bytes(arr.tobytes())


def load_cloud(path):
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f8").reshape(-1, 3)
    return raw[:, :2].astype(np.float64), raw[:, 2].astype(np.float64)


def build_from_config(cfg, cache_dir=None):
    """Build the fractal (or snowflake domain) described by ``cfg``.

    When ``cache_dir`` is given the point cloud is read from or written to
    ``<cache_dir>/clouds/<hash>.bin``.
    """
    if cfg.family == "koch":
        out = build_koch_family(cfg.bend_angle, cfg.depth)
    elif cfg.family == "segment":
        out = build_segment(cfg.depth)
    elif cfg.family == "snowflake":
        out = build_snowflake_domain(cfg.bend_angle, cfg.depth)
    else:
        raise ValueError(f"unknown fractal family {cfg.family!r}")
    if cache_dir is None:
        return out
    S = out.boundary if isinstance(out, DomainSpec) else out
    path = Path(cache_dir) / "clouds" / f"{cfg.content_hash()}.bin"
    if path.exists():
        pts, w = load_cloud(path)
        if pts.shape != S.points.shape or not np.array_equal(pts, S.points):
            raise RuntimeError(f"cached cloud {path} does not match its configuration")
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_cloud(path, S)
    return out
