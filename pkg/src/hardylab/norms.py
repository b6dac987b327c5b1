"""Hardy functional, smoothness norms, traces and the discrete inequalities.

All integrals run over a fixed working box; functions used in experiments
are supported inside it. Distances are in the sup norm unless noted; the
Gagliardo kernel and the Riesz kernel use Euclidean |x - y|.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from hardylab.approx import gauss_grid, local_errors

__all__ = [
    "SmoothnessParams",
    "NormBreakdown",
    "HardyValue",
    "GagliardoValue",
    "TraceResult",
    "RieszResult",
    "XGrid",
    "fit_power_law",
    "hardy_lhs",
    "gagliardo_seminorm",
    "tl_norm",
    "sharp_maximal",
    "trace",
    "riesz_energy",
    "discrete_hardy_check",
    "hardy_sum_bound",
    "reverse_holder_check",
    "reverse_holder_grid",
]

N_DIM = 2


@dataclass(frozen=True)
class SmoothnessParams:
    s: float
    p: float
    q: float = 2.0

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("smoothness s must be positive")
        if not 1 < self.p < math.inf:
            raise ValueError("p must lie in (1, inf)")
        if not self.q >= 1:
            raise ValueError("q must be >= 1")

    @property
    def k(self):
        return int(math.floor(self.s)) + 1

    @property
    def u(self):
        """Local approximation exponent: p when q >= p, else 1."""
        return self.p if self.q >= self.p else 1.0

    def trace_threshold(self, d):
        return (N_DIM - d) / self.p

    def admits_hardy(self, d):
        return self.s > self.trace_threshold(d)


@dataclass
class NormBreakdown:
    lp_part: float
    seminorm_part: float
    per_level: list
    fringe_volume: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.lp_part + self.seminorm_part

    def to_record(self):
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass
class HardyValue:
    value: float
    fringe_bound: float
    per_level: dict
    fringe_volume: float

    @property
    def value_p(self):
        return self.per_level_total

    @property
    def per_level_total(self):
        return float(sum(self.per_level.values()))


@dataclass
class GagliardoValue:
    value: float
    shell_bound: float
    shell_radius: float


@dataclass
class TraceResult:
    value: float
    converged: bool
    averages: np.ndarray
    radii: np.ndarray
    rate: float = math.nan


@dataclass
class RieszResult:
    slope: float
    residual: float
    t: np.ndarray
    values: np.ndarray
    expected: float
    fringe_volume: np.ndarray


@dataclass(frozen=True)
class XGrid:
    """Composite tensor Gauss grid over a box; weights are true areas."""

    box: tuple = (-2.0, 2.0, -2.0, 2.0)
    cells: int = 32
    order: int = 2

    def points(self):
        x0, x1, y0, y1 = self.box
        t, w = np.polynomial.legendre.leggauss(self.order)
        hx = (x1 - x0) / self.cells
        hy = (y1 - y0) / self.cells
        ex = x0 + hx * (np.arange(self.cells)[:, None] + 0.5 + 0.5 * t[None, :])
        ey = y0 + hy * (np.arange(self.cells)[:, None] + 0.5 + 0.5 * t[None, :])
        wx = np.tile(0.5 * w * hx, self.cells)
        wy = np.tile(0.5 * w * hy, self.cells)
        gx, gy = np.meshgrid(ex.ravel(), ey.ravel(), indexing="ij")
        ww = np.outer(wx, wy).ravel()
        return np.stack([gx.ravel(), gy.ravel()], 1), ww


def fit_power_law(x, y, log_base=2.0):
    """OLS slope of log y against log x; returns (slope, intercept, rms residual)."""
    lx = np.log(np.asarray(x, dtype=float)) / math.log(log_base)
    ly = np.log(np.asarray(y, dtype=float)) / math.log(log_base)
    A = np.stack([lx, np.ones_like(lx)], 1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


def _chunks(n, size):
    for a in range(0, n, size):
        yield slice(a, min(n, a + size))


# -- Hardy functional ------------------------------------------------------


def hardy_lhs(f, S, s, p, W, order=3, chunk=4096, cell_mask=None):
    """(integral over the Whitney cover of |f|^p dist(., S)^(-sp))^(1/p).

    The distance is recomputed at every quadrature node. The fringe is not
    integrated; the estimate sup|f|^p * volume * (2^-max_level)^(-sp) is
    returned separately (a heuristic size, not a bound: inside the fringe
    the distance drops below the cell side). ``cell_mask(centers)`` restricts the integral to
    the selected cells (a domain side of the set, say).
    """
    nodes, w = gauss_grid(order)
    centers = W.centers
    half = W.half_side
    keep = np.ones(len(W), bool) if cell_mask is None else np.asarray(cell_mask(centers), bool)
    sp = s * p
    contrib = np.zeros(len(W))
    for sl in _chunks(len(W), chunk):
        pts = (centers[sl, None, :] + half[sl, None, None] * nodes[None]).reshape(-1, 2)
        d = S.distance(pts)
        vals = np.abs(f(pts)) ** p * d ** (-sp)
        contrib[sl] = (4 * half[sl] ** 2) * (vals.reshape(-1, len(w)) @ w)
    levels = np.unique(W.levels)
    contrib[~keep] = 0.0
    per_level = {int(j): float(contrib[W.levels == j].sum()) for j in levels}
    fc = W.fringe_centers
    fringe_bound = 0.0
    if len(fc):
        # sample |f| on a 3x3 lattice of each fringe cube
        t = np.array([-1.0, 0.0, 1.0])
        lat = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
        fmax = 0.0
        for sl in _chunks(len(fc), chunk):
            pts = (fc[sl, None, :] + W.fringe_half_side * lat[None]).reshape(-1, 2)
            fmax = max(fmax, float(np.max(np.abs(f(pts)))))
        fringe_bound = fmax**p * W.fringe_volume * (2.0**-W.max_level) ** (-sp)
    total = float(contrib.sum())
    return HardyValue(total ** (1 / p), fringe_bound, per_level, W.fringe_volume)


# -- Gagliardo seminorm -------------------------------------------------------


def _exit_length(x, e, box):
    """Distance from x (N, 2) along unit directions e (M, 2) to the box boundary."""
    x0, x1, y0, y1 = box
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = e[None, :, 0]
        ey = e[None, :, 1]
        tx = np.where(ex > 0, (x1 - x[:, None, 0]) / ex, np.where(ex < 0, (x0 - x[:, None, 0]) / ex, np.inf))
        ty = np.where(ey > 0, (y1 - x[:, None, 1]) / ey, np.where(ey < 0, (y0 - x[:, None, 1]) / ey, np.inf))
    return np.minimum(tx, ty)


def gagliardo_seminorm(f, s, p, box, cells=16, order=4, n_theta=32, shells=16, rho_order=4, chunk=256):
    """Truncated W^{s,p} seminorm over ``box``, in polar coordinates around each x.

    For every outer node x and direction theta the radial integral over
    [rho_e 2^-shells, rho_e] (rho_e = exit length from the box) uses Gauss
    rules on dyadic shells. The inner disc of radius 2^-shells * diam is
    not integrated; its contribution is bounded through the Hoelder bound
    ``f.holder = (beta, H)`` and reported as ``shell_bound`` (in p-th power
    units).
    """
    if not 0 < s < 1:
        raise ValueError("the Gagliardo seminorm needs 0 < s < 1")
    holder = getattr(f, "holder", None)
    if holder is None:
        raise ValueError(f"{type(f).__name__} exposes no Hoelder bound near the diagonal")
    beta, H = holder
    if beta <= s:
        raise ValueError(f"Hoelder exponent {beta} does not exceed s = {s}; diagonal shell unbounded")
    xs, xw = XGrid(tuple(box), cells, order).points()
    th = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    e = np.stack([np.cos(th), np.sin(th)], 1)
    gt, gw = np.polynomial.legendre.leggauss(rho_order)
    # shell i covers u in [2^-(i+1), 2^-i] of the exit length
    lo = 2.0 ** -(np.arange(shells) + 1.0)
    u = (lo[:, None] * (1.5 + 0.5 * gt[None, :])).ravel()
    uw = (lo[:, None] * 0.5 * gw[None, :]).ravel()
    total = 0.0
    for sl in _chunks(len(xs), chunk):
        x = xs[sl]
        fx = f(x)
        rho_e = _exit_length(x, e, box)  # (n, T)
        rho = rho_e[:, :, None] * u[None, None, :]
        y = x[:, None, None, :] + rho[..., None] * e[None, :, None, :]
        fy = f(y.reshape(-1, 2)).reshape(rho.shape)
        integrand = np.abs(fx[:, None, None] - fy) ** p * rho ** (-p * s - 1)
        radial = np.sum(integrand * (rho_e[:, :, None] * uw[None, None, :]), axis=2)
        total += float(np.sum(xw[sl] * radial.sum(axis=1)) * (2 * math.pi / n_theta))
    x0, x1, y0, y1 = box
    area = (x1 - x0) * (y1 - y0)
    eps = math.hypot(x1 - x0, y1 - y0) * 2.0**-shells
    shell = area * 2 * math.pi * H**p * eps ** (p * (beta - s)) / (p * (beta - s))
    return GagliardoValue(total ** (1 / p), shell, eps)


def lp_norm(f, p, grid=None):
    pts, w = (grid or XGrid()).points()
    return float(np.sum(w * np.abs(f(pts)) ** p) ** (1 / p))


# -- Triebel-Lizorkin norm and sharp maximal function ----------------------


def _local_error_levels(f, x, radii, k, u, order, chunk=2048):
    """E_k(f, Q(x, r))_{L^u} for every point x and radius r -> (N, R)."""
    nodes, _ = gauss_grid(order)
    out = np.empty((len(x), len(radii)))
    for sl in _chunks(len(x), max(1, chunk)):
        for i, r in enumerate(radii):
            pts = (x[sl, None, :] + r * nodes[None]).reshape(-1, 2)
            vals = f(pts).reshape(-1, len(nodes))
            out[sl, i] = local_errors(vals, k, u, order, strict=False)[0]
    return out


def tl_norm(f, params, x_grid=None, j_max=6, order=8):
    """||f||_p + ||G||_p with G(x) = (sum_j 2^{jsq} E_k(f, Q(x, 2^-j))_{L^u}^q)^(1/q).

    The continuous scale integral is replaced by the dyadic sum; by the
    monotonicity of local approximation the two agree up to the factor
    recorded in ``meta["dyadic_factor"]``.
    """
    if j_max < 0:
        raise ValueError("j_max must be nonnegative")
    grid = x_grid or XGrid()
    pts, w = grid.points()
    s, p, q, k, u = params.s, params.p, params.q, params.k, params.u
    radii = 2.0 ** -np.arange(j_max + 1, dtype=float)
    E = _local_error_levels(f, pts, radii, k, u, order)
    scaled = E * (2.0 ** (s * np.arange(j_max + 1)))[None, :]
    if math.isinf(q):
        G = scaled.max(axis=1)
        per_level = [(j, float(np.sum(w * scaled[:, j] ** p))) for j in range(j_max + 1)]
    else:
        G = np.sum(scaled**q, axis=1) ** (1 / q)
        per_level = [(j, float(np.sum(w * scaled[:, j] ** q))) for j in range(j_max + 1)]
    lp = float(np.sum(w * np.abs(f(pts)) ** p) ** (1 / p))
    semi = float(np.sum(w * G**p) ** (1 / p))
    meta = {"s": s, "p": p, "q": q, "k": k, "u": u, "j_max": j_max, "order": order,
            "grid": {"box": list(grid.box), "cells": grid.cells, "order": grid.order},
            "dyadic_factor": 2.0 ** (s + N_DIM / u)}
    return NormBreakdown(lp, semi, per_level, 0.0, meta)


def sharp_maximal(f, params, x, j_max=8, order=8, dense=0):
    """max over r = 2^-j (j <= j_max) of r^-s E_k(f, Q(x, r))_{L^p}.

    With ``dense > 0`` the radii include ``dense`` intermediate values per
    octave. Returns (values, meta); restricting to dyadic radii loses at
    most the factor ``meta["dyadic_factor"]``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    steps = np.arange(0, (j_max + 1) * (dense + 1)) / (dense + 1)
    steps = steps[steps <= j_max]
    radii = 2.0**-steps
    E = _local_error_levels(f, x, radii, params.k, params.p, order)
    vals = np.max(E * radii[None, :] ** (-params.s), axis=1)
    meta = {"dyadic_factor": 2.0 ** (params.s + N_DIM / params.p), "radii": len(radii)}
    return vals, meta


# -- trace ---------------------------------------------------------------------


def _box_average(f, x, r, box, order):
    lo = np.maximum(x - r, [box[0], box[2]])
    hi = np.minimum(x + r, [box[1], box[3]])
    if np.any(hi <= lo):
        raise ValueError("averaging cube misses the box")
    nodes, w = gauss_grid(order, 1)
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    return float(np.sum(w * f(c + h * nodes)))


def trace(f, x, radii, tol=1e-4, box=(-2.0, 2.0, -2.0, 2.0), order=8, resolution=0.0, ratio_tol=0.02):
    """Limit of averages of f over Q(x, r) for the decreasing schedule ``radii``.

    Converged when the last difference is below ``tol`` times the scale of
    the averages, or when successive differences shrink with a stable
    geometric ratio (to ``ratio_tol``); the value is then the Aitken
    extrapolated limit. Otherwise the last
    average is returned with ``converged=False``.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    r = np.asarray(radii, dtype=float)
    if len(r) < 3 or np.any(np.diff(r) >= 0):
        raise ValueError("need at least three strictly decreasing radii")
    if r[-1] <= resolution:
        raise ValueError("radii must stay above the cloud resolution")
    A = np.array([_box_average(f, x, ri, box, order) for ri in r])
    scale = max(float(np.max(np.abs(A))), 1e-300)
    d = np.diff(A)
    if np.all(np.abs(d[-2:]) <= tol * scale * 1e-3):
        return TraceResult(float(A[-1]), True, A, r, math.nan)
    ratios = d[1:] / np.where(d[:-1] == 0, np.nan, d[:-1])
    rho = ratios[-1]
    geometric = bool(np.all(np.abs(ratios[-2:]) < 0.95)) and np.all(np.isfinite(ratios[-2:]))
    value, converged = float(A[-1]), False
    if geometric:
        value = float(A[-1] + d[-1] * rho / (1 - rho))
        # a stable contraction ratio makes the extrapolation trustworthy
        converged = abs(d[-1]) <= tol * scale or abs(ratios[-1] - ratios[-2]) <= ratio_tol
    rate = math.nan
    dev = np.abs(A - value)
    ok = dev > 0
    if ok.sum() >= 2:
        rate = fit_power_law(r[ok], dev[ok])[0]
    return TraceResult(value, bool(converged), A, r, rate)


# -- Riesz energy ---------------------------------------------------------------


class ClusterTree:
    """Hierarchy of an IFS cloud in word order: level-l blocks are contiguous runs."""

    def __init__(self, S):
        b = len(S.maps)
        n = len(S.points)
        if b < 2:
            raise ValueError("cluster hierarchy needs an IFS cloud")
        comps = n // b**S.depth_m
        if comps * b**S.depth_m != n:
            raise ValueError("cloud size is not components * maps^depth")
        self.branch = b
        self.depth = S.depth_m
        self.levels = []
        w = S.weights
        pts = S.points
        for lev in range(self.depth + 1):
            size = b ** (self.depth - lev)
            m = n // size
            ww = w.reshape(m, size)
            pp = pts.reshape(m, size, 2)
            mass = ww.sum(1)
            cen = (ww[..., None] * pp).sum(1) / mass[:, None]
            lo = pp.min(1)
            hi = pp.max(1)
            self.levels.append((mass, cen, lo, hi))
        self.roots = comps

    def sum(self, y, t, sigma, theta=0.5, chunk=2048):
        """sum over z in Q(y, t) of w_z |y - z|^-sigma, far blocks as point masses."""
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        out = np.zeros(len(y))
        for sl in _chunks(len(y), chunk):
            out[sl] = self._sum_chunk(y[sl], t, sigma, theta)
        return out

    def _sum_chunk(self, y, t, sigma, theta):
        q = np.repeat(np.arange(len(y)), self.roots)
        blk = np.tile(np.arange(self.roots), len(y))
        acc = np.zeros(len(y))
        for lev in range(self.depth + 1):
            mass, cen, lo, hi = self.levels[lev]
            yq = y[q]
            blo, bhi = lo[blk], hi[blk]
            outside = np.any((blo > yq + t) | (bhi < yq - t), axis=1)
            inside = np.all((blo >= yq - t) & (bhi <= yq + t), axis=1)
            if lev == self.depth:
                dz = np.hypot(*(cen[blk] - yq).T)
                take = inside & (dz > 0)
                np.add.at(acc, q[take], mass[blk[take]] * dz[take] ** -sigma)
                break
            gap = np.hypot(*np.maximum(np.maximum(blo - yq, yq - bhi), 0).T)
            diam = np.hypot(*(bhi - blo).T)
            far = inside & (gap * theta >= diam) & (gap > 0)
            if far.any():
                dz = np.hypot(*(cen[blk[far]] - yq[far]).T)
                np.add.at(acc, q[far], mass[blk[far]] * dz**-sigma)
            split = ~outside & ~far
            q = np.repeat(q[split], self.branch)
            blk = (blk[split][:, None] * self.branch + np.arange(self.branch)[None, :]).ravel()
            if q.size == 0:
                break
        return acc


def _local_whitney(S, x, t, depth):
    """Whitney-type cells of Q(x, t) minus S down to side 2t * 2^-depth, plus the leftovers."""
    cen = np.asarray(x, dtype=float).reshape(1, 2)
    half = t
    kept_c, kept_h = [], []
    for lev in range(depth + 1):
        dc = S.distance(cen)
        ok = dc - half >= 2 * half
        kept_c.append(cen[ok])
        kept_h.append(np.full(int(ok.sum()), half))
        rest = cen[~ok]
        if lev == depth:
            fringe = rest
            break
        h2 = half / 2
        offs = np.array([[-h2, -h2], [h2, -h2], [-h2, h2], [h2, h2]])
        cen = (rest[:, None, :] + offs[None]).reshape(-1, 2)
        half = h2
    return np.concatenate(kept_c), np.concatenate(kept_h), fringe, half


def riesz_energy(x, t_list, omega, r, S, rel_depth=7, order=3, method="tree", theta=0.5):
    """Fitted exponent of t -> (int_{Q(x,t)} |int_{Q(y,t) cap S} |y-z|^-(n-omega) dz|^r' dy)^(1/r').

    The outer integral runs over a local Whitney cover of Q(x, t) with
    relative depth ``rel_depth`` (the leftover cells near S are integrated
    with the same rule and their volume reported). The inner integral is a
    weighted cloud sum, either exact (``method="direct"``) or with far
    clusters collapsed to point masses (``method="tree"``).
    """
    if not 0 < omega < 1:
        raise ValueError("omega must lie in (0, 1)")
    if not r > 1:
        raise ValueError("r must exceed 1")
    d = S.dimension_d
    if omega * r <= N_DIM - d:
        raise ValueError("need omega * r > n - d")
    t_list = np.asarray(t_list, dtype=float)
    if np.any(t_list * 2.0 ** -rel_depth < 2 * S.resolution):
        raise ValueError("smallest cells fall below the cloud resolution")
    rp = r / (r - 1)
    sigma = N_DIM - omega
    nodes, w = gauss_grid(order)
    tree = ClusterTree(S) if method == "tree" else None
    values, fringe = [], []
    for t in t_list:
        cen, half, fr, fh = _local_whitney(S, x, t, rel_depth)
        allc = np.concatenate([cen, fr])
        allh = np.concatenate([half, np.full(len(fr), fh)])
        y = (allc[:, None, :] + allh[:, None, None] * nodes[None]).reshape(-1, 2)
        if tree is not None:
            inner = tree.sum(y, t, sigma, theta)
        else:
            inner, _ = S.tree.riesz_sum(y, t, sigma, S.weights)
        cellint = (4 * allh**2) * ((inner.reshape(-1, len(w)) ** rp) @ w)
        values.append(float(cellint.sum()) ** (1 / rp))
        fringe.append(len(fr) * 4 * fh**2)
    values = np.array(values)
    slope, _, res = fit_power_law(t_list, values)
    return RieszResult(slope, res, t_list, values, d + omega - N_DIM / r, np.array(fringe))


# -- discrete inequalities ---------------------------------------------------------


def discrete_hardy_check(a, sigma, p):
    """sum_j 2^{sigma j} (sum_{i>=j} a_i)^p  /  sum_j 2^{sigma j} a_j^p."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError("expected a single sequence")
    return float(discrete_hardy_ratios(a[None, :], sigma, p)[0])


def discrete_hardy_ratios(A, sigma, p):
    """Row-wise ``discrete_hardy_check`` for a (batch, length) array."""
    A = np.asarray(A, dtype=float)
    if sigma <= 0 or p <= 0:
        raise ValueError("need sigma > 0 and p > 0")
    if np.any(A < 0):
        raise ValueError("sequence must be nonnegative")
    j = np.arange(A.shape[1])
    # scale out 2^{sigma j} growth in logs to keep long sequences finite
    lw = sigma * j * math.log(2)
    tails = np.cumsum(A[:, ::-1], axis=1)[:, ::-1]
    with np.errstate(divide="ignore"):
        ln = lw + p * np.log(tails)
        ld = lw + p * np.log(A)
    if not np.isfinite(ld).any(axis=1).all():
        raise ZeroDivisionError("zero denominator")
    m = np.max(np.where(np.isfinite(ln), ln, -np.inf), axis=1, keepdims=True)
    num = np.sum(np.exp(ln - m), axis=1)
    den = np.sum(np.exp(ld - m), axis=1)
    return num / den


def hardy_sum_bound(sigma, p):
    """A valid constant for the sum inequality: (1 - 2^{-sigma/p})^-p for p >= 1, else (1 - 2^-sigma)^-1."""
    if p >= 1:
        return (1 - 2.0 ** (-sigma / p)) ** (-p)
    return 1 / (1 - 2.0**-sigma)


def _cube_key(j, i, k):
    return (int(j), int(i), int(k))


def reverse_holder_check(levels, ix, iy, a, p, q, family=None):
    """||sum_Q a_Q chi_Q||_p / ||(sum_Q (a_Q chi_Q)^q)^(1/q)||_p, exactly.

    Both functions are constant on the pieces of the dyadic overlay of the
    support: each node of the ancestor tree carries the sums over support
    cubes containing it, and its own area minus that of its present
    children. ``family`` (levels, ix, iy), when given, must contain the
    support.
    """
    levels = np.asarray(levels, dtype=np.int64)
    ix = np.asarray(ix, dtype=np.int64)
    iy = np.asarray(iy, dtype=np.int64)
    a = np.asarray(a, dtype=float)
    if not (1 < p < math.inf and 1 < q < math.inf):
        raise ValueError("p and q must lie in (1, inf)")
    if np.any(a < 0):
        raise ValueError("coefficients must be nonnegative")
    support = {}
    for j, i, k, v in zip(levels, ix, iy, a):
        if v > 0:
            key = _cube_key(j, i, k)
            support[key] = support.get(key, 0.0) + v
    if not support:
        raise ZeroDivisionError("empty support")
    if family is not None:
        fam = set(zip(*(np.asarray(c).tolist() for c in family)))
        missing = [c for c in support if c not in fam]
        if missing:
            raise ValueError(f"support leaves the near-boundary family, e.g. {missing[:3]}")
    top = min(j for j, _, _ in support)
    nodes = set()
    for j, i, k in support:
        while True:
            if (j, i, k) in nodes:
                break
            nodes.add((j, i, k))
            if j == top:
                break
            j, i, k = j - 1, i >> 1, k >> 1
    child_area = {}
    for j, i, k in nodes:
        if j > top:
            parent = (j - 1, i >> 1, k >> 1)
            child_area[parent] = child_area.get(parent, 0.0) + 4.0**-j
    num = den = 0.0
    # walk top-down so each node inherits its ancestors' sums
    acc = {}
    for node in sorted(nodes):
        j, i, k = node
        if j > top:
            s1, sq = acc[(j - 1, i >> 1, k >> 1)]
        else:
            s1, sq = 0.0, 0.0
        v = support.get(node, 0.0)
        s1, sq = s1 + v, sq + v**q
        acc[node] = (s1, sq)
        own = 4.0**-j - child_area.get(node, 0.0)
        if own > 0:
            num += own * s1**p
            den += own * sq ** (p / q)
    return float((num / den) ** (1 / p))


def reverse_holder_grid(levels, ix, iy, a, p, q, box, n=1024):
    """Midpoint-grid oracle for ``reverse_holder_check``."""
    x0, x1, y0, y1 = box
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    s1 = np.zeros_like(gx)
    sq = np.zeros_like(gx)
    merged = {}
    for j, i, k, v in zip(levels, ix, iy, a):
        key = _cube_key(j, i, k)
        merged[key] = merged.get(key, 0.0) + v
    for (j, i, k), v in merged.items():
        side = 2.0 ** -int(j)
        m = (gx >= i * side) & (gx < (i + 1) * side) & (gy >= k * side) & (gy < (k + 1) * side)
        s1[m] += v
        sq[m] += v**q
    return float((np.sum(s1**p) / np.sum(sq ** (p / q))) ** (1 / p))


def random_near_boundary_support(family, rng, size, spread=(0.1, 10.0)):
    """Random finitely supported nonnegative sequence on a near-boundary family."""
    lv, ix, iy = family
    pick = rng.choice(len(lv), size=min(size, len(lv)), replace=False)
    vals = np.exp(rng.uniform(np.log(spread[0]), np.log(spread[1]), len(pick)))
    return lv[pick], ix[pick], iy[pick], vals


__all__ += ["lp_norm", "ClusterTree", "random_near_boundary_support", "discrete_hardy_ratios"]
